/** The only three endpoints the annotation client ever touches.
 *
 * The blind protocol depends on this list staying short: the manifest and
 * image endpoints carry no ground truth, and the client never calls the
 * experimenter-facing stats or export routes. A contract test audits this
 * file for exactly these paths.
 */

import type { AnnotationPayload, Manifest } from "./model.js";

export const MANIFEST_URL = "/api/manifest";
export const ANNOTATION_URL = "/api/annotation";

export function imageUrl(imageId: string): string {
  return `/api/image/${encodeURIComponent(imageId)}`;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export async function fetchManifest(fetchFn: FetchLike = fetch): Promise<Manifest> {
  const resp = await fetchFn(MANIFEST_URL);
  if (!resp.ok) {
    throw new Error(`manifest request failed: ${resp.status}`);
  }
  return (await resp.json()) as Manifest;
}

export interface PostResult {
  recordId: string;
  created: boolean;
}

/** POST an estimate; network failures and 5xx retry with the same request id,
 * so a replayed submission lands on the service's idempotent path. */
export async function postAnnotation(
  payload: AnnotationPayload,
  fetchFn: FetchLike = fetch,
  attempts = 3,
  delayMs = 250,
  sleep: (ms: number) => Promise<void> = (ms) => new Promise((r) => setTimeout(r, ms)),
): Promise<PostResult> {
  let lastError: unknown = null;
  for (let attempt = 0; attempt < attempts; attempt++) {
    if (attempt > 0) await sleep(delayMs * attempt);
    try {
      const resp = await fetchFn(ANNOTATION_URL, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(payload),
      });
      if (resp.status === 201 || resp.status === 200) {
        const body = (await resp.json()) as { record_id: string };
        return { recordId: body.record_id, created: resp.status === 201 };
      }
      if (resp.status >= 400 && resp.status < 500) {
        const detail = await resp.text();
        throw new Error(`rejected (${resp.status}): ${detail}`);
      }
      lastError = new Error(`server error ${resp.status}`);
    } catch (err) {
      if (err instanceof Error && err.message.startsWith("rejected")) throw err;
      lastError = err;
    }
  }
  throw lastError instanceof Error ? lastError : new Error(String(lastError));
}
