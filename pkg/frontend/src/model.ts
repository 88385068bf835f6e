/** Pure view-model logic: grid geometry, estimate conversion, navigation.
 *
 * Everything here is side-effect free so the unit tests can pin exact
 * numbers; the DOM layer in app.ts only wires these functions to events.
 */

export type OverlayMode = "off" | "5x4" | "3x3";
export type InputMode = "rectangle-count" | "percent";

/** Wire format accepted by POST /api/annotation. */
export interface AnnotationPayload {
  request_id: string;
  image_id: string;
  class_id: number;
  fraction: number;
  elapsed_ms: number;
  grid_mode: "5x4" | "3x3" | "none";
  annotator: string;
}

export interface ManifestImage {
  id: string;
  tags: number[];
  height: number;
  width: number;
}

export interface Manifest {
  num_classes: number;
  class_names: string[];
  images: ManifestImage[];
}

// ---------------------------------------------------------------------------
// grid overlay geometry

const GRID_DIMS: Record<Exclude<OverlayMode, "off">, { cols: number; rows: number }> = {
  "5x4": { cols: 5, rows: 4 },
  "3x3": { cols: 3, rows: 3 },
};

/** Number of grid cells in an overlay mode (0 when the overlay is off). */
export function cellCount(mode: OverlayMode): number {
  if (mode === "off") return 0;
  const { cols, rows } = GRID_DIMS[mode];
  return cols * rows;
}

export interface GridLines {
  /** x positions of interior vertical lines, in pixels from the left. */
  vertical: number[];
  /** y positions of interior horizontal lines, in pixels from the top. */
  horizontal: number[];
}

/** Interior grid lines over a width x height image; off draws nothing. */
export function gridLines(mode: OverlayMode, width: number, height: number): GridLines {
  if (mode === "off") return { vertical: [], horizontal: [] };
  const { cols, rows } = GRID_DIMS[mode];
  const vertical = [];
  for (let i = 1; i < cols; i++) vertical.push((width * i) / cols);
  const horizontal = [];
  for (let j = 1; j < rows; j++) horizontal.push((height * j) / rows);
  return { vertical, horizontal };
}

// ---------------------------------------------------------------------------
// estimate conversion

/** Convert a rectangle count to an area fraction; fractional counts are fine. */
export function countToFraction(count: number, mode: OverlayMode): number {
  if (!Number.isFinite(count) || count < 0) {
    throw new Error(`rectangle count must be a non-negative number, got ${count}`);
  }
  const cells = cellCount(mode);
  if (cells === 0) {
    throw new Error("rectangle counting needs the grid overlay on");
  }
  return count / cells;
}

/** Parse a percent entry such as "12%" or "12.5" into a fraction. */
export function parsePercent(text: string): number {
  const cleaned = text.trim().replace(/%$/, "").trim();
  if (cleaned === "" || !/^[0-9.]+$/.test(cleaned)) {
    throw new Error(`cannot parse percent entry ${JSON.stringify(text)}`);
  }
  const value = Number(cleaned);
  if (!Number.isFinite(value)) {
    throw new Error(`cannot parse percent entry ${JSON.stringify(text)}`);
  }
  return value / 100;
}

export interface EstimateDraft {
  imageId: string;
  classId: number;
  rawValue: string;
  inputMode: InputMode;
  overlayMode: OverlayMode;
  elapsedMs: number;
  annotator: string;
  requestId: string;
}

/** Convert and validate a draft into the wire payload for the service. */
export function buildAnnotationPayload(draft: EstimateDraft): AnnotationPayload {
  let fraction: number;
  if (draft.inputMode === "percent") {
    fraction = parsePercent(draft.rawValue);
  } else {
    fraction = countToFraction(Number(draft.rawValue), draft.overlayMode);
  }
  if (!(fraction >= 0 && fraction <= 1)) {
    throw new Error(`fraction ${fraction} is outside [0, 1]`);
  }
  if (draft.classId === 0) {
    throw new Error("background is derived at export and never annotated");
  }
  return {
    request_id: draft.requestId,
    image_id: draft.imageId,
    class_id: draft.classId,
    fraction,
    elapsed_ms: draft.elapsedMs,
    grid_mode: draft.overlayMode === "off" ? "none" : draft.overlayMode,
    annotator: draft.annotator,
  };
}

// ---------------------------------------------------------------------------
// navigation and progress

/** Object classes the annotator must estimate (background excluded). */
export function classChecklist(image: ManifestImage): number[] {
  return image.tags.filter((t) => t !== 0).sort((a, b) => a - b);
}

/** An image is complete once every tagged object class has an estimate. */
export function imageComplete(image: ManifestImage, submitted: Set<number>): boolean {
  const todo = classChecklist(image);
  return todo.length > 0 && todo.every((t) => submitted.has(t));
}

/** Step through manifest order; clamps at both ends. */
export function neighborImageId(
  manifest: Manifest,
  currentId: string,
  step: 1 | -1,
): string {
  const ids = manifest.images.map((im) => im.id);
  const at = ids.indexOf(currentId);
  if (at < 0) return ids[0] ?? currentId;
  const next = Math.min(ids.length - 1, Math.max(0, at + step));
  return ids[next];
}

export function completedImageCount(
  manifest: Manifest,
  submittedByImage: Map<string, Set<number>>,
): number {
  let done = 0;
  for (const image of manifest.images) {
    const submitted = submittedByImage.get(image.id) ?? new Set<number>();
    if (imageComplete(image, submitted)) done++;
  }
  return done;
}

// ---------------------------------------------------------------------------
// annotation timer

/** Wall-clock timer that freezes while the tab is unfocused. */
export class AnnotationTimer {
  private accumulatedMs = 0;
  private runningSince: number | null = null;
  private readonly now: () => number;

  constructor(now: () => number = () => Date.now()) {
    this.now = now;
  }

  start(): void {
    this.accumulatedMs = 0;
    this.runningSince = this.now();
  }

  pause(): void {
    if (this.runningSince !== null) {
      this.accumulatedMs += this.now() - this.runningSince;
      this.runningSince = null;
    }
  }

  resume(): void {
    if (this.runningSince === null) {
      this.runningSince = this.now();
    }
  }

  elapsedMs(): number {
    const live = this.runningSince === null ? 0 : this.now() - this.runningSince;
    return this.accumulatedMs + live;
  }
}
