"""Build script for the optional compiled kernel core.

Use ``python setup.py build_ext --inplace`` for a dev tree, or just
``pip install -e . --no-build-isolation``.  The extension is an
accelerator, not a requirement: if Cython or a C compiler is missing the
install degrades to the pure-NumPy backend selected at import time.
"""

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Let a failed extension compile fall back to the pure wheel."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"warning: building sizeseg._kernels._core failed ({exc}); "
                  "falling back to the pure-NumPy kernels")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: {ext.name} failed to compile ({exc}); "
                  "falling back to the pure-NumPy kernels")


def extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "sizeseg._kernels._core",
        sources=["src/sizeseg/_kernels/_core.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level="3")


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
