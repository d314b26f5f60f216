"""Build script: compiles the optional BM25 scoring kernel.

The package is fully functional without the extension (a NumPy fallback is
selected at import time), so any Cython/compiler failure degrades to a pure
build instead of aborting the install.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "regrag._kernels._bm25",
                ["src/regrag/_kernels/_bm25.pyx"],
            )
        ],
        language_level=3,
    )
except Exception:  # noqa: BLE001 - missing Cython/toolchain falls back to pure python
    ext_modules = []

setup(ext_modules=ext_modules)
