import os

from setuptools import Extension, setup

# The compiled kernel is optional: opdiag falls back to the pure-Python
# implementation at import time if the extension is missing.  Set
# OPDIAG_PURE=1 to skip the build entirely.
ext_modules = []
if os.environ.get("OPDIAG_PURE") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "opdiag._kernel",
                    ["src/opdiag/_kernel.pyx"],
                    # -ffp-contract=off keeps the compiled kernel bit-identical
                    # to the pure-Python fallback (no fused multiply-add).
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
