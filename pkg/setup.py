"""Build script. The Cython kernels are optional: when Cython or a C compiler
is missing the package installs with the numpy fallback only."""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("TGREV_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "tgrev._kernels",
                    ["src/tgrev/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
        )
    except Exception as exc:  # pragma: no cover - depends on toolchain
        print(f"skipping compiled kernels: {exc}")
        ext_modules = []

setup(ext_modules=ext_modules)
