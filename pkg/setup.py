"""Build hook for the optional Cython kernels.

The package imports and runs without them; ``permdecomp.kernels`` falls back
to the numpy implementation when the extension is missing.
"""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - no compiler toolchain
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "permdecomp._kernels",
                ["src/permdecomp/_kernels.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
