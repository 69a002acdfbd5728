"""Build the optional MPFR kernel extension.

The extension is optional: if Cython, a C compiler or the MPFR/GMP headers
are missing, the package installs with its pure-Python kernels only.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - build without Cython
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "qzeta._ckernels",
                ["src/qzeta/_ckernels.pyx"],
                libraries=["mpfr", "gmp"],
                extra_compile_args=["-O2"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
