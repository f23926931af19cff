import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("AAADMM_NO_EXTENSION"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "aaadmm._kernels",
                    ["src/aaadmm/_kernels.pyx"],
                    extra_compile_args=["-O3", "-fcx-limited-range"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
