import os

from setuptools import Extension, setup

# The compiled kernels are optional: the package falls back to the numpy
# implementation in promptseg._kernels._py when the extension is absent.
ext_modules = []
if os.environ.get("PROMPTSEG_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "promptseg._kernels._core",
                    ["src/promptseg/_kernels/_core.pyx"],
                    optional=True,
                )
            ],
            language_level="3",
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
