"""Build script for the optional compiled kernels.

The package works without the extension; ``byzrose._kernels`` falls back to
the numpy implementation when ``_ckernels`` cannot be imported.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("BYZROSE_NO_EXT", "") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "byzrose._ckernels",
                    ["src/byzrose/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
