import os

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:  # build without the compiled core; the numpy backend is used
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "decoherence._kbcore",
                ["src/decoherence/_kbcore.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
        quiet=True,
    )

if os.environ.get("DECOHERENCE_NO_EXT"):
    ext_modules = []

setup(ext_modules=ext_modules)
