import numpy
from setuptools import setup
from setuptools.extension import Extension

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "spinquench._kernels",
                ["src/spinquench/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    # No Cython at build time: the package falls back to the numpy kernels.
    extensions = []

setup(ext_modules=extensions)
