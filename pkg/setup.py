import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "wignerlab._flow_core",
                ["src/wignerlab/_flow_core.pyx"],
                extra_compile_args=["-O3", "-march=native", "-funroll-loops"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    # No Cython: the package still works on the pure-Python backend.
    ext_modules = []

setup(ext_modules=ext_modules)
