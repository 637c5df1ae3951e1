import numpy  # noqa: F401  (build environment check)
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; flexlat.kernels falls back to numpy
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("flexlat._kernels", ["src/flexlat/_kernels.pyx"],
                   extra_compile_args=["-O3"], optional=True)],
        language_level=3,
    )

setup(ext_modules=ext_modules)
