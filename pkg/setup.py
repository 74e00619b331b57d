from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("tapscout._kernel._accel", ["src/tapscout/_kernel/_accel.pyx"])],
        language_level=3,
    )
except ImportError:
    # No Cython at build time: install pure-Python only, the kernel
    # falls back to tapscout._kernel._reference at import.
    ext_modules = []

setup(ext_modules=ext_modules)
