from setuptools import setup, Extension

# The compiled kernels are optional: the package falls back to the pure
# Python implementations in scenesim.kernels_py when the extension is
# missing (see scenesim/kernels.py).
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("scenesim._kernelsc", ["src/scenesim/_kernelsc.pyx"])],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
