"""Build script for the optional compiled kernels.

Without Cython (or a compiler) the package installs pure Python and the
kernels fall back to `lexmdl._pykernels`.
"""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("lexmdl._ckernels", ["src/lexmdl/_ckernels.pyx"],
                   extra_compile_args=["-O3"], language="c++")],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
