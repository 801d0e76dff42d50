from setuptools import Extension, setup
from Cython.Build import cythonize

ext_module = Extension(
    "gpreg._gpk",
    ["src/gpreg/_gpk.pyx"],
)

setup(
    ext_modules=cythonize(ext_module, language_level=3),
)
