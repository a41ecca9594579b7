"""Build hook for the optional compiled back-substitution kernel.

The package works without it (a numpy fallback is selected at import);
build in place with  python setup.py build_ext --inplace  when Cython
and a C compiler are available.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "expfun._kernels",
                ["src/expfun/_kernels.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
