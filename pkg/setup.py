import os

from setuptools import setup

ext_modules = []
if os.environ.get("CFPILOT_NO_EXT", "") in ("", "0"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("cfpilot._kernels", ["src/cfpilot/_kernels.pyx"],
                       extra_compile_args=["-O3"])],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        # no Cython: the pure-Python kernels are picked up at import
        ext_modules = []

setup(ext_modules=ext_modules)
