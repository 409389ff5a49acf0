"""Builds the optional Cython tick kernel.

The package works without the extension: dglight.sim.engine falls back to the
pure-Python kernel when the compiled module is missing, so any build failure
here is non-fatal by design.
"""

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    extensions = cythonize(
        [
            Extension(
                "dglight.sim._engine_cy",
                ["src/dglight/sim/_engine_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
