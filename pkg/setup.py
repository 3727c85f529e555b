"""Builds the optional compiled kernel extension.

The package works without it (pure-Python kernels are selected at import
time); set SADSIM_SKIP_EXT=1 to skip compilation entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("SADSIM_SKIP_EXT") != "1":
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "sadsim._core._kernels_cy",
                ["src/sadsim/_core/_kernels_cy.pyx"],
                # no fp contraction / builtin sincos pairing: results stay
                # bit-identical to the pure-Python kernels
                extra_compile_args=["-O3", "-ffp-contract=off",
                                    "-fno-builtin"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
