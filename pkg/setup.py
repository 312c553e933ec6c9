"""Build the optional compiled kernel module.

The package is fully functional without it; ``westervelt.kernels`` falls back
to the numpy implementation when the extension cannot be imported.
"""
import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - pure-Python install
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "westervelt._ckernels",
                ["src/westervelt/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                # no -ffast-math: backends must agree bitwise
                extra_compile_args=["-O3", "-ffp-contract=off"],
                optional=True,
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
