"""Build the optional compiled kernel extension.

The package works without it (a pure-Python fallback is selected at import
time), so a failed extension build only costs speed.
"""

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "beautycontest._kernels",
        ["src/beautycontest/_kernels.pyx"],
        include_dirs=[np.get_include()],
        # -ffp-contract=off keeps float results bit-identical to the pure
        # Python backend (no FMA contraction), which the parity tests rely on.
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
    )
)
