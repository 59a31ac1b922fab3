"""Build script: compiles the optional C extension when Cython is available.

The package works without the extension (a NumPy fallback is selected at
import time), so any failure here degrades the install instead of breaking it.
Set AFFPLAN_NO_EXT=1 to skip the extension build entirely.
"""

import os

from setuptools import Extension, setup


def _extensions():
    if os.environ.get("AFFPLAN_NO_EXT"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    # -ffp-contract=off keeps every multiply-add rounded separately; fused
    # contraction would make reductions over regions depend on column order
    # and break the bitwise permutation symmetry of the attention output.
    fp_flags = ["-ffp-contract=off"] if os.name == "posix" else []
    ext = Extension(
        "affplan._kernels._ext",
        ["src/affplan/_kernels/_ext.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=fp_flags,
    )
    return cythonize(
        [ext],
        language_level=3,
        compiler_directives={"boundscheck": False, "wraparound": False},
    )


setup(ext_modules=_extensions())
