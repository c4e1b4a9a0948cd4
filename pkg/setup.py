"""Build script for the compiled cluster kernel.

The package works without the extension (a numpy/scipy fallback is selected
at import time), so failure to compile is tolerated when LACELAB_REQUIRE_EXT
is unset.
"""

import os

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - source install without Cython
    ext_modules = []
else:
    extensions = [
        Extension(
            "lacelab.mc._cluster_core",
            ["src/lacelab/mc/_cluster_core.pyx"],
            include_dirs=[numpy.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            extra_compile_args=["-O3"],
        )
    ]
    ext_modules = cythonize(extensions, compiler_directives={"language_level": "3"})

if os.environ.get("LACELAB_REQUIRE_EXT") and not ext_modules:
    raise RuntimeError("LACELAB_REQUIRE_EXT is set but Cython/numpy are unavailable")

setup(ext_modules=ext_modules)
