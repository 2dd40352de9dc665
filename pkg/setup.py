"""Build script: compiles the optional Cython kernel core.

The package is fully functional without the extension (a numpy fallback is
selected at import), so a failed compile degrades to a warning rather than
aborting the install.
"""

import warnings

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "melmask.kernels._opt",
                sources=["src/melmask/kernels/_opt.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build environment dependent
    warnings.warn(f"Cython kernel core not built ({exc}); numpy fallback will be used")

setup(ext_modules=ext_modules)
