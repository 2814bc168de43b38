"""Build script: compiles the optional Cython kernel extension.

The package is fully functional without the extension (a pure-numpy
fallback is selected at import time), so any build failure here is
non-fatal: we simply ship no extension modules.
"""
from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "fermidyn._kernels",
                ["src/fermidyn/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    print(f"fermidyn: skipping Cython extension build ({exc!r})")

setup(ext_modules=ext_modules)
