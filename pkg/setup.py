"""Build script: compiles the optional Z2 reduction extension.

The package works without the extension (a pure-Python fallback is selected
at import time), so compilation failures must not break installation.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "memloop._fastreduce",
                ["src/memloop/_fastreduce.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-env dependent
    print(f"memloop: skipping compiled reduction core ({exc}); "
          "pure-Python fallback will be used")

setup(ext_modules=ext_modules)
