from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "specshift._speckern",
                ["src/specshift/_speckern.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
        },
    )
except ImportError:
    # No Cython toolchain: install pure-Python only, the kernel
    # dispatcher falls back at import time.
    extensions = []

setup(ext_modules=extensions)
