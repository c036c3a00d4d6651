"""Build script: compiles the optional fast-kernel extension.

The package is fully functional without the extension; cycletrans.nn.kernels
falls back to the numpy implementation when the compiled module is absent.
"""

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "cycletrans.nn._fastkernels",
                ["src/cycletrans/nn/_fastkernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
