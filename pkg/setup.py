"""Build script for the optional compiled t-SNE kernels.

The package is pure Python apart from fieldvae._kernels.tsne_core; if
Cython (or a C compiler) is unavailable the extension is skipped and the
numpy fallback is used at runtime.
"""

from setuptools import setup

try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "fieldvae._kernels.tsne_core",
                ["src/fieldvae/_kernels/tsne_core.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level="3",
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
