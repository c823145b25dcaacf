import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("AFSL_NO_EXTENSION", "") in ("", "0"):
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "afsl.kernels._ckernels",
                    ["src/afsl/kernels/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    # no contraction into FMA: keeps bitwise parity with numpy
                    extra_compile_args=["-O3", "-fopenmp", "-ffp-contract=off"],
                    extra_link_args=["-fopenmp"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
