import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

# The extension is optional: without a compiler the package falls back to
# the pure-Python time loop.
extensions = [
    Extension(
        "hfgt_hydro.kernels._euler",
        sources=["src/hfgt_hydro/kernels/_euler.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O2", "-ffp-contract=off"],
        optional=True,
    )
]

setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": 3}),
)
