import os

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# -ffp-contract=off: the compiled kernels must be bit-identical to the
# pure-Python scalar path, so FMA contraction is not allowed.
extensions = [
    Extension(
        "tinymatch._kernels._ext",
        sources=["src/tinymatch/_kernels/_ext.pyx"],
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

if cythonize is not None and not os.environ.get("TINYMATCH_PURE"):
    ext_modules = cythonize(
        extensions, compiler_directives={"language_level": "3"}
    )
else:
    ext_modules = []

setup(ext_modules=ext_modules)
