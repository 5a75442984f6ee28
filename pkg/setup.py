from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# The compiled kernels are a pure speed optimization; qtomo._backend falls
# back to the numpy implementation when the extension is missing.
ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "qtomo._kernels",
                ["src/qtomo/_kernels.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
