import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("VECMAP_NO_EXT", "") in ("", "0"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "vecmap._ext",
                ["src/vecmap/_ext.pyx"],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
