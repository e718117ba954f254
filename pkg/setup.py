"""Build script for the compiled stepping kernel.

The extension is optional: if Cython or a C compiler is unavailable the
install still succeeds and the package falls back to the pure-Python twin
kernel at import time (see spiralwell.backends).
"""

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the kernel extension, but never fail the whole install."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"warning: compiled kernel skipped ({exc}); "
                  "pure-Python backend will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: building {ext.name} failed ({exc}); "
                  "pure-Python backend will be used")


# Bit-identity with the pure-Python twin requires plain libm semantics:
# -ffp-contract=off forbids fused multiply-add contraction, and disabling
# the sin/cos builtins stops gcc from fusing sin+cos pairs into sincos(),
# whose cosine can differ from cos() by an ulp.
extensions = [
    Extension(
        "spiralwell._kernel",
        ["src/spiralwell/_kernel.pyx"],
        extra_compile_args=["-O3", "-ffp-contract=off",
                            "-fno-builtin-sin", "-fno-builtin-cos"],
    )
]

try:
    from Cython.Build import cythonize
    ext_modules = cythonize(extensions, compiler_directives={"language_level": "3"})
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
