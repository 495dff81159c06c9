"""Build script: compiles the event-loop kernel as a C extension.

The extension is optional.  If the build fails (no compiler, no Cython),
the package still installs and falls back to the pure-Python kernel at
import time.
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Degrade to the pure-Python kernel instead of failing the install."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            warnings.warn(f"skipping compiled kernel ({exc}); "
                          "the pure-Python fallback will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"skipping compiled kernel ({exc}); "
                          "the pure-Python fallback will be used")


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        warnings.warn("Cython not available; installing without the compiled kernel")
        return []
    # -ffp-contract=off keeps strict IEEE semantics so the compiled kernel is
    # bit-identical to the pure-Python fallback (no FMA contraction).
    ext = Extension(
        "deffuant_lab._kernel",
        ["src/deffuant_lab/_kernel.pyx"],
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
