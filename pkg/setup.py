"""Build the optional compiled kernels; the package works without them."""
import os
import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            self._warn(exc)

    def _warn(self, exc):
        sys.stderr.write(f"warning: compiled kernels not built ({exc}); using pure Python\n")


def extensions():
    if os.environ.get("STREAMTRACE_NO_EXT"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    from setuptools import Extension

    ext = Extension(
        "streamtrace.sqlite._kernels_c",
        ["src/streamtrace/sqlite/_kernels_c.pyx"],
        extra_compile_args=["-O3"],
    )
    try:
        return cythonize([ext], compiler_directives={"language_level": "3"}, quiet=True)
    except Exception as exc:  # noqa: BLE001
        sys.stderr.write(f"warning: cythonize failed ({exc}); using pure Python\n")
        return []


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
