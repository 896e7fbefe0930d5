"""Exact rank-one tower dynamics, group cocycles over them, and seeded
Monte-Carlo verification of their point-process suspensions."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("chaconlab")
except PackageNotFoundError:  # running from a source tree without install
    __version__ = "0+unknown"

__all__ = ["__version__"]
