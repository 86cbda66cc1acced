"""Finite dyadic models of two-weight estimates for well-localized operators."""

from ._dyadlab import *  # noqa: F401,F403
from ._dyadlab import __doc__  # noqa: F401

__version__ = "0.1.0"
