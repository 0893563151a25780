"""Asynchronous Slepian-Wolf coding toolkit for finite classes of sources
observed with bounded relative delay."""

from .probcore import JointPmf, Pmf, dsbs
from .delaysource import DelaySpec
from .bounds import SourceClass, best_exponent, rate_region
from .codec import DecodeRule, build_code

__all__ = ["JointPmf", "Pmf", "dsbs", "DelaySpec", "SourceClass", "rate_region",
           "best_exponent", "DecodeRule", "build_code"]
__version__ = "0.1.0"
