"""Trapped-ion universal bosonic simulator: invariant-based control design,
two-ion double-well dynamics, Fock-space simulation and circuit composition."""

from .core_lr import PhysicalParams, TimeProfile
from .errors import IonUBSError

__all__ = ["PhysicalParams", "TimeProfile", "IonUBSError"]
