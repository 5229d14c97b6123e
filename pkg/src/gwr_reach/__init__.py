"""Grow-when-required networks, Hebbian cross-map associations, and a staged
visuomotor reaching curriculum on a built-in kinematic humanoid simulator."""

from gwr_reach.gwr import GwrNetwork, GwrParams, StepReport, habituation_fixed_point, new_network
from gwr_reach.hebbian import AssociationTable, NoAssociationError, build_associations, recall

__all__ = [
    "GwrNetwork",
    "GwrParams",
    "StepReport",
    "habituation_fixed_point",
    "new_network",
    "AssociationTable",
    "NoAssociationError",
    "build_associations",
    "recall",
]
