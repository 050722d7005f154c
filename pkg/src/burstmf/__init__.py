"""Mean-field and bifurcation toolkit for adapting integrate-and-fire networks.

The package simulates the full spiking network, integrates the associated
piecewise-smooth-continuous mean-field equations through their switching
manifold, computes equilibria and smooth bifurcation curves in closed
form, and locates the non-smooth bifurcations (boundary equilibrium
bifurcations, grazing, saddle-node of limit cycles and their codimension-2
organizing points) in the coupling/current parameter plane.
"""

from .models import (
    CoefficientFns,
    DerivedParams,
    ModelKind,
    ModelParams,
    derive,
    load_params,
    preset,
    preset_names,
)

__all__ = [
    "CoefficientFns",
    "DerivedParams",
    "ModelKind",
    "ModelParams",
    "derive",
    "load_params",
    "preset",
    "preset_names",
]

__version__ = "0.1.0"
