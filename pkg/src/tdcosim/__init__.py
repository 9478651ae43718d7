"""Coupled transmission-distribution power-flow co-simulation.

A three-sequence transmission solver and a three-phase radial feeder solver
exchange boundary variables at points of common coupling until the joint
solution converges at every time step; an economic dispatch sets generator
outputs on a coarser cadence.
"""
from . import cosim, dsolve, ed, io, netmodel, seqxform, tsolve
from .errors import (
    ConvergenceError,
    DegenerateVoltageError,
    DispatchError,
    ParseError,
    SingularNetworkError,
    TdcosimError,
    VoltageCollapseError,
)

__version__ = "0.1.0"

__all__ = [
    "cosim",
    "dsolve",
    "ed",
    "io",
    "netmodel",
    "seqxform",
    "tsolve",
    "ConvergenceError",
    "DegenerateVoltageError",
    "DispatchError",
    "ParseError",
    "SingularNetworkError",
    "TdcosimError",
    "VoltageCollapseError",
    "__version__",
]
