"""Decision procedures for affine continuous VASS."""

from .core import (
    AffineCVASS,
    Configuration,
    Firing,
    FiringSequence,
    Infeasible,
    IntMatrix,
    RatVector,
    Transition,
    ZeroTest,
    ZeroTestCVASS,
    make_machine,
    make_zerotest_machine,
)

__all__ = [
    "AffineCVASS",
    "Configuration",
    "Firing",
    "FiringSequence",
    "Infeasible",
    "IntMatrix",
    "RatVector",
    "Transition",
    "ZeroTest",
    "ZeroTestCVASS",
    "make_machine",
    "make_zerotest_machine",
]
