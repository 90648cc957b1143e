"""Python access to the pdeop simulators, adjoint gradients and benchmark runner."""

from ._pdeop import (
    Operator,
    PdeopError,
    Simulator,
    adjoint_gradient_static,
    run,
    static_objective,
    terminal_mse,
)

__all__ = [
    "Operator",
    "PdeopError",
    "Simulator",
    "adjoint_gradient_static",
    "run",
    "static_objective",
    "terminal_mse",
]
