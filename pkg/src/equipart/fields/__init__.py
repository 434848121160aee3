"""Grids, sampled fields, finite differences, norms and the closed-form kernel."""
from .closedform import (
    ONE,
    TIME_AXIS,
    ZERO,
    ClosedForm,
    ClosedFormError,
    adaptive_simpson,
    affine,
    antiderivative,
    as_expr,
    const,
    coords,
    cos,
    cosh,
    exp,
    from_json,
    parse,
    sin,
    sinh,
    sqrt,
    tanh,
    to_json,
    var,
)
from .fd import divergence, fd_array, fd_derivative, fd_partial, fornberg_weights, grad, laplacian
from .grid import Grid, ScalarField, VectorField
from .report import ANALYTIC_TOL, ResidualReport, SaturatedResidualError, convergence_order
from .sampling import Partials, eval_closed_form, evaluate_on, first_point, sample

__all__ = [
    "ANALYTIC_TOL", "ONE", "TIME_AXIS", "ZERO", "ClosedForm", "ClosedFormError", "Grid", "Partials",
    "ResidualReport", "SaturatedResidualError", "ScalarField", "VectorField", "adaptive_simpson",
    "affine", "antiderivative", "as_expr", "const", "convergence_order", "coords", "cos", "cosh",
    "divergence", "eval_closed_form", "evaluate_on", "exp", "fd_array", "fd_derivative", "fd_partial", "first_point",
    "fornberg_weights", "from_json", "grad", "laplacian", "parse", "sample", "sin", "sinh", "sqrt",
    "tanh", "to_json", "var",
]
