"""Variational solver for the logarithmic Schrodinger equation on a box.

Finds critical points of the log-Schrodinger energy by regularising it with
a small W^{1,p} term (p < 2), locating a mountain-pass point of the smooth
perturbed functional, and continuing the solution as the perturbation is
driven to zero.  Distinct solutions are obtained by deflating already-found
ones out of the search.  Every structural identity the construction relies
on is exposed as a named check in :mod:`lse.verify`.
"""

from .energy import (
    EnergyParts,
    Harmonic,
    PerturbationParams,
    Quartic,
    Shifted,
    Tabulated,
    el_gradient,
    energy_parts,
    energy_total,
    log_density,
    log_nonlin,
    residual_original,
    validate_potential,
)
from .grid import (
    EdgeGradient,
    Field,
    Grid,
    forward_gradient,
    integrate,
    make_grid,
    neg_laplacian_apply,
    norm_h1v,
    norm_w1p,
)
from .io_cli import (
    ConfigError,
    FieldFormatError,
    RunSpec,
    main,
    parse_config,
    read_field,
    run,
    write_field,
)
from .multiplicity import (
    DeflationSet,
    ProximityError,
    deflate_direction,
    find_k_solutions,
    structured_seed,
)
from .solver import (
    CollapseError,
    ContinuationSchedule,
    ConvergenceFailure,
    DescentResult,
    GeometryFailure,
    LambdaRecord,
    MountainPassConfig,
    MountainPassResult,
    SolveReport,
    SolverError,
    check_geometry,
    continue_to_limit,
    default_seed,
    descend,
    find_t0,
    mountain_pass,
)
from .verify import (
    REGISTRY,
    CheckResult,
    check_energy_identity,
    check_gradient_fd,
    check_linf,
    check_log_sobolev,
    check_nehari,
    check_scaling,
)

__all__ = [
    "CheckResult",
    "CollapseError",
    "ConfigError",
    "ContinuationSchedule",
    "ConvergenceFailure",
    "DeflationSet",
    "DescentResult",
    "EdgeGradient",
    "EnergyParts",
    "Field",
    "FieldFormatError",
    "GeometryFailure",
    "Grid",
    "Harmonic",
    "LambdaRecord",
    "MountainPassConfig",
    "MountainPassResult",
    "PerturbationParams",
    "ProximityError",
    "Quartic",
    "REGISTRY",
    "RunSpec",
    "Shifted",
    "SolveReport",
    "SolverError",
    "Tabulated",
    "check_energy_identity",
    "check_geometry",
    "check_gradient_fd",
    "check_linf",
    "check_log_sobolev",
    "check_nehari",
    "check_scaling",
    "continue_to_limit",
    "default_seed",
    "deflate_direction",
    "descend",
    "el_gradient",
    "energy_parts",
    "energy_total",
    "find_k_solutions",
    "find_t0",
    "forward_gradient",
    "integrate",
    "log_density",
    "log_nonlin",
    "main",
    "make_grid",
    "mountain_pass",
    "neg_laplacian_apply",
    "norm_h1v",
    "norm_w1p",
    "parse_config",
    "read_field",
    "residual_original",
    "run",
    "structured_seed",
    "validate_potential",
    "write_field",
]

__version__ = "0.1.0"
