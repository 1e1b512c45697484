"""Energy functional for the logarithmic Schrodinger equation on a grid.

The unperturbed energy of a field u is

    I(u) = 1/2 * integral( |grad u|^2 + (V + 1) u^2 ) - 1/2 * integral( u^2 log u^2 )

and the solver works with a p-perturbed version (1 < p < 2, 0 <= lam <= 1)

    I_lam(u) = lam/p * ( integral |grad u|^p + integral |u|^p ) + I(u)

whose critical points converge to solutions of  -Lap u + V u = u log u^2
as lam -> 0.  The degenerate p-terms are regularized through the edge
weight w = (|grad u|^2 + eps^2)^((p-2)/2); both the energy and its
gradient use the *same* weight, so the discrete counterpart of the
algebraic identity

    2 I_lam(u) - <I_lam'(u), u> = (2-p)/p * lam * (p-terms) + integral u^2

holds to round-off, not just to O(eps).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

from .grid import Field, Grid, _gradient_components, _require_same_grid, neg_laplacian_apply

__all__ = [
    "Harmonic",
    "Quartic",
    "Shifted",
    "Tabulated",
    "PerturbationParams",
    "EnergyParts",
    "log_nonlin",
    "log_density",
    "validate_potential",
    "energy_parts",
    "energy_total",
    "el_gradient",
    "residual_original",
]


def log_nonlin(t):
    """t * log(t^2), extended continuously by 0 at t = 0."""
    t = np.asarray(t, dtype=np.float64)
    out = 2.0 * xlogy(t, np.abs(t))
    return out if out.ndim else float(out)


def log_density(t):
    """t^2 * log(t^2), extended continuously by 0 at t = 0.

    Negative exactly for 0 < |t| < 1, zero at |t| in {0, 1}, positive
    for |t| > 1.
    """
    t = np.asarray(t, dtype=np.float64)
    out = 2.0 * xlogy(t * t, np.abs(t))
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# potentials


@dataclass(eq=False)
class Harmonic:
    """V(x) = a |x|^2 with a > 0."""

    a: float
    _cache: dict = field(default_factory=dict, repr=False)

    def evaluate(self, g: Grid) -> Field:
        if g not in self._cache:
            self._cache[g] = Field(grid=g, values=(self.a * g.radius_squared()).reshape(-1))
        return self._cache[g]


@dataclass(eq=False)
class Quartic:
    """V(x) = c |x|^4 with c > 0."""

    c: float
    _cache: dict = field(default_factory=dict, repr=False)

    def evaluate(self, g: Grid) -> Field:
        if g not in self._cache:
            self._cache[g] = Field(grid=g, values=(self.c * g.radius_squared() ** 2).reshape(-1))
        return self._cache[g]


@dataclass(eq=False)
class Shifted:
    """base potential plus a constant shift."""

    base: object
    shift: float
    _cache: dict = field(default_factory=dict, repr=False)

    def evaluate(self, g: Grid) -> Field:
        if g not in self._cache:
            vals = self.base.evaluate(g).values + self.shift
            self._cache[g] = Field(grid=g, values=vals)
        return self._cache[g]


@dataclass(eq=False)
class Tabulated:
    """Potential given by a stored field, or lazily read from a field file."""

    values: Field | None = None
    path: str | None = None

    def evaluate(self, g: Grid) -> Field:
        if self.values is None:
            if self.path is None:
                raise ValueError("tabulated potential has neither values nor a file path")
            from .io_cli import read_field

            _, self.values = read_field(self.path)
        if self.values.grid != g:
            raise ValueError(
                f"grid mismatch: tabulated potential sampled on "
                f"{self.values.grid.dim}d n={self.values.grid.points_per_dim}, "
                f"requested {g.dim}d n={g.points_per_dim}"
            )
        return self.values


def validate_potential(g: Grid, potential) -> float:
    """Evaluate V on the grid and return V0 = min V; errors if V0 <= 0."""
    vals = potential.evaluate(g).values
    v0 = float(vals.min())
    if v0 <= 0.0:
        raise ValueError(
            f"potential not positive on the grid: min V = {v0} "
            "(an odd point count puts the origin on the grid; use an even count "
            "or shift the potential)"
        )
    return v0


# ---------------------------------------------------------------------------
# perturbed energy


@dataclass(frozen=True)
class PerturbationParams:
    """Perturbation strength lam in {0} U (0, 1], exponent p in (1, 2)."""

    lam: float
    p: float = 1.5
    grad_reg_eps: float = 1e-10

    def __post_init__(self) -> None:
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"perturbation strength out of range: lam={self.lam}")
        if not 1.0 < self.p < 2.0:
            raise ValueError(f"exponent out of range: p={self.p} (must satisfy 1 < p < 2)")
        if not self.grad_reg_eps > 0.0:
            raise ValueError(f"regularization must be positive: grad_reg_eps={self.grad_reg_eps}")


@dataclass(frozen=True)
class EnergyParts:
    """Scalar ingredients of I_lam(u), each already integrated over the box.

    p_grad and p_mass are the regularized p-term pairings
    sum w |grad u|^2 h^dim and integral |u|^p; grad_sq is sum |grad u|^2 h^dim,
    v_mass is integral V u^2, mass is integral u^2 and log_int is
    integral u^2 log u^2.
    """

    lam: float
    p: float
    p_grad: float
    p_mass: float
    grad_sq: float
    v_mass: float
    mass: float
    log_int: float

    @property
    def total(self) -> float:
        return (
            self.lam / self.p * (self.p_grad + self.p_mass)
            + 0.5 * (self.grad_sq + self.v_mass + self.mass)
            - 0.5 * self.log_int
        )


def _edge_weights(comp: np.ndarray, p: float, eps: float) -> np.ndarray:
    return (comp * comp + eps * eps) ** ((p - 2.0) / 2.0)


def _parts_raw(g: Grid, vvals: np.ndarray, u: np.ndarray, params: PerturbationParams) -> EnergyParts:
    """energy_parts on raw flat arrays (no Field validation); solver hot path."""
    vol = g.spacing**g.dim
    nd = u.reshape(g.shape)
    comps = _gradient_components(g, nd)
    grad_sq = sum(float((c * c).sum()) for c in comps) * vol
    v_mass = float((vvals * u * u).sum()) * vol
    mass = float((u * u).sum()) * vol
    log_int = float(log_density(u).sum()) * vol
    if params.lam > 0.0:
        p, eps = params.p, params.grad_reg_eps
        p_grad = sum(float((_edge_weights(c, p, eps) * c * c).sum()) for c in comps) * vol
        p_mass = float((np.abs(u) ** p).sum()) * vol
    else:
        p_grad = p_mass = 0.0
    return EnergyParts(
        lam=params.lam,
        p=params.p,
        p_grad=p_grad,
        p_mass=p_mass,
        grad_sq=grad_sq,
        v_mass=v_mass,
        mass=mass,
        log_int=log_int,
    )


def energy_parts(g: Grid, potential, u: Field, params: PerturbationParams) -> EnergyParts:
    """Compute all scalar pieces of I_lam(u) in one pass."""
    _require_same_grid(g, u)
    return _parts_raw(g, potential.evaluate(g).values, u.values, params)


def energy_total(g: Grid, potential, u: Field, params: PerturbationParams) -> float:
    """I_lam(u); exactly zero for u == 0 and even under u -> -u."""
    return energy_parts(g, potential, u, params).total


def _neg_div(g: Grid, fluxes: list[np.ndarray]) -> np.ndarray:
    out = np.zeros(g.shape)
    for d, f in enumerate(fluxes):
        out -= np.diff(f, axis=d) / g.spacing
    return out


def _gradient_raw(g: Grid, vvals: np.ndarray, u: np.ndarray, params: PerturbationParams) -> np.ndarray:
    """el_gradient on raw flat arrays (no Field validation); solver hot path."""
    nd = u.reshape(g.shape)
    comps = _gradient_components(g, nd)
    lap = _neg_div(g, comps).reshape(-1)
    core = lap + vvals * u - np.asarray(log_nonlin(u))
    if params.lam > 0.0:
        p, eps = params.p, params.grad_reg_eps
        fluxes = [_edge_weights(c, p, eps) * c for c in comps]
        p_part = _neg_div(g, fluxes).reshape(-1) + np.sign(u) * np.abs(u) ** (p - 1.0)
        core = core + params.lam * p_part
    return core


def el_gradient(g: Grid, potential, u: Field, params: PerturbationParams) -> Field:
    """Euler-Lagrange gradient G with integrate(G * phi) = <I_lam'(u), phi>.

    G = lam * ( -div(w grad u) + |u|^{p-2} u ) + ( -Lap u + V u - u log u^2 );
    the (V + 1) u term of the quadratic part and the +u from the derivative
    of the log term cancel.
    """
    _require_same_grid(g, u)
    return Field(grid=g, values=_gradient_raw(g, potential.evaluate(g).values, u.values, params))


def residual_original(g: Grid, potential, u: Field) -> Field:
    """Pointwise residual -Lap u + V u - u log u^2 of the unperturbed equation."""
    _require_same_grid(g, u)
    vvals = potential.evaluate(g).values
    lap = neg_laplacian_apply(g, u).values
    return Field(grid=g, values=lap + vvals * u.values - np.asarray(log_nonlin(u.values)))
