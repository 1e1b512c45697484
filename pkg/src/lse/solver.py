"""Mountain-pass search and perturbation-to-zero continuation.

The perturbed energy has a strict local minimum at 0, is unbounded below
along rays, and its nontrivial critical points are saddles whose single
downhill direction is (numerically) the ray through the point itself.
``descend`` therefore interleaves two moves:

* an exact one-dimensional re-maximization of I_lam(t * u) over t > 0
  (the ray profile is strictly unimodal, so the peak is a scalar root
  find), which removes the unstable ray component, and
* a preconditioned Armijo descent step, direction z solving
  (-Lap + V + 1) z = el_gradient(u), which contracts everything else.

Energy is nonincreasing across the accepted Armijo substeps (recorded in
``DescentResult.energy_steps``); the ray rescale between substeps moves
back *up* to the ridge by construction.

``mountain_pass`` builds the ray path s -> s * t0 * e through a seed
profile, starts the descent at the discrete path peak, and guards against
collapse to zero.  ``continue_to_limit`` drives lam down a geometric
schedule with warm starts and finishes with a lam = 0 solve.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .energy import (
    PerturbationParams,
    _gradient_raw,
    _parts_raw,
    validate_potential,
)
from .grid import Field, Grid, _gradient_components, norm_w1p

__all__ = [
    "MountainPassConfig",
    "ContinuationSchedule",
    "LambdaRecord",
    "SolveReport",
    "DescentResult",
    "MountainPassResult",
    "Preconditioner",
    "SolverError",
    "GeometryFailure",
    "CollapseError",
    "ConvergenceFailure",
    "default_seed",
    "find_t0",
    "check_geometry",
    "descend",
    "mountain_pass",
    "continue_to_limit",
]


class SolverError(RuntimeError):
    """Base class for solver control-flow failures."""


class GeometryFailure(SolverError):
    """The ray geometry needed by the path construction is absent."""


class CollapseError(SolverError):
    """The iterate collapsed to (numerically) zero."""


class ConvergenceFailure(SolverError):
    """Residual tolerance not reached within the iteration budget."""


@dataclass(frozen=True)
class MountainPassConfig:
    path_segments: int = 32
    descent_tol: float = 1e-6
    max_outer: int = 500
    armijo_c1: float = 1e-4
    backtrack_ratio: float = 0.5
    max_backtracks: int = 40
    seed_profile: Field | None = None

    def __post_init__(self) -> None:
        if self.path_segments < 8:
            raise ValueError(f"path_segments={self.path_segments} (need at least 8)")
        if not self.descent_tol > 0.0:
            raise ValueError(f"descent_tol={self.descent_tol} must be positive")
        if self.max_outer < 1:
            raise ValueError(f"max_outer={self.max_outer} must be at least 1")
        if not 0.0 < self.armijo_c1 < 1.0:
            raise ValueError(f"armijo_c1={self.armijo_c1} out of (0, 1)")
        if not 0.0 < self.backtrack_ratio < 1.0:
            raise ValueError(f"backtrack_ratio={self.backtrack_ratio} out of (0, 1)")


@dataclass(frozen=True)
class ContinuationSchedule:
    """Geometric lam schedule: start, start*ratio, ... down to lambda_min."""

    lambda_start: float = 1.0
    ratio: float = 0.1
    lambda_min: float = 1e-4

    def __post_init__(self) -> None:
        if not 0.0 < self.lambda_start <= 1.0:
            raise ValueError(f"lambda_start={self.lambda_start} out of (0, 1]")
        if not 0.0 < self.ratio < 1.0:
            raise ValueError(
                f"ratio={self.ratio} does not decrease the perturbation (need 0 < ratio < 1)"
            )
        if not 0.0 < self.lambda_min <= self.lambda_start:
            raise ValueError(f"lambda_min={self.lambda_min} out of (0, lambda_start]")

    def lambdas(self) -> list[float]:
        out = []
        lam = self.lambda_start
        while lam >= self.lambda_min * (1.0 - 1e-9):
            out.append(lam)
            lam *= self.ratio
        return out


@dataclass(frozen=True)
class LambdaRecord:
    lam: float
    energy: float
    resid_precond: float
    resid_raw: float
    iterations: int
    mass: float
    lambda_w1p_p: float
    linf: float


@dataclass
class SolveReport:
    """Per-stage continuation diagnostics plus final identity margins.

    records are ordered by decreasing lam with the lam = 0 stage last;
    trajectory holds the converged field of each stage.
    """

    records: list[LambdaRecord] = field(default_factory=list)
    trajectory: list[Field] = field(default_factory=list)
    nehari_margin: float = float("nan")
    energy_mass_defect: float = float("nan")
    linf_final: float = float("nan")
    m2_estimate: float = float("nan")
    wall_time: float = 0.0
    t0: float = float("nan")
    restarts: int = 0
    theta_proxy: float = 0.0


@dataclass
class DescentResult:
    field: Field
    iterations: int
    residual: float
    converged: bool
    stagnated: bool = False
    collapsed: bool = False
    energy_steps: list[tuple[float, float]] = field(default_factory=list)
    theta_proxy: float = 0.0


@dataclass
class MountainPassResult:
    field: Field
    c_lambda: float
    path_max: float
    t0: float
    restarts: int
    descent: DescentResult


# ---------------------------------------------------------------------------
# preconditioner

_DIRECT_LIMIT = 120_000  # unknowns; beyond this fall back to conjugate gradients


class Preconditioner:
    """Solves (-Lap + V + 1) z = rhs; assembled once per (grid, potential).

    Small and planar problems use a sparse LU factorization (one factorize,
    many cheap solves, bit-reproducible); large 3d problems fall back to
    diagonally preconditioned conjugate gradients at rtol 1e-10.
    """

    def __init__(self, g: Grid, potential) -> None:
        self.grid = g
        vvals = potential.evaluate(g).values
        n, h = g.points_per_dim, g.spacing
        main = np.full(n, 2.0 / h**2)
        off = np.full(n - 1, -1.0 / h**2)
        lap1 = sp.diags([off, main, off], [-1, 0, 1], format="csr")
        eye = sp.identity(n, format="csr")
        terms = []
        for d in range(g.dim):
            mats = [eye] * g.dim
            mats[d] = lap1
            term = mats[0]
            for m in mats[1:]:
                term = sp.kron(term, m, format="csr")
            terms.append(term)
        a = terms[0]
        for term in terms[1:]:
            a = a + term
        a = a + sp.diags(vvals + 1.0)
        if g.npoints <= _DIRECT_LIMIT and g.dim <= 2:
            self._lu = spla.splu(a.tocsc())
            self._cg = None
        else:
            self._lu = None
            self._op = a.tocsr()
            self._diag_inv = sp.diags(1.0 / a.diagonal())
            self._cg = np.zeros(g.npoints)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._lu is not None:
            return self._lu.solve(rhs)
        z, info = spla.cg(
            self._op, rhs, x0=self._cg, M=self._diag_inv, rtol=1e-10, atol=0.0,
            maxiter=20 * self.grid.points_per_dim,
        )
        if info != 0:
            raise ConvergenceFailure(f"preconditioner solve did not converge (cg info={info})")
        self._cg = z
        return z


def _linearized_matrix(g: Grid, vvals: np.ndarray, u: np.ndarray, params: PerturbationParams) -> sp.csr_matrix:
    """Sparse SPD linearization used for the step direction at lam > 0.

    This is (-Lap + V + 1) plus the exact second derivative of the
    p-gradient term (a divergence form with per-edge coefficients) and the
    regularized second derivative of the p-mass term.  Without the latter,
    the |u|^(p-1) nonlinearity makes preconditioned descent oscillate
    around the nearly-sparse tail instead of settling on it.
    """
    lam, p, eps = params.lam, params.p, params.grad_reg_eps
    n, h = g.points_per_dim, g.spacing
    nd = u.reshape(g.shape)
    comps = _gradient_components(g, nd)
    idx = np.arange(g.npoints).reshape(g.shape)
    diag = np.zeros(g.shape)
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    for d, c in enumerate(comps):
        g2 = c * c
        # d/dg [ (g^2 + eps^2)^((p-2)/2) g ] -- always in (0, weight]
        coeff = (g2 + eps * eps) ** ((p - 2.0) / 2.0) * (
            1.0 + (p - 2.0) * g2 / (g2 + eps * eps)
        )
        coeff = 1.0 + lam * coeff
        left = np.take(coeff, range(0, n), axis=d)
        right = np.take(coeff, range(1, n + 1), axis=d)
        diag += (left + right) / h**2
        inner = np.take(coeff, range(1, n), axis=d) / h**2
        a = np.take(idx, range(0, n - 1), axis=d).reshape(-1)
        b = np.take(idx, range(1, n), axis=d).reshape(-1)
        rows.extend((a, b))
        cols.extend((b, a))
        vals.extend((-inner.reshape(-1), -inner.reshape(-1)))
    diag = diag.reshape(-1) + vvals + 1.0
    diag = diag + lam * (p - 1.0) * (u * u + params.grad_reg_eps**2) ** ((p - 2.0) / 2.0)
    a_mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(g.npoints, g.npoints),
    ).tocsr()
    return a_mat + sp.diags(diag)


def _newton_matrix(g: Grid, vvals: np.ndarray, u: np.ndarray, params: PerturbationParams):
    """True Jacobian of el_gradient at u (sparse, symmetric, indefinite).

    Equals the SPD step operator minus the zeroth-order surrogate (the +1)
    and minus the log-term curvature log u^2 + 2; at grid zeros of u the
    log curvature is a large positive diagonal, which correctly freezes
    those entries.
    """
    base = _linearized_matrix(g, vvals, u, params)
    return base - sp.diags(3.0 + np.log(u * u + 1e-300))


def _h1v_raw(g: Grid, vvals: np.ndarray, u: np.ndarray) -> float:
    vol = g.spacing**g.dim
    comps = _gradient_components(g, u.reshape(g.shape))
    kin = sum(float((c * c).sum()) for c in comps) * vol
    return float(np.sqrt(kin + float((vvals * u * u).sum()) * vol))


def _l4_raw(g: Grid, u: np.ndarray) -> float:
    vol = g.spacing**g.dim
    return float((vol * float((u**4).sum())) ** 0.25)


# ---------------------------------------------------------------------------
# ray geometry


def default_seed(g: Grid, potential) -> Field:
    """Centered Gaussian bump exp(-|x|^2), unit weighted-Sobolev norm."""
    vals = np.exp(-g.radius_squared()).reshape(-1)
    vvals = potential.evaluate(g).values
    return Field(grid=g, values=vals / _h1v_raw(g, vvals, vals))


def _ray_peak_factor(parts, params: PerturbationParams) -> float:
    """t* > 0 maximizing I_lam(t u) given the energy parts of u.

    d/dt I_lam(t u) / t = lam t^(p-2) P + Q - s - 2 m log t with
    P = p-terms, Q = |grad u|^2 + V-mass, m = mass, s = log integral;
    the left side is strictly decreasing in t, so the peak is the unique
    root.
    """
    m = parts.mass
    if m <= 0.0:
        return 1.0
    q_minus_s = parts.grad_sq + parts.v_mass - parts.log_int
    if params.lam == 0.0:
        return float(np.exp(np.clip(q_minus_s / (2.0 * m), -50.0, 50.0)))
    p_total = parts.p_grad + parts.p_mass

    def psi(t: float) -> float:
        return params.lam * t ** (params.p - 2.0) * p_total + q_minus_s - 2.0 * m * np.log(t)

    lo = hi = 1.0
    if psi(1.0) > 0.0:
        for _ in range(60):
            hi *= 2.0
            if psi(hi) <= 0.0:
                break
        else:
            return hi
        lo = hi / 2.0
    else:
        for _ in range(60):
            lo /= 2.0
            if psi(lo) >= 0.0:
                break
        else:
            return lo
        hi = lo * 2.0
    return float(brentq(psi, lo, hi, xtol=1e-14, rtol=8.9e-16))


def _subspace_local_max(
    g: Grid,
    vvals: np.ndarray,
    u: np.ndarray,
    params: PerturbationParams,
    others: list[np.ndarray],
    tol: float,
    max_inner: int = 10,
) -> np.ndarray:
    """Move u to the nearby stationary point of I_lam restricted to
    span{u, others}, by damped Newton in the span coordinates.

    Used when deflation supplies previously found solutions: near a higher
    critical point the extra downhill directions (besides the ray) point
    roughly along the found solutions, so equilibrating over their span
    stabilizes the outer descent the same way the exact 1-d ray solve does
    for the ground state.  Newton keeps the equilibration *local*; a global
    in-span ascent would run off along high logarithmic ridges.
    """
    cols = [u]
    for s in others:
        keep = True
        for b in cols:
            cos2 = float(s @ b) ** 2 / (float(s @ s) * float(b @ b) + 1e-300)
            if cos2 > 1.0 - 1e-12:
                keep = False
                break
        if keep:
            cols.append(s)
    if len(cols) == 1:
        parts = _parts_raw(g, vvals, u, params)
        return _ray_peak_factor(parts, params) * u
    q, _ = np.linalg.qr(np.stack(cols, axis=1))
    r = q.shape[1]
    vol = g.spacing**g.dim
    c = q.T @ u
    scale = float(np.sqrt(c @ c))
    for _ in range(max_inner):
        v = q @ c
        gv = _gradient_raw(g, vvals, v, params)
        gc = vol * (q.T @ gv)
        if float(np.sqrt(gc @ gc)) <= tol:
            break
        hess = np.empty((r, r))
        delta = 1e-6 * (1.0 + scale)
        for i in range(r):
            gp = _gradient_raw(g, vvals, v + delta * q[:, i], params)
            hess[:, i] = vol * (q.T @ (gp - gv)) / delta
        hess = 0.5 * (hess + hess.T)
        try:
            dc = np.linalg.solve(hess, -gc)
        except np.linalg.LinAlgError:
            break
        dn = float(np.sqrt(dc @ dc))
        cap = 0.3 * (1.0 + scale)
        if dn > cap:
            dc *= cap / dn
        c = c + dc
    return q @ c


def find_t0(g: Grid, potential, e: Field, params: PerturbationParams, rho_probe: float = 0.0) -> float:
    """Smallest t in the doubling family {1, 2, 4, ...} with I_lam(t e) < 0
    and weighted norm above rho_probe."""
    if not float(np.abs(e.values).max()) > 0.0:
        raise ValueError("seed profile is identically zero")
    vvals = potential.evaluate(g).values
    t = 1.0
    for _ in range(61):
        scaled = t * e.values
        if (
            _parts_raw(g, vvals, scaled, params).total < 0.0
            and _h1v_raw(g, vvals, scaled) > rho_probe
        ):
            return t
        t *= 2.0
    raise GeometryFailure(
        "no negative-energy point on the seed ray within 2^60 doublings (degenerate seed)"
    )


def check_geometry(
    g: Grid,
    potential,
    params: PerturbationParams,
    rho: float,
    samples: int,
    rng_seed: int = 0,
) -> float:
    """Sampled lower bound for I_lam on the sphere of weighted norm rho.

    Draws ``samples`` white-noise fields, rescales each to norm rho and
    returns the smallest energy seen (positive means the local-minimum
    barrier at 0 is visible at this radius).
    """
    if samples < 1:
        raise ValueError(f"samples={samples} (need at least 1)")
    if not rho > 0.0:
        raise ValueError(f"rho={rho} must be positive")
    vvals = potential.evaluate(g).values
    rng = np.random.default_rng(rng_seed)
    alpha = np.inf
    for _ in range(samples):
        w = rng.standard_normal(g.npoints)
        nrm = _h1v_raw(g, vvals, w)
        scaled = (rho / nrm) * w
        alpha = min(alpha, _parts_raw(g, vvals, scaled, params).total)
    return float(alpha)


# ---------------------------------------------------------------------------
# descent


def _newton_polish(
    g: Grid,
    vvals: np.ndarray,
    u: np.ndarray,
    grad: np.ndarray,
    resid: float,
    params: PerturbationParams,
    cfg: MountainPassConfig,
    precond: Preconditioner,
    *,
    deflation=None,
    symmetry: str | None = None,
    result: DescentResult | None = None,
    max_steps: int = 40,
) -> tuple[np.ndarray, float]:
    """Damped Newton iteration on el_gradient = 0, monotone in the
    preconditioned residual; returns the improved iterate and residual."""
    for _ in range(max_steps):
        if resid <= cfg.descent_tol:
            break
        if deflation is not None:
            deflation.step_scale(u)  # proximity guard only
        jac = _newton_matrix(g, vvals, u, params)
        delta = spla.splu(jac.tocsc()).solve(grad)
        damp = 1.0
        accepted = None
        for _ in range(8):
            cand = _parity_project(g, u - damp * delta, symmetry)
            gnew = _gradient_raw(g, vvals, cand, params)
            rnew = _h1v_raw(g, vvals, precond.solve(gnew))
            if np.isfinite(rnew) and rnew < 0.99 * resid:
                accepted = (cand, gnew, rnew)
                break
            damp *= 0.5
        if accepted is None:
            break
        u, grad, resid = accepted
        if result is not None:
            result.iterations += 1
    return u, resid


def _parity_project(g: Grid, u: np.ndarray, symmetry: str | None) -> np.ndarray:
    """Project onto the even or odd sector of first-axis reflection.

    Iterates launched from a seed with definite parity stay in that sector
    exactly; without the projection, linear-solve roundoff seeds the
    complementary sector and the instability of excited states amplifies
    it until the iterate slides into the ground state's basin.
    """
    if symmetry is None:
        return u
    nd = u.reshape(g.shape)
    flipped = np.flip(nd, axis=0)
    if symmetry == "even":
        return (0.5 * (nd + flipped)).reshape(-1)
    if symmetry == "odd":
        return (0.5 * (nd - flipped)).reshape(-1)
    raise ValueError(f"symmetry={symmetry!r} (must be None, 'even' or 'odd')")


def descend(
    g: Grid,
    potential,
    u0: Field,
    params: PerturbationParams,
    cfg: MountainPassConfig,
    *,
    deflation=None,
    ray_rescale: bool = True,
    mass_floor: float = 0.0,
    precond: Preconditioner | None = None,
    symmetry: str | None = None,
) -> DescentResult:
    """Preconditioned Armijo descent, optionally ray-stabilized.

    Terminates when the preconditioned residual (weighted Sobolev norm of
    the direction z) drops to cfg.descent_tol, or at cfg.max_outer.  With
    ``ray_rescale`` the iterate is moved to the peak of its own ray before
    every step (or to the nearby in-span stationary point when deflation
    stores previous solutions).  ``deflation`` may supply a
    ``step_scale(u_flat)`` factor (see the deflation operator);
    ``mass_floor`` aborts with the collapsed flag when the iterate's mass
    integral falls below it; ``symmetry`` pins the first-axis parity
    sector of the iterates.
    """
    vvals = potential.evaluate(g).values
    if precond is None:
        precond = Preconditioner(g, potential)
    vol = g.spacing**g.dim
    u = _parity_project(g, np.array(u0.values), symmetry)
    result = DescentResult(field=u0, iterations=0, residual=np.inf, converged=False)
    step_prev: np.ndarray | None = None
    span = [s.values for s in deflation.solutions] if deflation is not None else []
    best_resid = np.inf
    stall = 0
    for _ in range(cfg.max_outer + 1):
        if ray_rescale and float((u * u).sum()) > 0.0:
            if span:
                u = _subspace_local_max(g, vvals, u, params, span, 0.1 * cfg.descent_tol)
            else:
                parts = _parts_raw(g, vvals, u, params)
                u = _ray_peak_factor(parts, params) * u
        grad = _gradient_raw(g, vvals, u, params)
        z = precond.solve(grad)
        resid = _h1v_raw(g, vvals, z)
        if resid > 0.0:
            result.theta_proxy = max(result.theta_proxy, _l4_raw(g, z) / resid)
        result.residual = resid
        if resid <= cfg.descent_tol:
            result.converged = True
            break
        if result.iterations >= cfg.max_outer:
            break
        if resid < 0.97 * best_resid:
            best_resid, stall = resid, 0
        else:
            stall += 1
        if span and stall >= 6 and resid <= 0.1:
            # higher saddles are not attractors of any descent flow; once the
            # deflated/equilibrated phase stagnates near one, finish with
            # damped Newton on the full residual (index-agnostic locally)
            u, resid = _newton_polish(
                g, vvals, u, grad, resid, params, cfg, precond,
                deflation=deflation, symmetry=symmetry, result=result,
            )
            result.residual = resid
            result.converged = resid <= cfg.descent_tol
            break
        if params.lam > 0.0:
            # step through the perturbation-aware linearization; the
            # fixed operator only measures the residual above
            a_u = _linearized_matrix(g, vvals, u, params)
            if g.dim <= 2:
                step = spla.splu(a_u.tocsc()).solve(grad)
            else:
                step, info = spla.cg(
                    a_u, grad, x0=step_prev, M=sp.diags(1.0 / a_u.diagonal()),
                    rtol=1e-8, atol=0.0, maxiter=20 * g.points_per_dim,
                )
                if info != 0:
                    raise ConvergenceFailure(
                        f"step operator solve did not converge (cg info={info})"
                    )
                step_prev = step
        else:
            step = z
        scale = 1.0 if deflation is None else deflation.step_scale(u)
        pair = vol * float(grad @ step) * scale
        e0 = _parts_raw(g, vvals, u, params).total
        alpha = 1.0
        accepted = None
        for _ in range(cfg.max_backtracks + 1):
            cand = u - (alpha * scale) * step
            e1 = _parts_raw(g, vvals, cand, params).total
            if np.isfinite(e1) and e1 <= e0 - cfg.armijo_c1 * alpha * pair:
                accepted = (cand, e1)
                break
            alpha *= cfg.backtrack_ratio
        if accepted is None:
            result.stagnated = True
            break
        u, e1 = accepted
        u = _parity_project(g, u, symmetry)
        result.energy_steps.append((e0, e1))
        result.iterations += 1
        if mass_floor > 0.0 and vol * float((u * u).sum()) < mass_floor:
            result.collapsed = True
            break
    result.field = Field(grid=g, values=u)
    return result


# ---------------------------------------------------------------------------
# mountain pass and continuation

_MASS_FLOOR = 1e-8


def mountain_pass(
    g: Grid,
    potential,
    params: PerturbationParams,
    cfg: MountainPassConfig,
    *,
    seed: Field | None = None,
    deflation=None,
    precond: Preconditioner | None = None,
    symmetry: str | None = None,
) -> MountainPassResult:
    """Peak-of-path search for a critical point at fixed lam.

    Builds the ray path s * t0 * e on cfg.path_segments segments, descends
    from the discrete peak (smallest index on ties), restarting with a
    doubled t0 if the iterate collapses to zero (at most three restarts).
    """
    validate_potential(g, potential)
    if params.lam <= 0.0:
        raise ValueError("mountain pass requires lam > 0 (use continue_to_limit for lam -> 0)")
    e = seed if seed is not None else cfg.seed_profile
    if e is None:
        e = default_seed(g, potential)
    vvals = potential.evaluate(g).values
    t0 = find_t0(g, potential, e, params)
    if precond is None:
        precond = Preconditioner(g, potential)
    restarts = 0
    while True:
        s = np.linspace(0.0, 1.0, cfg.path_segments + 1)
        energies = [
            _parts_raw(g, vvals, sk * t0 * e.values, params).total for sk in s
        ]
        k_peak = int(np.argmax(energies))
        path_max = float(energies[k_peak])
        u0 = Field(grid=g, values=s[k_peak] * t0 * e.values)
        res = descend(
            g, potential, u0, params, cfg,
            deflation=deflation, ray_rescale=True, mass_floor=_MASS_FLOOR,
            precond=precond, symmetry=symmetry,
        )
        if res.collapsed:
            restarts += 1
            if restarts > 3:
                raise GeometryFailure("repeated collapse to zero after 3 restarts")
            t0 *= 2.0
            continue
        if not res.converged:
            extra = " (line search stagnated)" if res.stagnated else ""
            raise ConvergenceFailure(
                f"mountain pass stopped at residual {res.residual:.3e} after "
                f"{res.iterations} iterations{extra}"
            )
        c_lam = _parts_raw(g, vvals, res.field.values, params).total
        return MountainPassResult(
            field=res.field, c_lambda=c_lam, path_max=path_max, t0=t0,
            restarts=restarts, descent=res,
        )


def _stage_record(g, vvals, u: np.ndarray, params, res: DescentResult) -> LambdaRecord:
    parts = _parts_raw(g, vvals, u, params)
    raw = _gradient_raw(g, vvals, u, params)
    vol = g.spacing**g.dim
    if params.lam > 0.0:
        w1p_p = params.lam * norm_w1p(g, Field(grid=g, values=u), params.p) ** params.p
    else:
        w1p_p = 0.0
    return LambdaRecord(
        lam=params.lam,
        energy=parts.total,
        resid_precond=res.residual,
        resid_raw=float(np.sqrt(vol * float(raw @ raw))),
        iterations=res.iterations,
        mass=parts.mass,
        lambda_w1p_p=w1p_p,
        linf=float(np.abs(u).max()),
    )


def continue_to_limit(
    g: Grid,
    potential,
    sched: ContinuationSchedule,
    params: PerturbationParams,
    cfg: MountainPassConfig,
    *,
    seed: Field | None = None,
    deflation_for_stage=None,
    precond: Preconditioner | None = None,
    symmetry: str | None = None,
) -> tuple[Field, SolveReport]:
    """Mountain pass at lambda_start, then warm-started continuation to lam = 0.

    ``deflation_for_stage`` may be a callable stage_index -> deflation
    operator (or None), where stage indices follow the schedule order with
    the final lam = 0 polish last.  Raises CollapseError if the limit field
    is trivial (mass below 1e-6).
    """
    start = time.perf_counter()
    validate_potential(g, potential)
    if precond is None:
        precond = Preconditioner(g, potential)
    vvals = potential.evaluate(g).values
    report = SolveReport()
    lams = sched.lambdas() + [0.0]

    def defl(i: int):
        return deflation_for_stage(i) if deflation_for_stage is not None else None

    par = replace(params, lam=lams[0])
    mp = mountain_pass(
        g, potential, par, cfg, seed=seed, deflation=defl(0), precond=precond,
        symmetry=symmetry,
    )
    u = mp.field.values
    report.m2_estimate = mp.path_max
    report.t0 = mp.t0
    report.restarts = mp.restarts
    report.theta_proxy = mp.descent.theta_proxy
    report.records.append(_stage_record(g, vvals, u, par, mp.descent))
    report.trajectory.append(mp.field)

    for i, lam in enumerate(lams[1:], start=1):
        par = replace(params, lam=lam)
        res = descend(
            g, potential, Field(grid=g, values=u), par, cfg,
            deflation=defl(i), ray_rescale=True, mass_floor=_MASS_FLOOR,
            precond=precond, symmetry=symmetry,
        )
        if res.collapsed:
            raise CollapseError(f"iterate collapsed to zero at lam={lam:g}")
        if not res.converged:
            extra = " (line search stagnated)" if res.stagnated else ""
            raise ConvergenceFailure(
                f"continuation stage lam={lam:g} stopped at residual "
                f"{res.residual:.3e} after {res.iterations} iterations{extra}"
            )
        u = res.field.values
        report.theta_proxy = max(report.theta_proxy, res.theta_proxy)
        report.records.append(_stage_record(g, vvals, u, par, res))
        report.trajectory.append(res.field)

    vol = g.spacing**g.dim
    mass = vol * float((u * u).sum())
    if mass < 1e-6:
        raise CollapseError(f"trivial limit: mass integral {mass:.3e} below 1e-6 (run rejected)")
    parts = _parts_raw(g, vvals, u, replace(params, lam=0.0))
    lhs = parts.grad_sq + parts.v_mass
    report.nehari_margin = abs(lhs - parts.log_int) / (1.0 + abs(lhs))
    report.energy_mass_defect = abs(parts.total - 0.5 * parts.mass)
    report.linf_final = float(np.abs(u).max())
    report.wall_time = time.perf_counter() - start
    return Field(grid=g, values=u), report
