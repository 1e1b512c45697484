"""Multiple critical points via deflation and structured seeding.

Distinct solutions are obtained by rerunning the continuation from seeds
with increasing oscillation (Hermite-function profiles) while *deflating*
the descent direction against everything already found: the step is
multiplied by prod_i (dist(u, u_i)^(-power) + shift), which blows up near
stored solutions and tends to ``shift`` far away, pushing iterates into
fresh basins.  Both u_i and -u_i are stored, since the energy is even and
sign flips are not new solutions.

Finding k distinct fields this way is evidence for multiplicity, not a
proof; the deflation operator is a computational surrogate for a
topological minimax construction and is documented as such.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import hermite as herm

from .grid import Field, Grid
from .solver import (
    CollapseError,
    ContinuationSchedule,
    ConvergenceFailure,
    GeometryFailure,
    MountainPassConfig,
    Preconditioner,
    SolveReport,
    _h1v_raw,
    continue_to_limit,
)
from .energy import PerturbationParams

__all__ = [
    "ProximityError",
    "DeflationSet",
    "deflate_direction",
    "structured_seed",
    "find_k_solutions",
]

log = logging.getLogger(__name__)


class ProximityError(RuntimeError):
    """Iterate re-entered a deflated basin (closer than separation/2)."""


@dataclass
class DeflationSet:
    """Stored solutions plus the deflation factor they induce.

    The scaling applied to a descent direction at iterate u is
    prod over stored s of (||u - s||_{H1_V}^(-power) + shift); an empty
    set scales by exactly 1.  The grid and potential are carried so the
    weighted norm is computable without extra context.
    """

    grid: Grid
    potential: object
    solutions: list[Field] = field(default_factory=list)
    power: float = 2.0
    shift: float = 1.0
    separation: float = 0.1

    def __post_init__(self) -> None:
        if not self.separation > 0.0:
            raise ValueError(f"separation={self.separation} must be positive")
        if self.power <= 0.0:
            raise ValueError(f"power={self.power} must be positive")
        vv = self.potential.evaluate(self.grid).values
        for s in self.solutions:
            if s.grid != self.grid:
                raise ValueError("stored solution lives on a different grid")
        for i, a in enumerate(self.solutions):
            for b in self.solutions[i + 1 :]:
                d = _h1v_raw(self.grid, vv, a.values - b.values)
                if d < self.separation:
                    raise ValueError(
                        f"stored solutions {d:.3e} apart, below separation "
                        f"{self.separation:g}"
                    )
        self._vvals = vv

    def step_scale(self, u_flat: np.ndarray) -> float:
        """Deflation factor at the iterate; raises ProximityError inside
        the separation/2 guard band of any stored solution."""
        factor = 1.0
        for s in self.solutions:
            d = _h1v_raw(self.grid, self._vvals, u_flat - s.values)
            if d < 0.5 * self.separation:
                raise ProximityError(
                    f"iterate within {d:.3e} of a deflated solution "
                    f"(guard {0.5 * self.separation:g})"
                )
            factor *= d ** (-self.power) + self.shift
        return factor


def deflate_direction(z: Field, u: Field, ds: DeflationSet) -> Field:
    """Scale the descent direction z at iterate u by the deflation factor."""
    if z.grid != ds.grid or u.grid != ds.grid:
        raise ValueError("direction/iterate grid does not match the deflation set")
    return Field(grid=z.grid, values=z.values * ds.step_scale(u.values))


def structured_seed(g: Grid, j: int, potential=None) -> Field:
    """j-th seed profile: Hermite polynomial of degree j-1 along the first
    axis times a Gaussian envelope, so the seed has j-1 sign changes.

    Normalized to unit weighted-Sobolev norm when a potential is given,
    else to the unweighted H^1 norm (unit zeroth-order weight).  Raises
    for j >= n/2, where the oscillations are no longer resolved.
    """
    if j < 1:
        raise ValueError(f"seed index j={j} must be at least 1")
    if j >= g.points_per_dim / 2:
        raise ValueError(
            f"seed index j={j} under-resolved on {g.points_per_dim} points per axis "
            f"(need j < n/2)"
        )
    x1 = g.coordinate_arrays()[0]
    coeffs = np.zeros(j)
    coeffs[j - 1] = 1.0
    vals = (herm.hermval(x1, coeffs) * np.exp(-g.radius_squared())).reshape(-1)
    if potential is None:
        vv = np.ones(g.npoints)
    else:
        vv = potential.evaluate(g).values
    return Field(grid=g, values=vals / _h1v_raw(g, vv, vals))


def find_k_solutions(
    g: Grid,
    potential,
    sched: ContinuationSchedule,
    params: PerturbationParams,
    cfg: MountainPassConfig,
    k: int,
    *,
    separation: float = 0.1,
    power: float = 2.0,
    shift: float = 1.0,
) -> list[tuple[Field, float, SolveReport]]:
    """Collect up to k distinct solutions of the lam -> 0 limit problem.

    Seeds j = 1, 2, ... are tried in order (up to 3k attempts).  Each
    attempt deflates against the lam-matched continuation trajectories of
    everything accepted so far, so stage i of a new run avoids stage i of
    the old ones.  Candidates closer than ``separation`` to +-(an accepted
    solution) are rejected as duplicates.  Returns the accepted list
    sorted by energy; a shortfall is logged, not raised.
    """
    if k < 1:
        raise ValueError(f"k={k} must be at least 1")
    vv = potential.evaluate(g).values
    precond = Preconditioner(g, potential)
    accepted: list[tuple[Field, float, SolveReport]] = []
    # seeds have definite first-axis parity; pin the sector during descent
    # whenever the potential shares the reflection symmetry
    vv_nd = vv.reshape(g.shape)
    symmetric_potential = bool(np.array_equal(vv_nd, np.flip(vv_nd, axis=0)))

    def deflation_for_stage(i: int):
        if not accepted:
            return None
        sols: list[Field] = []
        for _, _, rep in accepted:
            traj = rep.trajectory[min(i, len(rep.trajectory) - 1)]
            sols.append(traj)
            sols.append(Field(grid=g, values=-traj.values))
        return DeflationSet(
            grid=g, potential=potential, solutions=sols,
            power=power, shift=shift, separation=separation,
        )

    for attempt in range(1, 3 * k + 1):
        if len(accepted) >= k:
            break
        try:
            seed = structured_seed(g, attempt, potential)
        except ValueError as exc:
            log.warning("seed %d rejected: %s", attempt, exc)
            break
        symmetry = None
        if symmetric_potential:
            symmetry = "even" if attempt % 2 == 1 else "odd"
        try:
            u, rep = continue_to_limit(
                g, potential, sched, params, cfg,
                seed=seed, deflation_for_stage=deflation_for_stage, precond=precond,
                symmetry=symmetry,
            )
        except (CollapseError, ConvergenceFailure, GeometryFailure, ProximityError) as exc:
            log.info("seed %d did not produce a solution: %s", attempt, exc)
            continue
        dup = False
        for prev, _, _ in accepted:
            d = min(
                _h1v_raw(g, vv, u.values - prev.values),
                _h1v_raw(g, vv, u.values + prev.values),
            )
            if d < separation:
                dup = True
                log.info("seed %d converged to a known solution (distance %.3e)", attempt, d)
                break
        if dup:
            continue
        accepted.append((u, rep.records[-1].energy, rep))

    accepted.sort(key=lambda item: item[1])
    if len(accepted) < k:
        log.warning("found %d of %d requested solutions in %d attempts",
                    len(accepted), k, 3 * k)
    for (_, e1, _), (_, e2, _) in zip(accepted, accepted[1:]):
        if e2 - e1 < 1e-6:
            log.warning(
                "energies %.8f and %.8f closer than 1e-6: possible duplicates "
                "or symmetry copies", e1, e2,
            )
    return accepted
