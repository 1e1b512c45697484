"""Config parsing, field persistence, run orchestration, and the CLI.

The configuration format is flat ``key=value`` lines with ``#`` comments; the
key set is fixed and validated eagerly so a bad run dies before any compute.
Field files use the self-describing ``LSEF1`` layout: a magic line, a header
line ``dim points half_width``, then the raw little-endian float64 payload in
row-major order.  All output files are written to a temporary file in the
destination directory and renamed into place, so readers never observe a
partial file.

CSV and plot-data emission formats every float with ``repr``, which in
CPython is the shortest decimal that round-trips; identical runs therefore
produce byte-identical diagnostics.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from dataclasses import dataclass, replace

import numpy as np

from .energy import (
    Harmonic,
    PerturbationParams,
    Quartic,
    Shifted,
    Tabulated,
    validate_potential,
)
from .grid import Field, Grid, make_grid, norm_h1v
from .multiplicity import find_k_solutions
from .solver import ContinuationSchedule, MountainPassConfig, SolverError
from .verify import CheckResult, check_energy_identity, check_gradient_fd, check_linf, check_log_sobolev, check_nehari, check_scaling

__all__ = [
    "ConfigError",
    "FieldFormatError",
    "RunSpec",
    "parse_config",
    "write_field",
    "read_field",
    "run",
    "main",
]

log = logging.getLogger(__name__)

_CONFIG_KEYS = (
    "dim",
    "half_width",
    "points",
    "potential",
    "p",
    "lambda_start",
    "lambda_ratio",
    "lambda_min",
    "tol_grad",
    "max_outer",
    "k_solutions",
    "rng_seed",
    "output_dir",
    "emit",
)

_EMIT_CHOICES = frozenset({"fields", "diagnostics", "plotdata", "checks"})

#: Checks whose failure makes a run exit nonzero.  The remaining registry
#: checks are still run and recorded, but only advise.
_GATE_CHECKS = ("nehari", "energy_identity", "linf")

_MAGIC = b"LSEF1\n"


class ConfigError(ValueError):
    """A configuration line violates the schema or a value is out of domain."""


class FieldFormatError(ValueError):
    """A field file does not conform to the LSEF1 layout."""


@dataclass(frozen=True)
class RunSpec:
    """Fully validated run description; every field satisfies the owning
    module's preconditions by construction."""

    dim: int
    half_width: float
    points: int
    potential: str
    p: float
    lambda_start: float
    lambda_ratio: float
    lambda_min: float
    tol_grad: float
    max_outer: int
    k_solutions: int
    rng_seed: int
    output_dir: str
    emit: frozenset[str]


# ---------------------------------------------------------------------------
# configuration


def _parse_int(key: str, raw: str, minimum: int | None = None, choices: tuple[int, ...] | None = None) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"key {key!r}: expected an integer, got {raw!r}") from None
    if choices is not None and value not in choices:
        raise ConfigError(f"key {key!r}: must be one of {sorted(choices)}, got {value}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"key {key!r}: must be >= {minimum}, got {value}")
    return value


def _parse_float(key: str, raw: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"key {key!r}: expected a real number, got {raw!r}") from None
    if not np.isfinite(value):
        raise ConfigError(f"key {key!r}: must be finite, got {raw!r}")
    return value


def _check_potential_descriptor(desc: str) -> None:
    """Validate descriptor grammar without touching the filesystem."""
    head, _, rest = desc.partition(":")
    if head in ("harmonic", "quartic"):
        if not rest:
            raise ConfigError(f"key 'potential': {head} needs a coefficient, e.g. {head}:2.0")
        coeff = _parse_float("potential", rest)
        if coeff <= 0.0:
            raise ConfigError(f"key 'potential': {head} coefficient must be positive, got {coeff}")
    elif head == "shifted":
        base, sep, shift = rest.rpartition(":")
        if not sep or not base:
            raise ConfigError(
                "key 'potential': shifted form is shifted:<base>:<offset>, e.g. shifted:harmonic:2.0:+1.0"
            )
        _parse_float("potential", shift)
        _check_potential_descriptor(base)
    elif head == "tabulated":
        if not rest:
            raise ConfigError("key 'potential': tabulated form is tabulated:<field-file>")
    else:
        raise ConfigError(
            f"key 'potential': unknown family {head!r}; "
            "expected harmonic:<a>, quartic:<c>, shifted:<base>:<offset>, or tabulated:<path>"
        )


def build_potential(desc: str):
    """Instantiate the potential named by a validated descriptor."""
    head, _, rest = desc.partition(":")
    if head == "harmonic":
        return Harmonic(float(rest))
    if head == "quartic":
        return Quartic(float(rest))
    if head == "shifted":
        base, _, shift = rest.rpartition(":")
        return Shifted(build_potential(base), float(shift))
    if head == "tabulated":
        return Tabulated(path=rest)
    raise ConfigError(f"key 'potential': unknown family {head!r}")


def parse_config(text: str) -> RunSpec:
    """Parse flat ``key=value`` configuration text into a validated RunSpec.

    ``#`` starts a comment (full-line or trailing); every key in the schema
    is required and unknown keys are rejected, so typos fail loudly.
    """
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = raw
    missing = [key for key in _CONFIG_KEYS if key not in values]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")

    dim = _parse_int("dim", values["dim"], choices=(1, 2, 3))
    half_width = _parse_float("half_width", values["half_width"])
    if half_width <= 0.0:
        raise ConfigError(f"key 'half_width': must be positive, got {half_width}")
    points = _parse_int("points", values["points"], minimum=3)
    _check_potential_descriptor(values["potential"])
    p = _parse_float("p", values["p"])
    if not 1.0 < p < 2.0:
        raise ConfigError(f"key 'p': must lie in the open interval (1, 2), got {p}")
    lambda_start = _parse_float("lambda_start", values["lambda_start"])
    if not 0.0 < lambda_start <= 1.0:
        raise ConfigError(f"key 'lambda_start': must lie in (0, 1], got {lambda_start}")
    lambda_ratio = _parse_float("lambda_ratio", values["lambda_ratio"])
    if not 0.0 < lambda_ratio < 1.0:
        raise ConfigError(
            f"key 'lambda_ratio': must lie in the open interval (0, 1) "
            f"or the schedule never terminates, got {lambda_ratio}"
        )
    lambda_min = _parse_float("lambda_min", values["lambda_min"])
    if not 0.0 < lambda_min <= lambda_start:
        raise ConfigError(
            f"key 'lambda_min': must lie in (0, lambda_start], got {lambda_min}"
        )
    tol_grad = _parse_float("tol_grad", values["tol_grad"])
    if tol_grad <= 0.0:
        raise ConfigError(f"key 'tol_grad': must be positive, got {tol_grad}")
    max_outer = _parse_int("max_outer", values["max_outer"], minimum=1)
    k_solutions = _parse_int("k_solutions", values["k_solutions"], minimum=1)
    rng_seed = _parse_int("rng_seed", values["rng_seed"], minimum=0)
    output_dir = values["output_dir"]
    if not output_dir:
        raise ConfigError("key 'output_dir': must be a nonempty path")

    emit_raw = values["emit"]
    emit: set[str] = set()
    if emit_raw:
        for token in emit_raw.split(","):
            token = token.strip()
            if token not in _EMIT_CHOICES:
                raise ConfigError(
                    f"key 'emit': unknown target {token!r}; allowed: {', '.join(sorted(_EMIT_CHOICES))}"
                )
            emit.add(token)

    return RunSpec(
        dim=dim,
        half_width=half_width,
        points=points,
        potential=values["potential"],
        p=p,
        lambda_start=lambda_start,
        lambda_ratio=lambda_ratio,
        lambda_min=lambda_min,
        tol_grad=tol_grad,
        max_outer=max_outer,
        k_solutions=k_solutions,
        rng_seed=rng_seed,
        output_dir=output_dir,
        emit=frozenset(emit),
    )


# ---------------------------------------------------------------------------
# LSEF1 field files


def _atomic_write_bytes(path: str, payload: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=os.path.basename(path) + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_text(path: str, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


def write_field(path: str, g: Grid, u: Field) -> None:
    """Persist a field in the LSEF1 layout (atomic rename on completion)."""
    if u.grid != g:
        raise FieldFormatError(
            f"dimension mismatch: field sampled on {u.grid.dim}d n={u.grid.points_per_dim}, "
            f"writing header for {g.dim}d n={g.points_per_dim}"
        )
    header = f"{g.dim} {g.points_per_dim} {float(g.half_width)!r}\n".encode("ascii")
    payload = np.ascontiguousarray(u.values, dtype="<f8").tobytes()
    _atomic_write_bytes(path, _MAGIC + header + payload)


def read_field(path: str) -> tuple[Grid, Field]:
    """Read an LSEF1 field file back into a (grid, field) pair, bit-exact."""
    with open(path, "rb") as handle:
        magic = handle.read(len(_MAGIC))
        if magic != _MAGIC:
            raise FieldFormatError(f"bad magic: expected {_MAGIC!r}, got {magic!r}")
        header = handle.readline()
        tokens = header.split()
        if len(tokens) != 3:
            raise FieldFormatError(f"malformed header line: {header!r}")
        try:
            dim = int(tokens[0])
            points = int(tokens[1])
            half_width = float(tokens[2])
        except ValueError:
            raise FieldFormatError(f"malformed header line: {header!r}") from None
        try:
            g = make_grid(dim, half_width, points)
        except ValueError as exc:
            raise FieldFormatError(f"dimension mismatch: {exc}") from None
        expected = points**dim * 8
        data = handle.read()
    if len(data) < expected:
        raise FieldFormatError(f"truncated payload: expected {expected} bytes, got {len(data)}")
    if len(data) > expected:
        raise FieldFormatError(f"trailing data after payload: expected {expected} bytes, got {len(data)}")
    values = np.frombuffer(data, dtype="<f8")
    return g, Field(grid=g, values=values)


# ---------------------------------------------------------------------------
# orchestration


def _run_checks(g: Grid, potential, u: Field, spec: RunSpec) -> list[CheckResult]:
    """All registry checks for one accepted solution, in registry order."""
    params0 = PerturbationParams(lam=0.0, p=spec.p)
    nehari_tol = 20.0 * spec.tol_grad * norm_h1v(g, potential, u)
    return [
        check_nehari(g, potential, u, tolerance=nehari_tol),
        check_energy_identity(g, potential, u, params0),
        check_scaling(g, potential, u, 0.3),
        check_log_sobolev(g, u, 1.0),
        check_linf(u),
        check_gradient_fd(g, potential, params0, trials=10, rng_seed=spec.rng_seed),
    ]


def _diagnostics_text(solutions) -> str:
    lines = ["j,lambda,energy,resid_precond,resid_raw,iters,mass,lambda_w1p_p,linf"]
    for j, (_, _, report) in enumerate(solutions, start=1):
        for rec in report.records:
            lines.append(
                f"{j},{rec.lam!r},{rec.energy!r},{rec.resid_precond!r},{rec.resid_raw!r},"
                f"{rec.iterations},{rec.mass!r},{rec.lambda_w1p_p!r},{rec.linf!r}"
            )
    return "\n".join(lines) + "\n"


def _checks_text(all_checks: list[list[CheckResult]]) -> str:
    lines = ["j,check_name,margin,tolerance,pass"]
    for j, results in enumerate(all_checks, start=1):
        for res in results:
            lines.append(f"{j},{res.name},{res.margin!r},{res.tolerance!r},{int(res.passed)}")
    return "\n".join(lines) + "\n"


def _plotdata_text(solutions) -> str:
    blocks = []
    for j, (_, _, report) in enumerate(solutions, start=1):
        rows = [f"# solution {j}"]
        rows.extend(f"{rec.lam!r} {rec.energy!r}" for rec in report.records)
        blocks.append("\n".join(rows))
    return "\n\n".join(blocks) + "\n"


def _fail(stage: str, detail: str) -> int:
    """Emit the machine-parsable failure line (always last on stderr)."""
    print(f"FAIL {stage} {detail}", file=sys.stderr)
    return 1


def run(spec: RunSpec, *, quiet: bool = False) -> int:
    """Execute the full solve described by ``spec`` and emit its artifacts.

    Exit code 0 requires all k solutions to be found and every accepted
    solution to pass the gate checks (nehari, energy_identity, linf).
    """
    try:
        g = make_grid(spec.dim, spec.half_width, spec.points)
        potential = build_potential(spec.potential)
        validate_potential(g, potential)
        params = PerturbationParams(lam=spec.lambda_start, p=spec.p)
        sched = ContinuationSchedule(
            lambda_start=spec.lambda_start, ratio=spec.lambda_ratio, lambda_min=spec.lambda_min
        )
        cfg = MountainPassConfig(descent_tol=spec.tol_grad, max_outer=spec.max_outer)
    except (ValueError, OSError) as exc:
        return _fail("config", str(exc))

    try:
        os.makedirs(spec.output_dir, exist_ok=True)
    except OSError as exc:
        return _fail("io", str(exc))

    try:
        solutions = find_k_solutions(g, potential, sched, params, cfg, spec.k_solutions)
    except (SolverError, ValueError) as exc:
        return _fail("solve", str(exc))
    if len(solutions) < spec.k_solutions:
        return _fail(
            "solve", f"found {len(solutions)} of {spec.k_solutions} requested solutions"
        )

    try:
        all_checks = [_run_checks(g, potential, u, spec) for u, _, _ in solutions]
    except ValueError as exc:
        return _fail("verify", str(exc))

    try:
        if "fields" in spec.emit:
            for j, (u, _, _) in enumerate(solutions, start=1):
                write_field(os.path.join(spec.output_dir, f"u_{j}.lsef"), g, u)
        if "diagnostics" in spec.emit:
            _atomic_write_text(os.path.join(spec.output_dir, "diagnostics.csv"), _diagnostics_text(solutions))
        if "checks" in spec.emit:
            _atomic_write_text(os.path.join(spec.output_dir, "checks.csv"), _checks_text(all_checks))
        if "plotdata" in spec.emit:
            _atomic_write_text(os.path.join(spec.output_dir, "energy_vs_lambda.dat"), _plotdata_text(solutions))
    except OSError as exc:
        return _fail("io", str(exc))

    if not quiet:
        for j, ((_, energy, report), results) in enumerate(zip(solutions, all_checks), start=1):
            verdict = "pass" if all(r.passed for r in results) else "CHECK FAILURES"
            print(
                f"solution {j}: energy={energy!r} "
                f"resid_raw={report.records[-1].resid_raw!r} checks={verdict}"
            )

    by_name = [{res.name: res for res in results} for results in all_checks]
    for j, named in enumerate(by_name, start=1):
        for gate in _GATE_CHECKS:
            res = named[gate]
            if not res.passed:
                return _fail(
                    "verify",
                    f"solution {j} failed {gate} (margin={res.margin!r}, tolerance={res.tolerance!r})",
                )
    return 0


# ---------------------------------------------------------------------------
# CLI


def _load_spec(config_path: str, output_dir: str | None) -> RunSpec:
    with open(config_path, "r", encoding="utf-8") as handle:
        spec = parse_config(handle.read())
    if output_dir is not None:
        spec = replace(spec, output_dir=output_dir)
    return spec


def _cmd_solve(args: argparse.Namespace) -> int:
    try:
        spec = _load_spec(args.config, args.output_dir)
    except OSError as exc:
        return _fail("io", str(exc))
    except ConfigError as exc:
        return _fail("config", str(exc))
    return run(spec, quiet=args.quiet)


def _cmd_verify(args: argparse.Namespace) -> int:
    try:
        spec = _load_spec(args.config, None)
    except OSError as exc:
        return _fail("io", str(exc))
    except ConfigError as exc:
        return _fail("config", str(exc))
    try:
        g, u = read_field(args.field)
    except (OSError, FieldFormatError) as exc:
        return _fail("io", str(exc))
    config_grid = make_grid(spec.dim, spec.half_width, spec.points)
    if g != config_grid:
        return _fail(
            "config",
            f"grid mismatch: field is {g.dim}d n={g.points_per_dim} L={g.half_width!r}, "
            f"config wants {config_grid.dim}d n={config_grid.points_per_dim} "
            f"L={config_grid.half_width!r}",
        )
    try:
        potential = build_potential(spec.potential)
        validate_potential(g, potential)
        results = _run_checks(g, potential, u, spec)
    except ValueError as exc:
        return _fail("verify", str(exc))
    if not args.quiet:
        print("check_name,margin,tolerance,pass")
        for res in results:
            print(f"{res.name},{res.margin!r},{res.tolerance!r},{int(res.passed)}")
    named = {res.name: res for res in results}
    for gate in _GATE_CHECKS:
        if not named[gate].passed:
            return _fail(
                "verify",
                f"field failed {gate} (margin={named[gate].margin!r}, "
                f"tolerance={named[gate].tolerance!r})",
            )
    return 0


def _cmd_info(args: argparse.Namespace) -> int:
    try:
        g, u = read_field(args.field)
    except (OSError, FieldFormatError) as exc:
        return _fail("io", str(exc))
    print(f"dim={g.dim}")
    print(f"points={g.points_per_dim}")
    print(f"half_width={float(g.half_width)!r}")
    print(f"values={u.values.size}")
    print(f"min={float(u.values.min())!r}")
    print(f"max={float(u.values.max())!r}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="lse",
        description="Variational solver and invariant checks for the logarithmic "
        "Schrodinger equation on a truncated box.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run the continuation solver from a config file")
    p_solve.add_argument("config", help="path to a key=value config file")
    p_solve.add_argument("--output-dir", default=None, help="override output_dir from the config")
    p_solve.add_argument("--quiet", action="store_true", help="suppress the per-solution summary")
    p_solve.set_defaults(func=_cmd_solve)

    p_verify = sub.add_parser("verify", help="run the registry checks on an existing field file")
    p_verify.add_argument("field", help="path to an LSEF1 field file")
    p_verify.add_argument("config", help="config supplying the potential and parameters")
    p_verify.add_argument("--quiet", action="store_true", help="suppress the per-check table")
    p_verify.set_defaults(func=_cmd_verify)

    p_info = sub.add_parser("info", help="print the header of a field file")
    p_info.add_argument("field", help="path to an LSEF1 field file")
    p_info.set_defaults(func=_cmd_info)

    args = parser.parse_args(argv)
    if not getattr(args, "quiet", False):
        logging.basicConfig(level=logging.INFO, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
