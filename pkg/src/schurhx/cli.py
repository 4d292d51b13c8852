"""Command-line driver: interface solves, refinement tables, identity checks.

Outputs are deterministic for a fixed configuration: the convergence CSV and
the summary CSV are byte-identical across reruns (timings go to stdout only).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .assemble import Coefficients
from .errors import ConfigurationError
from .krylov import SolveReport, pcg
from .mesh import build_box_mesh, export_vtk
from .oracle import verify_dense_lemmas, verify_identities
from .precond import setup_maxwell, setup_scalar

__all__ = ["ExperimentConfig", "run_experiment", "run_table", "run_verify", "main"]

TABLE_CELLS = (3, 6, 9, 12)
VERIFY_SUBDOMAIN_GRIDS = ((1, 1, 1), (2, 1, 1), (2, 2, 2))


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "scalar"
    cells: tuple[int, int, int] = (3, 3, 3)
    subdomains: tuple[int, int, int] = (3, 3, 3)
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    tol: float = 1e-9
    max_iter: int = 1000
    seed: int = 0
    out: str | None = None
    export_vtk: str | None = None
    table: bool = False

    def __post_init__(self):
        if self.problem not in ("scalar", "maxwell", "verify"):
            raise ConfigurationError(f"unknown problem {self.problem!r}")
        if not (0 < self.tol < 1):
            raise ConfigurationError(f"tol must lie in (0, 1), got {self.tol}")
        if self.max_iter < 1:
            raise ConfigurationError(f"max_iter must be >= 1, got {self.max_iter}")
        for name in ("alpha", "beta", "gamma"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be strictly positive")

    def coefficients(self) -> Coefficients:
        return Coefficients(self.alpha, self.beta, self.gamma)

    def echo_items(self) -> list[tuple[str, str]]:
        items = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            elif isinstance(value, float):
                value = repr(value)
            items.append((f.name, str(value)))
        return items


def _parse_triple(text: str, flag: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigurationError(f"{flag} expects NX,NY,NZ, got {text!r}")
    try:
        return tuple(int(p) for p in parts)  # type: ignore[return-value]
    except ValueError as err:
        raise ConfigurationError(f"{flag} expects integers, got {text!r}") from err


def _read_config_file(path: str) -> dict:
    values: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _coerce(key: str, value):
    if isinstance(value, str):
        if key in ("cells", "subdomains"):
            return _parse_triple(value, key)
        if key in ("alpha", "beta", "gamma", "tol"):
            return float(value)
        if key in ("max_iter", "seed"):
            return int(value)
        if key == "table":
            if value.lower() in ("1", "true", "yes"):
                return True
            if value.lower() in ("0", "false", "no"):
                return False
            raise ConfigurationError(f"table expects a boolean, got {value!r}")
    return value


def build_config(cli_values: dict, file_values: dict) -> ExperimentConfig:
    """Defaults, overridden by the config file, overridden by CLI flags."""
    known = {f.name for f in fields(ExperimentConfig)}
    merged: dict = {}
    for key, value in file_values.items():
        if key not in known:
            raise ConfigurationError(f"unknown config key {key!r}")
        merged[key] = _coerce(key, value)
    for key, value in cli_values.items():
        if value is not None:
            merged[key] = _coerce(key, value)
    return ExperimentConfig(**merged)


def _history_lines(config: ExperimentConfig, report: SolveReport) -> list[str]:
    lines = [f"# {key}={value}" for key, value in config.echo_items()]
    for key in ("dim_skeleton", "dim_volume", "iterations", "converged", "relative_error"):
        value = report.metadata[key]
        lines.append(f"# {key}={value!r}" if isinstance(value, float) else f"# {key}={value}")
    lines.append("iter,relres")
    lines += [f"{k},{float(r)!r}" for k, r in enumerate(report.history.relres)]
    return lines


def _summary_path(out: str) -> Path:
    p = Path(out)
    return p.with_name(p.stem + ".summary.csv")


def _write_outputs(config: ExperimentConfig, reports: list[SolveReport]) -> None:
    if config.out is None:
        return
    out = Path(config.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if len(reports) == 1:
        out.write_text("\n".join(_history_lines(config, reports[0])) + "\n")
    else:
        for rep in reports:
            n = rep.metadata["cells"][0]
            per_size = out.with_name(out.stem + f".cells{n}{out.suffix or '.csv'}")
            cfg = replace(config, cells=rep.metadata["cells"], table=False)
            per_size.write_text("\n".join(_history_lines(cfg, rep)) + "\n")
    rows = ["dim_skeleton,dim_volume,iters"]
    rows += [
        f"{rep.metadata['dim_skeleton']},{rep.metadata['dim_volume']},{rep.metadata['iterations']}"
        for rep in reports
    ]
    _summary_path(config.out).write_text("\n".join(rows) + "\n")


def run_experiment(config: ExperimentConfig, write: bool = True) -> SolveReport:
    """One interface solve with a manufactured random solution."""
    mesh = build_box_mesh(config.cells, config.subdomains)
    coeffs = config.coefficients()
    if config.problem == "scalar":
        problem = setup_scalar(mesh, coeffs)
        apply_op, apply_prec = problem.schur.apply, problem.qnn
    elif config.problem == "maxwell":
        problem = setup_maxwell(mesh, coeffs)
        apply_op, apply_prec = problem.schur.apply, problem.qhx
    else:
        raise ConfigurationError(f"run_experiment cannot run {config.problem!r}")

    rng = np.random.default_rng(config.seed)
    exact = rng.uniform(-1.0, 1.0, problem.dim_skeleton)
    rhs = apply_op(exact)
    report = pcg(apply_op, apply_prec, rhs, tol=config.tol, max_iter=config.max_iter)
    rel_error = float(
        np.linalg.norm(report.solution - exact) / np.linalg.norm(exact)
    )
    report.metadata.update(
        problem=config.problem,
        cells=config.cells,
        subdomains=config.subdomains,
        dim_skeleton=problem.dim_skeleton,
        dim_volume=problem.dim_volume,
        iterations=report.history.iterations,
        converged=report.history.converged,
        relative_error=rel_error,
    )
    print(
        f"{config.problem}: cells={config.cells} subdomains={config.subdomains} "
        f"dim_skeleton={problem.dim_skeleton} dim_volume={problem.dim_volume} "
        f"iters={report.history.iterations} converged={report.history.converged} "
        f"relres={report.history.relres[-1]:.3e} relerr={rel_error:.3e} "
        f"time={report.history.wall_time:.2f}s"
    )
    if config.export_vtk:
        export_vtk(mesh, config.export_vtk)
    if write:
        _write_outputs(config, [report])
    return report


def run_table(config: ExperimentConfig) -> list[SolveReport]:
    """The refinement table: cells {3,6,9,12} per axis, fixed subdomain grid."""
    reports = []
    for n in TABLE_CELLS:
        cfg = replace(config, cells=(n, n, n), table=False, out=None)
        reports.append(run_experiment(cfg, write=False))
    print(f"\n{config.problem} refinement table (subdomains={config.subdomains}):")
    print("dim_skeleton  dim_volume  iters")
    for rep in reports:
        print(
            f"{rep.metadata['dim_skeleton']:>12}  {rep.metadata['dim_volume']:>10}  "
            f"{rep.metadata['iterations']:>5}"
        )
    _write_outputs(config, reports)
    return reports


def run_verify(config: ExperimentConfig, corrupt_gradient_sign: bool = False) -> int:
    """Identity suite on small meshes; exit code 0 when everything passes."""
    checks = []
    lemmas = verify_dense_lemmas(seed=config.seed)
    checks.extend(lemmas.checks)
    for grid in VERIFY_SUBDOMAIN_GRIDS:
        mesh = build_box_mesh((2, 2, 2), grid)
        rep = verify_identities(
            mesh,
            config.coefficients(),
            seed=config.seed,
            corrupt_gradient_sign=corrupt_gradient_sign,
        )
        checks.extend(rep.checks)

    from .oracle import IdentityReport

    combined = IdentityReport(checks)
    for line in combined.lines():
        print(line)
    n_fail = sum(not c.passed for c in combined.checks)
    print(f"verify: {len(combined.checks)} checks, {n_fail} failures")
    if config.out:
        Path(config.out).parent.mkdir(parents=True, exist_ok=True)
        combined.write_csv(config.out)
    return 0 if combined.passed else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="schurhx",
        description=(
            "Substructured interface solves on the unit box: scalar "
            "reaction-diffusion with a Neumann-Neumann preconditioner, "
            "curl-curl with a substructured Hiptmair-Xu preconditioner, "
            "plus a dense identity verifier."
        ),
    )
    parser.add_argument(
        "--problem", choices=("scalar", "maxwell", "verify"), default=None,
        help="what to run (default scalar)",
    )
    parser.add_argument("--cells", default=None, help="cells per axis, NX,NY,NZ")
    parser.add_argument(
        "--subdomains", default=None, help="subdomains per axis, JX,JY,JZ"
    )
    parser.add_argument("--alpha", type=float, default=None, help="diffusion coefficient")
    parser.add_argument("--beta", type=float, default=None, help="reaction coefficient")
    parser.add_argument(
        "--gamma", type=float, default=None, help="zeroth-order Maxwell weight"
    )
    parser.add_argument("--tol", type=float, default=None, help="PCG relative tolerance")
    parser.add_argument("--max-iter", type=int, default=None, dest="max_iter")
    parser.add_argument("--seed", type=int, default=None, help="RNG seed")
    parser.add_argument("--out", default=None, help="convergence CSV path")
    parser.add_argument(
        "--export-vtk", default=None, dest="export_vtk", help="write the mesh as VTK"
    )
    parser.add_argument(
        "--table", action="store_const", const=True, default=None,
        help="run the refinement table (cells 3,6,9,12 per axis)",
    )
    parser.add_argument("--config", default=None, help="key=value config file")
    parser.add_argument(
        "--corrupt-gradient-sign", action="store_true", help=argparse.SUPPRESS
    )
    args = parser.parse_args(argv)

    cli_values = {
        key: getattr(args, key)
        for key in (
            "problem", "cells", "subdomains", "alpha", "beta", "gamma",
            "tol", "max_iter", "seed", "out", "export_vtk", "table",
        )
    }
    try:
        file_values = _read_config_file(args.config) if args.config else {}
        config = build_config(cli_values, file_values)
        print("effective configuration:")
        for key, value in config.echo_items():
            print(f"  {key}={value}")
        if config.problem == "verify":
            return run_verify(config, corrupt_gradient_sign=args.corrupt_gradient_sign)
        if config.table:
            run_table(config)
        else:
            run_experiment(config)
        return 0
    except ConfigurationError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
