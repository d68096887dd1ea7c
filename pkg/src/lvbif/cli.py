"""Command-line front end: eigen | points | branch | limit | verify | report.

Configuration comes from an optional JSON file plus flag overrides
(flags win).  Outputs are plot-ready CSV/JSON files; every file embeds
the model-parameter JSON and a schema version, and identical
configurations (including the seed) produce byte-identical files.

Exit codes: 0 success, 2 validation error, 3 solver failure, 4 a
theorem-grade verification inequality was violated.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import appendix, continuation, limit, points, solver, spectrum
from .params import Params, validate_params

SCHEMA = "1"

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4


class ValidationError(ValueError):
    pass


@dataclass
class RunConfig:
    params: Params
    out: Path
    n: int = 512
    modes: int = 4
    beta_max: float | None = None
    beta_max_factor: float = 1e3
    amplitude: float = 1e-2
    max_steps: int = 500
    seed: int = 0
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)
    draws: int = 300
    betas_per_draw: int = 400
    save_fields: bool = False
    json_summary: bool = False

    def validate(self) -> None:
        for name in ("n", "modes", "max_steps", "workers", "draws", "betas_per_draw"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.beta_max is not None and self.beta_max <= 0:
            raise ValidationError(f"beta-max must be positive, got {self.beta_max}")
        if self.amplitude <= 0:
            raise ValidationError(f"amplitude must be positive, got {self.amplitude}")


DEFAULT_PARAMS = {"mu": 16.0, "sigma": 16.0, "alpha": 2.0, "gamma": 1.0, "dim": 2}


def load_config(args) -> RunConfig:
    raw: dict = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    pdict = dict(DEFAULT_PARAMS)
    pdict.update(raw.get("params", {}))
    try:
        p = validate_params(**pdict)
    except (TypeError, ValueError) as exc:
        raise ValidationError(str(exc)) from exc
    cfg = RunConfig(params=p, out=Path(raw.get("out", "out")))
    for key in ("n", "modes", "beta_max", "beta_max_factor", "amplitude",
                "max_steps", "seed", "workers", "draws", "betas_per_draw",
                "save_fields"):
        if key in raw:
            setattr(cfg, key, raw[key])
    # flags win over the file
    if args.out is not None:
        cfg.out = Path(args.out)
    if args.grid is not None:
        cfg.n = args.grid
    if args.modes is not None:
        cfg.modes = args.modes
    if args.beta_max is not None:
        cfg.beta_max = args.beta_max
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    cfg.json_summary = bool(args.json)
    if getattr(args, "fields", False):
        cfg.save_fields = True
    cfg.validate()
    return cfg


def _meta_line(p: Params, **extra) -> str:
    bits = [f"schema={SCHEMA}",
            "params=" + json.dumps(p.as_dict(), sort_keys=True, separators=(",", ":"))]
    bits += [f"{k}={v}" for k, v in extra.items()]
    return "# " + " ".join(bits)


def _write_json(path: Path, payload: dict) -> None:
    payload = {"schema": SCHEMA, **payload}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _emit(cfg: RunConfig, summary: dict) -> None:
    if cfg.json_summary:
        print(json.dumps({"schema": SCHEMA, **summary}, indent=2, sort_keys=True))


def _spectrum_setup(cfg: RunConfig, k: int | None = None):
    grid = spectrum.build_grid(cfg.params.dim, cfg.n)
    op = spectrum.assemble_neumann_laplacian(grid)
    pairs = spectrum.eigenpairs(op, grid, k if k is not None else cfg.modes)
    return grid, op, pairs


def cmd_eigen(cfg: RunConfig) -> int:
    p = cfg.params
    grid, op, pairs = _spectrum_setup(cfg, k=max(cfg.modes, 4))
    cfg.out.mkdir(parents=True, exist_ok=True)
    spectrum.export_eigenpairs_csv(cfg.out / "eigenpairs.csv", pairs, grid,
                                   params_line=_meta_line(p))
    rows = []
    with open(cfg.out / "eigen_oracle.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_meta_line(p, n=grid.n) + "\n")
        fh.write("j,lambda_fd,lambda_oracle,abs_err,rel_err\n")
        for pair in pairs:
            oracle = spectrum.bessel_oracle(grid.dim, pair.j)
            abs_err = abs(pair.lam - oracle)
            rel_err = abs_err / oracle if oracle > 0 else abs_err
            rows.append({"j": pair.j, "lambda_fd": pair.lam, "lambda_oracle": oracle,
                         "abs_err": abs_err, "rel_err": rel_err})
            fh.write(f"{pair.j},{format(pair.lam, '.17g')},{format(oracle, '.17g')},"
                     f"{format(abs_err, '.17g')},{format(rel_err, '.17g')}\n")
    _emit(cfg, {"command": "eigen", "n": grid.n, "dim": grid.dim, "table": rows})
    return EXIT_OK


def cmd_points(cfg: RunConfig) -> int:
    p = cfg.params
    grid, op, pairs = _spectrum_setup(cfg)
    try:
        k = points.admissible_mode_count(p, pairs)
    except ValueError:
        # spectrum too short: extend until it certifies the count
        grid, op, pairs = _spectrum_setup(cfg, k=4 * cfg.modes)
        k = points.admissible_mode_count(p, pairs)
    cfg.out.mkdir(parents=True, exist_ok=True)
    bps = points.find_bifurcation_points(p, pairs)
    points.export_points_csv(cfg.out / "bifurcation_points.csv", bps,
                             meta_line=_meta_line(p, n=grid.n, k=k))
    note = "" if bps else ("no bifurcation points: sqrt(mu*sigma)="
                           f"{np.sqrt(p.mu * p.sigma):.6g} does not exceed lambda_1="
                           f"{pairs[1].lam:.6g}")
    _write_json(cfg.out / "points.json", {
        "params": p.as_dict(), "k": k, "note": note,
        "points": [{
            "j": bp.j, "beta_j": bp.beta_j, "lambda_j": bp.lambda_j, "m_j": bp.m_j,
            "step2_value": bp.diagnostics.step2_value,
            "pairing_value": bp.diagnostics.pairing_value,
            "nondeg_value": bp.diagnostics.nondeg_value,
            "nondeg_flagged": bp.diagnostics.nondeg_flagged,
            "index_left": bp.diagnostics.index_left,
            "index_right": bp.diagnostics.index_right,
        } for bp in bps],
    })
    _emit(cfg, {"command": "points", "k": k, "betas": [bp.beta_j for bp in bps]})
    return EXIT_OK


def _run_one_direction(cfg: RunConfig, op, bp, direction: int):
    ccfg = continuation.ContinuationConfig(
        amplitude=cfg.amplitude, beta_max=cfg.beta_max,
        beta_max_factor=cfg.beta_max_factor, max_steps=cfg.max_steps)
    return continuation.continue_branch(bp, cfg.params, op, direction=direction, cfg=ccfg)


def cmd_branch(cfg: RunConfig, j: int) -> int:
    p = cfg.params
    grid, op, pairs = _spectrum_setup(cfg, k=max(cfg.modes, j + 1))
    bps = [bp for bp in points.find_bifurcation_points(p, pairs) if bp.j == j]
    if not bps:
        raise ValidationError(f"no bifurcation point with index j={j} for these parameters")
    bp = bps[0]
    cfg.out.mkdir(parents=True, exist_ok=True)
    with ThreadPoolExecutor(max_workers=max(1, min(cfg.workers, 2))) as pool:
        futures = {d: pool.submit(_run_one_direction, cfg, op, bp, d) for d in (1, -1)}
        branches = {d: fut.result() for d, fut in futures.items()}
    summary = {"command": "branch", "j": j, "beta_j": bp.beta_j, "directions": {}}
    for d, br in branches.items():
        tag = "plus" if d == 1 else "minus"
        continuation.export_branch_summary_csv(
            cfg.out / f"branch_j{j}_{tag}.csv", br, meta_line=_meta_line(p, j=j, direction=d))
        field_files = []
        if cfg.save_fields:
            for idx, pt in enumerate(br.points):
                name = f"branch_j{j}_{tag}_point{idx:04d}.csv"
                solver.save_state_csv(cfg.out / name, pt.state,
                                      meta_line=_meta_line(p, beta=pt.state.beta))
                field_files.append(name)
        _write_json(cfg.out / f"branch_j{j}_{tag}.json",
                    continuation.branch_manifest(br, p, field_files=field_files))
        summary["directions"][tag] = {
            "points": len(br.points), "termination": br.termination,
            "beta_final": br.points[-1].state.beta,
        }
    _emit(cfg, summary)
    return EXIT_OK


def _load_branch_fields(cfg: RunConfig, j: int, tag: str, grid):
    manifest_path = cfg.out / f"branch_j{j}_{tag}.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"missing branch manifest {manifest_path}; run 'branch' first")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if not manifest.get("field_files"):
        raise FileNotFoundError(
            f"branch {manifest_path} was saved without per-point fields; rerun with --fields")
    states = []
    for name in manifest["field_files"]:
        data = np.loadtxt(cfg.out / name, delimiter=",", skiprows=2)
        meta = open(cfg.out / name, encoding="utf-8").readline()
        beta = float(meta.split("beta=")[1].split()[0])
        states.append(solver.StateFields(grid, data[:, 1].copy(), data[:, 2].copy(), beta))
    return manifest, states


def cmd_limit(cfg: RunConfig, j: int) -> int:
    p = cfg.params
    if p.sigma != p.mu:
        raise ValidationError("limit profiles need sigma = mu")
    grid, op, pairs = _spectrum_setup(cfg, k=max(cfg.modes, j + 1))
    manifest, states = _load_branch_fields(cfg, j, "plus", grid)
    last = states[-1]
    wb = p.gamma * last.u1 - p.alpha * last.u2
    sign = 1 if float(grid.weights @ (wb * pairs[j].f)) >= 0 else -1
    profile = limit.solve_limit_equation(p, j, grid, op, pairs[j], sign=sign)
    cfg.out.mkdir(parents=True, exist_ok=True)
    limit.export_profile_csv(cfg.out / f"limit_profile_j{j}.csv", profile, grid,
                             meta_line=_meta_line(p, j=j))
    _write_json(cfg.out / f"limit_profile_j{j}.json", {
        "params": p.as_dict(), "j": j, "roots": list(profile.roots),
        "residual": profile.residual, "orientation": sign,
    })
    series = []
    for st in states:
        series.append({
            "beta": st.beta,
            "distance": limit.segregation_distance(st, p, profile),
            "overlap": grid.integrate(st.u1 ** 2 * st.u2),
        })
    series.sort(key=lambda row: row["beta"])
    with open(cfg.out / f"segregation_j{j}.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_meta_line(p, j=j) + "\n")
        fh.write("beta,distance,overlap\n")
        for row in series:
            fh.write(f"{format(row['beta'], '.17g')},{format(row['distance'], '.17g')},"
                     f"{format(row['overlap'], '.17g')}\n")
    root_gap = limit.scaled_nodal_root_gap(last, p, profile)
    _emit(cfg, {"command": "limit", "j": j, "roots": list(profile.roots),
                "distance_first": series[0]["distance"], "distance_last": series[-1]["distance"],
                "overlap_first": series[0]["overlap"], "overlap_last": series[-1]["overlap"],
                "root_gap": root_gap})
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    p = cfg.params
    report = appendix.run_appendix_sweep(seed=cfg.seed, draws=cfg.draws,
                                         betas_per_draw=cfg.betas_per_draw)
    # z / non-degeneracy report at the configured family's bifurcation points
    try:
        grid, op, pairs = _spectrum_setup(cfg)
        bps = points.find_bifurcation_points(p, pairs)
        zrep = appendix.verify_z_sign(p, [(bp.j, bp.beta_j, bp.lambda_j) for bp in bps])
    except Exception as exc:  # generic claims never affect the exit code
        zrep = {"points": [], "note": f"skipped: {exc}"}
    cfg.out.mkdir(parents=True, exist_ok=True)
    _write_json(cfg.out / "verify_report.json", {
        "params": p.as_dict(), "sweep": report, "generic_z_report": zrep,
    })
    _emit(cfg, {"command": "verify",
                "theorem_violations": report["theorem_violations"],
                "points_checked": {k: v["checked"] for k, v in report["inequalities"].items()}})
    return EXIT_OK if report["theorem_violations"] == 0 else EXIT_VERIFY


def cmd_report(cfg: RunConfig) -> int:
    p = cfg.params
    rows = []
    summaries = sorted(cfg.out.glob("branch_j*_plus.csv")) + \
        sorted(cfg.out.glob("branch_j*_minus.csv"))
    for path in sorted(summaries):
        stem = path.stem  # branch_j{j}_{tag}
        parts = stem.split("_")
        j = int(parts[1][1:])
        tag = parts[2]
        with open(path, encoding="utf-8") as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
        header = lines[0].strip().split(",")
        i_beta, i_sup = header.index("beta"), header.index("sup_u1")
        for ln in lines[1:]:
            vals = ln.strip().split(",")
            rows.append((j, tag, float(vals[i_beta]), float(vals[i_sup])))
    if not rows:
        raise ValidationError(f"no branch summaries found under {cfg.out}; run 'branch' first")
    with open(cfg.out / "bifurcation_diagram.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_meta_line(p) + "\n")
        fh.write("j,direction,beta,sup_u1\n")
        for j, tag, beta, sup in rows:
            fh.write(f"{j},{tag},{format(beta, '.17g')},{format(sup, '.17g')}\n")
    _emit(cfg, {"command": "report", "rows": len(rows)})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="lvbif",
        description="Bifurcation analysis of the two-species competition system "
                    "on the radial unit ball")
    ap.add_argument("--config", type=Path, default=None, help="JSON config file")
    ap.add_argument("--out", type=Path, default=None, help="output directory")
    ap.add_argument("--grid", type=int, default=None, help="number of radial nodes")
    ap.add_argument("--modes", type=int, default=None, help="requested eigenmode count")
    ap.add_argument("--beta-max", type=float, default=None, help="branch beta ceiling")
    ap.add_argument("--seed", type=int, default=None, help="seed for verification sweeps")
    ap.add_argument("--workers", type=int, default=None, help="worker pool size")
    ap.add_argument("--json", action="store_true", help="machine summary on stdout")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("eigen", help="eigenpair table with Bessel-zero oracle comparison")
    sub.add_parser("points", help="bifurcation-point table with diagnostics")
    br = sub.add_parser("branch", help="trace one branch (both directions)")
    br.add_argument("--j", type=int, required=True, help="mode index of the branch")
    br.add_argument("--fields", action="store_true", help="save per-point field CSVs")
    lm = sub.add_parser("limit", help="strong-competition limit profile + distances")
    lm.add_argument("--j", type=int, required=True, help="mode index of the branch")
    sub.add_parser("verify", help="appendix inequality sweep")
    sub.add_parser("report", help="aggregate branch outputs into a bifurcation diagram")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        if args.command == "eigen":
            return cmd_eigen(cfg)
        if args.command == "points":
            return cmd_points(cfg)
        if args.command == "branch":
            return cmd_branch(cfg, args.j)
        if args.command == "limit":
            return cmd_limit(cfg, args.j)
        if args.command == "verify":
            return cmd_verify(cfg)
        if args.command == "report":
            return cmd_report(cfg)
        raise ValidationError(f"unknown command {args.command}")
    except (ValidationError, ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (solver.SolverError, continuation.ContinuationError,
            limit.LimitSolveError, points.BracketingError, RuntimeError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
