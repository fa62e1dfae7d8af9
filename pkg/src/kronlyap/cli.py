"""Command-line front end: certification runs, sweeps, set exports, simulation.

One binary with subcommands.  A JSON config file can hold any long-option
value (keys use underscores); explicit flags win over the config, which wins
over built-in defaults, so a sweep is reproducible from a single manifest.

Exit codes are uniform across subcommands: 0 success, 1 usage or IO error,
2 negative mathematical result (infeasible, failed validation, flagged
decrease), 3 trajectory divergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import figures
from .analysis import boundary_trace, intersect_levels, write_area_json, write_boundary_csv
from .certificate import (
    Certificate,
    Infeasible,
    SolverFailure,
    WrongSystemError,
    certify,
    eval_V,
    validate,
)
from .sdp import SolverOptions
from .simulate import (
    AdversarialPolicy,
    FixedPolicy,
    PeriodicPolicy,
    RandomPolicy,
    check_monotone,
    integrate,
    write_trajectory_csv,
)
from .tensor_lift import SwitchedSystem

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NEGATIVE = 2
EXIT_DIVERGED = 3


def _parse_floats(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",")], dtype=float)


def _parse_int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",")]


def _parse_range(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition(":")
    lo, hi = int(lo), int(hi or lo)
    if not 1 <= lo <= hi:
        raise ValueError(f"bad level range {text!r}: need 1 <= lo <= hi")
    return lo, hi


def _parse_policy(text: str, cert: Certificate | None, seed: int):
    kind, _, rest = text.partition(":")
    if kind == "fixed":
        return FixedPolicy(mode=int(rest or 0))
    if kind == "periodic":
        dwell, _, seq = rest.partition(":")
        return PeriodicPolicy(dwell=float(dwell), sequence=tuple(_parse_int_list(seq or "0")))
    if kind == "random":
        if rest:
            lo, hi = (float(v) for v in rest.split(":"))
            return RandomPolicy(dwell_range=(lo, hi), seed=seed)
        return RandomPolicy(seed=seed)
    if kind == "adversarial":
        if cert is None:
            raise ValueError("adversarial policy needs --cert")
        return AdversarialPolicy(certificate=cert)
    raise ValueError(f"unknown policy {text!r}")


def _solver_options(cfg) -> SolverOptions:
    kwargs = {}
    if cfg.max_iters is not None:
        kwargs["max_iters"] = cfg.max_iters
    if cfg.tol is not None:
        kwargs["gap_tol"] = cfg.tol
    return SolverOptions(**kwargs)


def _require(cfg, *names):
    missing = [n for n in names if getattr(cfg, n, None) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise ValueError(f"missing required option(s): {flags}")


def _out_dir(cfg) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cert_path(out: Path, c: int) -> Path:
    return out / f"certificate_c{c:02d}.json"


def _print_cert_summary(cert: Certificate) -> None:
    worst = max(cert.margins["lmi_max_eigs"])
    print(f"feasible: order-{cert.order} certificate (level c={cert.c}, "
          f"objective {cert.objective})")
    print(f"  floor margin   min eig(G - I) = {cert.margins['floor_min_eig']:.3e}")
    print(f"  decrease       max eig over modes = {worst:.3e} "
          f"(required < -{cert.margins['delta']:.3e})")
    print(f"  solver         {cert.solver['iterations']} Newton steps, "
          f"{cert.solver['runtime']:.3f} s")


def _run_one(system, c, cfg):
    """Certify one level; returns (row dict, certificate or None)."""
    started = time.perf_counter()
    try:
        cert = certify(system, c, objective=cfg.objective,
                       options=_solver_options(cfg), margin=cfg.margin)
        row = {
            "c": c, "order": 2 * c, "status": "feasible",
            "iterations": cert.solver["iterations"],
            "runtime": round(time.perf_counter() - started, 4),
            "p11": cert.gram[0, 0],
        }
        return row, cert
    except (Infeasible, SolverFailure) as exc:
        status = "infeasible" if isinstance(exc, Infeasible) else exc.report.status.value
        row = {
            "c": c, "order": 2 * c, "status": status,
            "iterations": exc.report.iterations,
            "runtime": round(time.perf_counter() - started, 4),
            "p11": "",
        }
        return row, None


def cmd_certify(cfg) -> int:
    _require(cfg, "system", "c")
    system = SwitchedSystem.load(cfg.system)
    out = _out_dir(cfg)
    try:
        cert = certify(system, cfg.c, objective=cfg.objective,
                       options=_solver_options(cfg), margin=cfg.margin)
    except Infeasible as exc:
        print(f"infeasible at level c={cfg.c}: {exc}")
        return EXIT_NEGATIVE
    except SolverFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    path = _cert_path(out, cfg.c)
    cert.save(path)
    _print_cert_summary(cert)
    print(f"  written        {path}")
    return EXIT_OK


def cmd_sweep(cfg) -> int:
    _require(cfg, "system", "c_range")
    system = SwitchedSystem.load(cfg.system)
    out = _out_dir(cfg)
    lo, hi = _parse_range(cfg.c_range)
    levels = list(range(lo, hi + 1))
    jobs = max(1, int(cfg.jobs))
    if jobs == 1:
        results = [_run_one(system, c, cfg) for c in levels]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda c: _run_one(system, c, cfg), levels))
    rows = []
    for row, cert in results:
        rows.append(row)
        if cert is not None:
            cert.save(_cert_path(out, cert.c))
    csv_path = out / "sweep.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["c", "order", "status", "iterations",
                                                "runtime", "p11"])
        writer.writeheader()
        writer.writerows(rows)
    figures.save_sweep_figure(rows, out / "sweep.png")
    for row in rows:
        print(f"c={row['c']:>2}  order {row['order']:>2}  {row['status']:<10} "
              f"{row['iterations']:>4} steps  {row['runtime']:>7.3f} s")
    print(f"summary written to {csv_path}")
    statuses = {r["status"] for r in rows}
    if statuses - {"feasible", "infeasible"}:
        return EXIT_ERROR
    return EXIT_OK if statuses == {"feasible"} else EXIT_NEGATIVE


def cmd_invariant_set(cfg) -> int:
    _require(cfg, "system")
    system = SwitchedSystem.load(cfg.system)
    out = _out_dir(cfg)
    x0 = _parse_floats(cfg.x0)
    if not np.any(x0):
        raise ValueError("x0 must be nonzero: the level of the set would be 0")

    certs: list[Certificate] = []
    if cfg.certs:
        for path in cfg.certs:
            cert = Certificate.load(path)
            report = validate(cert, system)
            if not report.passed:
                print(f"certificate {path} fails validation: {report.failures[0]}")
                return EXIT_NEGATIVE
            certs.append(cert)
    else:
        if not cfg.c:
            raise ValueError("need --c levels or --certs files")
        for c in _parse_int_list(cfg.c):
            try:
                certs.append(certify(system, c, objective=cfg.objective,
                                     options=_solver_options(cfg), margin=cfg.margin))
            except Infeasible as exc:
                print(f"infeasible at level c={c}: {exc}")
                return EXIT_NEGATIVE

    certs.sort(key=lambda cert: -cert.c)
    sets = [boundary_trace(cert, x0, samples=cfg.samples) for cert in certs]
    for cert, s in zip(certs, sets):
        write_boundary_csv(s, out / f"boundary_c{cert.c:02d}.csv")
    combined = intersect_levels(sets)
    write_boundary_csv(combined, out / "boundary_intersection.csv")
    write_area_json(sets + [combined], out / "areas.json")
    figures.save_invariant_set_figure(sets + [combined], out / "invariant_sets.png")
    for s in sets + [combined]:
        print(f"{s.label:<14} area = {s.area:.6f} (err <= {s.area_error:.2e})")
    print(f"boundaries and areas written to {out}")
    return EXIT_OK


def cmd_simulate(cfg) -> int:
    _require(cfg, "system")
    system = SwitchedSystem.load(cfg.system)
    out = _out_dir(cfg)
    cert = Certificate.load(cfg.cert) if cfg.cert else None
    if cert is not None:
        report = validate(cert, system)
        if not report.passed:
            print(f"certificate fails validation: {report.failures[0]}")
            return EXIT_NEGATIVE
    x0 = _parse_floats(cfg.x0) if cfg.x0 else np.eye(system.n)[0]

    base_policy = _parse_policy(cfg.policy, cert, cfg.seed)
    if isinstance(base_policy, RandomPolicy):
        policies = [RandomPolicy(dwell_range=base_policy.dwell_range, seed=cfg.seed + k)
                    for k in range(cfg.seeds)]
    else:
        policies = [base_policy]

    trajectories = [integrate(system, pol, x0, cfg.horizon, cfg.step) for pol in policies]
    for k, traj in enumerate(trajectories):
        write_trajectory_csv(traj, out / f"trajectory_{k:03d}.csv")
    figures.save_trajectory_figure(trajectories, out / "trajectories.png")

    diverged = [k for k, t in enumerate(trajectories) if t.diverged]
    report_dict = {
        "trajectories": len(trajectories),
        "diverged": diverged,
        "policy": cfg.policy,
        "horizon": cfg.horizon,
        "step": cfg.step,
    }
    flagged = []
    uncontained = []
    if cert is not None:
        level = float(eval_V(cert, x0))
        for k, traj in enumerate(trajectories):
            mono = check_monotone(cert, traj)
            if not mono.passed:
                flagged.append(k)
            if float(np.max(eval_V(cert, traj.states))) > level * (1.0 + 1e-6):
                uncontained.append(k)
        report_dict.update({
            "certificate_level": cert.c,
            "set_level": level,
            "monotonicity_flags": flagged,
            "containment_violations": uncontained,
        })
    with open(out / "simulation_report.json", "w") as fh:
        json.dump(report_dict, fh, indent=2)
        fh.write("\n")

    print(f"{len(trajectories)} trajectories, {len(diverged)} diverged; "
          f"outputs in {out}")
    if cert is not None:
        print(f"monotonicity flags: {len(flagged)}, "
              f"containment violations: {len(uncontained)}")
    if diverged:
        return EXIT_DIVERGED
    if flagged or uncontained:
        return EXIT_NEGATIVE
    return EXIT_OK


def cmd_validate(cfg) -> int:
    _require(cfg, "cert", "system")
    system = SwitchedSystem.load(cfg.system)
    cert = Certificate.load(cfg.cert)
    report = validate(cert, system)
    if report.passed:
        print(f"certificate valid: floor margin {report.floor_min_eig:.3e}, "
              f"worst decrease {max(report.lmi_max_eigs):.3e}")
        return EXIT_OK
    for failure in report.failures:
        print(f"violated: {failure}")
    return EXIT_NEGATIVE


_DEFAULTS = {
    "certify": {"objective": "feas", "out": "out", "margin": None,
                "max_iters": None, "tol": None},
    "sweep": {"objective": "x1", "out": "out", "margin": None,
              "max_iters": None, "tol": None, "jobs": 1},
    "invariant-set": {"objective": "x1", "out": "out", "margin": None,
                      "max_iters": None, "tol": None, "samples": 720,
                      "x0": "1,0", "c": None, "certs": None},
    "simulate": {"out": "out", "policy": "random", "seeds": 100, "seed": 0,
                 "horizon": 20.0, "step": 1e-3, "x0": None, "cert": None},
    "validate": {},
}


def _add_solver_flags(p):
    p.add_argument("--objective", choices=["feas", "x1", "x2"],
                   help="feas: any admissible matrix; x1/x2: minimize the "
                        "first/last diagonal coefficient")
    p.add_argument("--margin", type=float, help="strictness margin delta")
    p.add_argument("--max-iters", type=int, help="Newton step budget")
    p.add_argument("--tol", type=float, help="relative duality gap target")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kronlyap",
        description="Stability certificates for switched linear systems via "
                    "Kronecker-lifted quadratic Lyapunov functions.",
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("certify", help="compute one certificate")
    p.add_argument("--system")
    p.add_argument("--c", type=int, help="lift level (order is 2c)")
    _add_solver_flags(p)
    p.add_argument("--out")
    p.add_argument("--config")
    p.set_defaults(handler=cmd_certify)

    p = sub.add_parser("sweep", help="certify a range of levels")
    p.add_argument("--system")
    p.add_argument("--c-range", help="inclusive range, e.g. 1:13")
    _add_solver_flags(p)
    p.add_argument("--jobs", type=int, help="parallel solves")
    p.add_argument("--out")
    p.add_argument("--config")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("invariant-set", help="trace invariant sublevel sets")
    p.add_argument("--system")
    p.add_argument("--c", help="comma-separated levels to certify inline")
    p.add_argument("--certs", nargs="+", help="existing certificate files")
    p.add_argument("--x0", help="initial state, e.g. 1,0")
    p.add_argument("--samples", type=int, help="angular samples (even)")
    _add_solver_flags(p)
    p.add_argument("--out")
    p.add_argument("--config")
    p.set_defaults(handler=cmd_invariant_set)

    p = sub.add_parser("simulate", help="integrate switched trajectories")
    p.add_argument("--system")
    p.add_argument("--cert", help="certificate for decrease/containment checks")
    p.add_argument("--policy", help="fixed:I | periodic:DWELL:SEQ | random[:LO:HI] "
                                    "| adversarial")
    p.add_argument("--seeds", type=int, help="batch size for random policies")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--horizon", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--x0")
    p.add_argument("--out")
    p.add_argument("--config")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("validate", help="recheck a certificate from scratch")
    p.add_argument("--cert")
    p.add_argument("--system")
    p.add_argument("--config")
    p.set_defaults(handler=cmd_validate)

    return parser


def _merge_config(args: argparse.Namespace) -> argparse.Namespace:
    """Layer values: built-in defaults, then config file, then explicit flags."""
    merged = dict(_DEFAULTS.get(args.command, {}))
    config_path = getattr(args, "config", None)
    if config_path:
        with open(config_path) as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ValueError("config file must hold a JSON object")
        merged.update(loaded)
    for key, value in vars(args).items():
        if key in ("handler", "command", "config"):
            continue
        if value is not None or key not in merged:
            merged[key] = value
    merged["command"] = args.command
    merged["handler"] = args.handler
    return argparse.Namespace(**merged)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "command", None) is None:
        parser.print_help()
        return EXIT_ERROR
    try:
        cfg = _merge_config(args)
        return cfg.handler(cfg)
    except (OSError, json.JSONDecodeError, KeyError, ValueError,
            WrongSystemError, SolverFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
