"""Command-line front end.

Exit codes: 0 success, 1 validation error (bad arguments, unknown ids,
malformed files, eps incompatible with the grid), 2 numerical failure or a
failed verification. Errors are reported on one line as ``error: <message>``.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from contextlib import nullcontext
from dataclasses import asdict, dataclass, field
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import experiments, gallery
from .decompose import distance_report
from .defect import defect_pairing, defect_total_variation
from .energy import critical_exponent_estimate, energy_sweep
from .experiments import EpsSchedule
from .grid import EnergyParams, GridFunction, Kernel, atomic_write, load_grid, sample, save_grid


class NumericalFailure(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    """Everything a command needs; serialised into every report."""

    command: str
    gallery: str | None = None
    input: str | None = None
    grid: int | None = None
    theta1: float = 0.5
    theta2: float = 0.5
    p: float | None = None
    eps: str | None = None
    kernel: str = "annulus"
    probes: list[float] = field(default_factory=list)
    r: float | None = None
    bumps: list[list[float]] = field(default_factory=list)
    out: str | None = None


def _field(cfg: ExperimentConfig) -> GridFunction:
    if (cfg.gallery is None) == (cfg.input is None):
        raise ValueError("give exactly one of --gallery and --input")
    if cfg.input is not None:
        if not Path(cfg.input).is_file():
            raise ValueError(f"input grid {cfg.input!r} does not exist")
        if Path(cfg.input).suffix == ".csv":
            raise ValueError("CSV grids carry no domain; pass the binary format to --input")
        return load_grid(cfg.input)
    if cfg.grid is None or cfg.grid < 2:
        raise ValueError("--grid N (N >= 2) is required with --gallery")
    return gallery.get(cfg.gallery).render(cfg.grid)


def _schedule(cfg: ExperimentConfig, u: GridFunction) -> dict:
    if cfg.eps is None:
        raise ValueError("--eps start:stop:geometric:count is required")
    snap = EpsSchedule.parse(cfg.eps).snap(float(u.spacing.max()))
    if len(snap["eps"]) < 2:
        raise ValueError(f"eps schedule collapses to {len(snap['eps'])} value after snapping "
                         f"to the grid spacing {snap['spacing']:g}")
    return snap


def _params(cfg: ExperimentConfig) -> EnergyParams:
    if cfg.p is None:
        raise ValueError("--p is required")
    return EnergyParams(cfg.theta1, cfg.theta2, cfg.p)


def _report(cfg: ExperimentConfig, payload: dict) -> str:
    text = json.dumps({"config": asdict(cfg), **payload}, indent=2, sort_keys=True) + "\n"
    if cfg.out:
        atomic_write(cfg.out, text)
    return text


def _checked(values) -> None:
    for v in values:
        if v is not None and isinstance(v, float) and math.isnan(v):
            raise NumericalFailure("energy evaluation produced NaN")


def cmd_energy(cfg: ExperimentConfig) -> int:
    u = _field(cfg)
    snap = _schedule(cfg, u)
    rep = energy_sweep(u, _params(cfg), snap["eps"], Kernel(cfg.kernel))
    _checked(rep.values)
    rep.meta["eps_snap"] = snap
    text = _report(cfg, {"energy": rep.to_dict()})
    if cfg.out:
        atomic_write(Path(cfg.out).with_suffix(".csv"), rep.to_csv())
    else:
        sys.stdout.write(text)
    return 0


def cmd_pstar(cfg: ExperimentConfig) -> int:
    u = _field(cfg)
    snap = _schedule(cfg, u)
    theta = cfg.theta1 + cfg.theta2
    probes = cfg.probes or sorted({theta, 2.0, 1 + theta})
    est = critical_exponent_estimate(u, cfg.theta1, cfg.theta2, snap["eps"], probes,
                                     Kernel(cfg.kernel))
    text = _report(cfg, {"eps_snap": snap, "p_star": est.to_dict()})
    if not cfg.out:
        sys.stdout.write(text)
    return 0


def cmd_defect(cfg: ExperimentConfig) -> int:
    u = _field(cfg)
    pairings = {}
    for cx, cy, rad in cfg.bumps:
        name = f"bump({cx:g},{cy:g},{rad:g})"
        phi = sample(u.domain, u.resolution, gallery.bump((cx, cy), rad))
        pairings[name] = defect_pairing(u, phi, cfg.r, name).to_dict()
    payload = {"total_variation": defect_total_variation(u, cfg.r), "pairings": pairings}
    text = _report(cfg, {"defect": payload})
    if not cfg.out:
        sys.stdout.write(text)
    return 0


def cmd_decompose(cfg: ExperimentConfig) -> int:
    u = _field(cfg)
    snap = _schedule(cfg, u)
    rep = distance_report(u, EnergyParams(cfg.theta1, cfg.theta2, 1.0), snap["eps"],
                          Kernel(cfg.kernel))
    text = _report(cfg, {"eps_snap": snap, "decompose": rep})
    if not cfg.out:
        sys.stdout.write(text)
    return 0


def cmd_verify(exp_id: str, out: str | None) -> int:
    ids = [k for k in experiments.EXPERIMENTS if k != "determinism"] if exp_id == "all" else [exp_id]
    if exp_id != "all" and exp_id not in experiments.EXPERIMENTS:
        raise ValueError(f"unknown experiment {exp_id!r}; choose from all, "
                         + ", ".join(experiments.EXPERIMENTS))
    results, digests = [], {}
    for k in ids:
        res = experiments.run(k)
        digests[k] = experiments.digest(res)
        results.append(res)
        print(res.line(), flush=True)
    if exp_id == "all":
        res = experiments.determinism(digests)
        results.append(res)
        print(res.line(), flush=True)
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        for res in results:
            atomic_write(Path(out) / f"{res.id}.json", res.to_json())
    return 0 if all(r.passed for r in results) else 2


def cmd_gallery(action: str, entry_id: str | None, grid: int | None, out: str | None) -> int:
    if action == "list":
        for name in sorted(gallery.REGISTRY):
            entry = gallery.get(name)
            facts = ", ".join(f"{f.id}[{f.provenance}]" for f in entry.known_facts)
            print(f"{name}: {facts}")
        return 0
    if entry_id is None:
        raise ValueError("gallery render needs an entry id")
    if grid is None or grid < 2:
        raise ValueError("--grid N (N >= 2) is required")
    u = gallery.get(entry_id).render(grid)
    if out is None:
        raise ValueError("--out PATH is required for render (.csv or binary)")
    save_grid(u, out)
    return 0


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sepergy", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def field_args(p, eps=True, energy=True):
        src = p.add_argument_group("field")
        src.add_argument("--gallery", help="gallery entry id")
        src.add_argument("--input", help="binary grid file")
        src.add_argument("--grid", type=int, help="cells per axis when rendering a gallery entry")
        p.add_argument("--theta1", type=float, default=0.5)
        p.add_argument("--theta2", type=float, default=0.5)
        if energy:
            p.add_argument("--p", type=float)
        if eps:
            p.add_argument("--eps", help="start:stop:geometric:count")
            p.add_argument("--kernel", default="annulus", choices=["annulus", "plateau", "cone"])
        p.add_argument("--out", help="report path (written atomically)")

    field_args(sub.add_parser("energy", help="energy sweep over an eps schedule"))
    pp = sub.add_parser("pstar", help="critical exponent estimate")
    field_args(pp, energy=False)
    pp.add_argument("--probes", type=float, nargs="+", default=[])
    pd = sub.add_parser("defect", help="defect total variation and bump pairings")
    field_args(pd, eps=False, energy=False)
    pd.add_argument("--r", type=float, help="difference step (grid multiple)")
    pd.add_argument("--bump", type=float, nargs=3, action="append", default=[],
                    metavar=("CX", "CY", "RADIUS"))
    field_args(sub.add_parser("decompose", help="separable split and distance report"),
               energy=False)
    pv = sub.add_parser("verify", help="run acceptance experiments")
    pv.add_argument("id", help="experiment id or 'all'")
    pv.add_argument("--out", help="directory for per-experiment JSON reports")
    pg = sub.add_parser("gallery", help="list or render gallery entries")
    pg.add_argument("action", choices=["list", "render"])
    pg.add_argument("id", nargs="?")
    pg.add_argument("--grid", type=int)
    pg.add_argument("--out")
    return ap


def _threads():
    raw = os.environ.get("SEPERGY_THREADS")
    if raw is None:
        return nullcontext()
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise ValueError(f"SEPERGY_THREADS must be a positive integer, got {raw!r}")
    return threadpool_limits(limits=n)


def _dispatch(args) -> int:
    if args.command == "verify":
        return cmd_verify(args.id, args.out)
    if args.command == "gallery":
        return cmd_gallery(args.action, args.id, args.grid, args.out)
    cfg = ExperimentConfig(
        command=args.command, gallery=args.gallery, input=args.input, grid=args.grid,
        theta1=args.theta1, theta2=args.theta2, p=getattr(args, "p", None),
        eps=getattr(args, "eps", None), kernel=getattr(args, "kernel", "annulus"),
        probes=getattr(args, "probes", []), r=getattr(args, "r", None),
        bumps=getattr(args, "bump", []), out=args.out)
    return {"energy": cmd_energy, "pstar": cmd_pstar, "defect": cmd_defect,
            "decompose": cmd_decompose}[args.command](cfg)


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        with _threads():
            return _dispatch(args)
    except (ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}".replace("\n", " "), file=sys.stderr)
        return 1
    except (NumericalFailure, FloatingPointError, ArithmeticError) as exc:
        print(f"error: numerical failure: {exc}".replace("\n", " "), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
