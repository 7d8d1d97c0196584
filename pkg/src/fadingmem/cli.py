"""Command-line entry point.

Subcommands cover single runs (simulate, fluid, invariant), the sweep-style
experiments behind the study figures (sweep, trajectories, lifespan, eta),
and the acceptance suite (accept).  Exit codes: 0 success, 1 acceptance
failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import sys
try:
    import tomllib
except ImportError:
    import tomli as tomllib
from pathlib import Path

import numpy as np

from . import estimators, fluid, harness, theory
from .harness import ConfigError, ExperimentConfig, load_config
from .sim import simulate

EXIT_OK = 0
EXIT_ACCEPT_FAIL = 1
EXIT_CONFIG = 2


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fadingmem",
        description="Simulator and limit toolkit for reinforcement with fading memories",
    )
    p.add_argument("--config", type=Path, help="TOML experiment config")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    p.add_argument("--seed-offset", type=int, default=0, help="added to every config seed")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", help="run one instance (or a snapshot study) and report estimates")
    f = sub.add_parser("fluid", help="integrate the fluid model, write a trajectory CSV")
    f.add_argument("--q0", type=float, nargs="+", help="initial state (default zeros)")
    f.add_argument("--T", type=float, default=30.0, help="integration horizon")
    f.add_argument("--dt", type=float, default=1e-3, help="integration step")
    inv = sub.add_parser("invariant", help="print invariant states and limits as JSON")
    inv.add_argument(
        "--regime", choices=["abundant", "deficient"], default="abundant",
        help="scaling regime for the limit formulas",
    )
    sub.add_parser("sweep", help="steady-state sweep over the beta grid")
    sub.add_parser("trajectories", help="paired stochastic and fluid paths")
    sub.add_parser("lifespan", help="steady-state sweep across lifespan laws")
    sub.add_parser("eta", help="invariant states across exponents; drift field for K=2")
    acc = sub.add_parser("accept", help="run the acceptance suite")
    acc.add_argument("--list", action="store_true", help="list criteria without running")
    acc.add_argument("--only", nargs="+", metavar="ID", help="run a subset of criteria")
    return p


def _need_config(args) -> ExperimentConfig:
    if args.config is None:
        raise ConfigError("this subcommand requires --config PATH")
    return load_config(args.config)


def _expect_kind(cfg: ExperimentConfig, *kinds):
    if cfg.kind not in kinds:
        raise ConfigError(
            f"config kind {cfg.kind!r} does not match this subcommand "
            f"(expected one of {kinds})"
        )


def _cmd_simulate(args) -> int:
    cfg = _need_config(args)
    _expect_kind(cfg, "steady_sweep", "deficient_snapshot")
    args.out.mkdir(parents=True, exist_ok=True)
    if cfg.kind == "deficient_snapshot":
        path = harness.run_snapshot(cfg, args.out, seed_offset=args.seed_offset)
        print(f"wrote {path}")
        return EXIT_OK
    inst = cfg.instance
    trace = simulate(
        inst.materialize(), cfg.horizon, cfg.seeds[0] + args.seed_offset,
        burn_in=cfg.burn_in, n_batches=cfg.n_batches,
    )
    est = estimators.estimate(trace, inst.m)
    rows = list(harness.trace_rows(0, cfg.seeds[0] + args.seed_offset, inst, est, trace))
    path = harness._write_csv(
        args.out / "trace.csv", "trace-v1", harness.TRACE_HEADER, rows
    )
    print(json.dumps({
        "choice_frac": [float(x) for x in est.choice_frac],
        "choice_se": [float(x) for x in est.choice_se],
        "qbar": [float(x) for x in est.qbar_scaled],
        "qbar_se": [float(x) for x in est.qbar_se],
        "events": trace.events,
        "csv": str(path),
    }, indent=2))
    return EXIT_OK


def _cmd_fluid(args) -> int:
    cfg = _need_config(args)
    inst = cfg.instance
    q0 = np.asarray(args.q0, dtype=float) if args.q0 else np.zeros(inst.K)
    if q0.shape != (inst.K,):
        raise ConfigError(f"--q0 needs {inst.K} values")
    traj = fluid.integrate(
        q0, np.asarray(inst.lam), inst.alpha0, T=args.T, dt=args.dt, weight=inst.weight
    )
    header = ["t"] + [f"q_{k + 1}" for k in range(inst.K)]
    rows = [[repr(float(v)) for v in row] for row in traj.to_csv_rows()]
    path = harness._write_csv(args.out / "fluid.csv", "trajectory-v1", header, rows)
    print(f"wrote {path} (final state {traj.final.tolist()})")
    return EXIT_OK


def _cmd_invariant(args) -> int:
    cfg = _need_config(args)
    inst = cfg.instance
    lam = np.asarray(inst.lam)
    regime = theory.Regime(args.regime)
    w = inst.weight
    if w.is_linear:
        rep = theory.invariant_state_linear(lam, inst.alpha0)
    elif w.kind == "poly" and w.eta < 1.0:
        rep = theory.invariant_state_poly(lam, inst.alpha0, w.eta)
    elif w.kind == "poly" and inst.K == 2:
        rep = theory.invariant_states_eta_gt1_K2(lam[0], lam[1], w.eta, inst.alpha0)
    else:
        raise ConfigError(
            "invariant states are available for linear weights, poly eta<1, "
            "or poly eta>1 with K=2"
        )
    c = theory.limit_choice_probs(lam, inst.alpha0, regime)
    q = theory.limit_rewards(lam, inst.alpha0, regime)
    print(json.dumps({
        "case": rep.case,
        "states": [
            {"q": [float(x) for x in qv], "stability": s.value,
             "residual": float(rep.residuals[i])}
            for i, (qv, s) in enumerate(rep.states)
        ],
        "c": [float(x) for x in c],
        "q_limit": [float(x) for x in q],
        "regime": regime.value,
    }, indent=2))
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _need_config(args)
    _expect_kind(cfg, "steady_sweep", "theory_table")
    if cfg.kind == "theory_table":
        path = harness.run_theory_table(cfg, args.out)
    else:
        path = harness.run_steady_sweep(
            cfg, args.out, threads=args.threads, seed_offset=args.seed_offset
        )
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_trajectories(args) -> int:
    cfg = _need_config(args)
    _expect_kind(cfg, "trajectories")
    path = harness.run_trajectories(
        cfg, args.out, threads=args.threads, seed_offset=args.seed_offset
    )
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_lifespan(args) -> int:
    cfg = _need_config(args)
    _expect_kind(cfg, "lifespan_study")
    path = harness.run_lifespan_study(
        cfg, args.out, threads=args.threads, seed_offset=args.seed_offset
    )
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_eta(args) -> int:
    cfg = _need_config(args)
    _expect_kind(cfg, "eta_study")
    paths = harness.run_eta_study(
        cfg, args.out, threads=args.threads, seed_offset=args.seed_offset
    )
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def _cmd_accept(args) -> int:
    from . import acceptance

    if args.list:
        for cid, fn in acceptance.CRITERIA.items():
            print(f"{cid}: {fn.__doc__.strip().splitlines()[0]}")
        return EXIT_OK
    cfg = {}
    if args.config is not None:
        try:
            with open(args.config, "rb") as f:
                doc = tomllib.load(f)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if doc.get("kind", "acceptance") != "acceptance":
            raise ConfigError("accept needs a config of kind 'acceptance'")
        cfg = doc

    def progress(res):
        print(f"{res.criterion_id}: {res.status.upper()} ({res.seconds:.1f}s)")

    results = acceptance.run_all(cfg, only=args.only, progress=progress)
    args.out.mkdir(parents=True, exist_ok=True)
    summary_path = args.out / "acceptance.json"
    summary_path.write_text(
        json.dumps([r.to_json() for r in results], indent=2) + "\n"
    )
    print(f"wrote {summary_path}")
    failed = [r.criterion_id for r in results if r.status != "pass"]
    if failed:
        print(f"FAILED: {', '.join(failed)}")
        return EXIT_ACCEPT_FAIL
    print(f"all {len(results)} criteria passed")
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fluid": _cmd_fluid,
    "invariant": _cmd_invariant,
    "sweep": _cmd_sweep,
    "trajectories": _cmd_trajectories,
    "lifespan": _cmd_lifespan,
    "eta": _cmd_eta,
    "accept": _cmd_accept,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
