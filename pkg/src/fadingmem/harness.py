"""Reproducible experiment harness.

Parses declarative TOML configs, fans sweep cells out over a thread pool
(each cell owns its RNG stream, so scheduling never affects results), and
writes versioned CSV artifacts that downstream figure tooling consumes.
"""
from __future__ import annotations

import csv
import logging
try:
    import tomllib
except ImportError:
    import tomli as tomllib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import estimators, fluid, theory
from .params import LINEAR, ScaledInstance, WeightFn
from .sim import LifespanDist, conditional_update_snapshot, sample_path, simulate

log = logging.getLogger(__name__)

KINDS = (
    "steady_sweep",
    "trajectories",
    "lifespan_study",
    "eta_study",
    "deficient_snapshot",
    "theory_table",
    "acceptance",
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """One declarative experiment: an instance, run lengths, and sweep grids."""

    kind: str
    instance: ScaledInstance
    horizon: float
    burn_in: float | None
    n_batches: int
    seeds: tuple
    beta_grid: tuple = ()
    m_grid: tuple = ()
    eta_grid: tuple = ()
    lifespans: tuple = ()       # of ("exponential"|"constant"|"pareto") names
    t_max: float = 10.0
    t_points: int = 201
    n_samples: int = 2000
    grid_points: int = 21
    extra: dict = field(default_factory=dict)


def _weight_from_keys(tab: dict) -> WeightFn:
    rule = tab.get("weight_rule", "linear")
    if rule == "linear":
        return LINEAR
    if rule == "poly":
        return WeightFn("poly", eta=float(tab.get("eta", 1.0)))
    if rule == "exp":
        return WeightFn("exp", c=float(tab.get("c", 1.0)))
    raise ConfigError(f"unknown weight_rule {rule!r}")


def _instance_from_table(tab: dict) -> ScaledInstance:
    try:
        K = int(tab["K"])
        lam = tuple(float(x) for x in tab["lambda"])
        alpha0 = float(tab["alpha0"])
        m = int(tab["m"])
    except KeyError as exc:
        raise ConfigError(f"missing instance key {exc}") from exc
    mu0 = tab.get("mu0")
    if mu0 is not None:
        mu0 = tuple(float(x) for x in mu0)
    beta = float(tab.get("beta", 1.0))
    try:
        return ScaledInstance(
            K=K, lam=lam, alpha0=alpha0, m=m, mu0=mu0, beta=beta,
            weight=_weight_from_keys(tab),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    """Parse and validate a TOML experiment description."""
    try:
        with open(path, "rb") as f:
            doc = tomllib.load(f)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
    if "instance" not in doc:
        raise ConfigError("config needs an [instance] table")
    inst = _instance_from_table(doc["instance"])
    run = doc.get("run", {})
    horizon = float(run.get("horizon", 1e5))
    burn_in = run.get("burn_in")
    if burn_in is not None:
        burn_in = float(burn_in)
        if burn_in >= horizon:
            raise ConfigError("burn_in must be smaller than horizon")
    seeds = tuple(int(s) for s in run.get("seeds", [1]))
    if len(set(seeds)) != len(seeds) or not seeds:
        raise ConfigError("seeds must be a non-empty list of distinct integers")
    sweep = doc.get("sweep", {})
    lifespans = tuple(sweep.get("lifespan", ()))
    for name in lifespans:
        if name not in ("exponential", "constant", "pareto"):
            raise ConfigError(f"unknown lifespan {name!r}")
    return ExperimentConfig(
        kind=kind,
        instance=inst,
        horizon=horizon,
        burn_in=burn_in,
        n_batches=int(run.get("n_batches", 32)),
        seeds=seeds,
        beta_grid=tuple(float(b) for b in sweep.get("beta", ())),
        m_grid=tuple(int(m) for m in sweep.get("m", ())),
        eta_grid=tuple(float(e) for e in sweep.get("eta", ())),
        lifespans=lifespans,
        t_max=float(run.get("t_max", 10.0)),
        t_points=int(run.get("t_points", 201)),
        n_samples=int(run.get("n_samples", 2000)),
        grid_points=int(run.get("grid_points", 21)),
        extra={k: v for k, v in doc.items() if k not in ("kind", "instance", "run", "sweep")},
    )


def _write_csv(path: Path, schema: str, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(f"# schema={schema}\n")
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)
    return path


TRACE_HEADER = [
    "run_id", "seed", "m", "beta", "alpha0", "k",
    "choice_frac", "choice_se", "qbar", "qbar_se",
    "horizon", "burn_in", "events",
]
THEORY_COLS = ["c_abundant", "c_deficient", "q_abundant", "q_deficient"]


def trace_rows(run_id, seed, inst: ScaledInstance, est, trace):
    for k in range(inst.K):
        yield [
            run_id, seed, inst.m, inst.beta, inst.alpha0, k + 1,
            repr(float(est.choice_frac[k])), repr(float(est.choice_se[k])),
            repr(float(est.qbar_scaled[k])), repr(float(est.qbar_se[k])),
            trace.horizon, trace.burn_in, trace.events,
        ]


def _theory_overlays(inst: ScaledInstance):
    lam = np.asarray(inst.lam)
    ca = theory.limit_choice_probs(lam, inst.alpha0, theory.Regime.ABUNDANT)
    cd = theory.limit_choice_probs(lam, inst.alpha0, theory.Regime.DEFICIENT)
    qa = theory.limit_rewards(lam, inst.alpha0, theory.Regime.ABUNDANT)
    qd = theory.limit_rewards(lam, inst.alpha0, theory.Regime.DEFICIENT)
    return ca, cd, qa, qd


def _run_cells(cells, worker, threads: int):
    """Run cells through a pool, keeping input order and isolating failures."""
    results = [None] * len(cells)
    errors = []

    def guarded(i):
        try:
            results[i] = worker(cells[i])
        except Exception as exc:  # crash isolation: one bad cell must not kill the sweep
            log.error("cell %d failed: %s", i, exc)
            errors.append((i, str(exc)))

    if threads <= 1:
        for i in range(len(cells)):
            guarded(i)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(guarded, range(len(cells))))
    return results, errors


def run_steady_sweep(
    cfg: ExperimentConfig, out_dir, threads: int = 1, seed_offset: int = 0,
    name: str = "sweep.csv",
) -> Path:
    """One simulate+estimate per (beta, seed) cell, with theory overlay columns."""
    betas = cfg.beta_grid or (cfg.instance.beta,)
    cells = [
        (ci, beta, seed + seed_offset)
        for ci, (beta, seed) in enumerate(
            (b, s) for b in betas for s in cfg.seeds
        )
    ]

    def worker(cell):
        ci, beta, seed = cell
        inst = ScaledInstance(
            K=cfg.instance.K, lam=cfg.instance.lam, alpha0=cfg.instance.alpha0,
            m=cfg.instance.m, mu0=cfg.instance.mu0, beta=beta,
            weight=cfg.instance.weight,
        )
        trace = simulate(
            inst.materialize(), cfg.horizon, seed, run_id=ci,
            burn_in=cfg.burn_in, n_batches=cfg.n_batches,
        )
        return ci, inst, seed, estimators.estimate(trace, inst.m), trace

    results, errors = _run_cells(cells, worker, threads)
    rows = []
    for res in results:
        if res is None:
            continue
        ci, inst, seed, est, trace = res
        ca, cd, qa, qd = _theory_overlays(inst)
        for k, row in enumerate(trace_rows(ci, seed, inst, est, trace)):
            rows.append(
                row
                + [repr(float(ca[k])), repr(float(cd[k])),
                   repr(float(qa[k])), repr(float(qd[k]))]
            )
    return _write_csv(
        Path(out_dir) / name, "sweep-v1", TRACE_HEADER + THEORY_COLS, rows
    )


def run_lifespan_study(
    cfg: ExperimentConfig, out_dir, threads: int = 1, seed_offset: int = 0
) -> Path:
    """Steady sweep repeated per lifespan law; adds a `lifespan` column."""
    lifespans = cfg.lifespans or ("exponential", "constant", "pareto")
    betas = cfg.beta_grid or (cfg.instance.beta,)
    m = cfg.instance.m
    dists = {
        "exponential": None,    # aggregate-rate engine
        "constant": LifespanDist.constant(float(m)),
        "pareto": LifespanDist.pareto(m / 2.0, 2.0),
    }
    cells = [
        (ci, life, beta, seed + seed_offset)
        for ci, (life, beta, seed) in enumerate(
            (l, b, s) for l in lifespans for b in betas for s in cfg.seeds
        )
    ]

    def worker(cell):
        ci, life, beta, seed = cell
        inst = ScaledInstance(
            K=cfg.instance.K, lam=cfg.instance.lam, alpha0=cfg.instance.alpha0,
            m=m, mu0=cfg.instance.mu0, beta=beta, weight=cfg.instance.weight,
        )
        trace = simulate(
            inst.materialize(), cfg.horizon, seed, run_id=ci,
            burn_in=cfg.burn_in, n_batches=cfg.n_batches, lifespan=dists[life],
        )
        return ci, life, inst, seed, estimators.estimate(trace, m), trace

    results, errors = _run_cells(cells, worker, threads)
    rows = []
    for res in results:
        if res is None:
            continue
        ci, life, inst, seed, est, trace = res
        ca, cd, qa, qd = _theory_overlays(inst)
        for k, row in enumerate(trace_rows(ci, seed, inst, est, trace)):
            rows.append(
                row
                + [repr(float(ca[k])), repr(float(cd[k])),
                   repr(float(qa[k])), repr(float(qd[k])), life]
            )
    return _write_csv(
        Path(out_dir) / "lifespan.csv", "lifespan-v1",
        TRACE_HEADER + THEORY_COLS + ["lifespan"], rows,
    )


def run_trajectories(
    cfg: ExperimentConfig, out_dir, threads: int = 1, seed_offset: int = 0
) -> Path:
    """Pair scaled stochastic paths Q(m t)/m with the fluid solution from 0."""
    t_grid = np.linspace(0.0, cfg.t_max, cfg.t_points)
    ms = cfg.m_grid or (cfg.instance.m,)
    lam = np.asarray(cfg.instance.lam)
    rows = []
    traj = fluid.integrate(
        np.zeros(cfg.instance.K), lam, cfg.instance.alpha0,
        T=cfg.t_max, weight=cfg.instance.weight,
    )
    fluid_on_grid = np.vstack(
        [traj.states[np.searchsorted(traj.times, t, side="right") - 1] for t in t_grid]
    )
    for t, q in zip(t_grid, fluid_on_grid):
        rows.append([0, 0, "fluid", repr(float(t)), *[repr(float(x)) for x in q]])

    cells = [
        (ci, m, seed + seed_offset)
        for ci, (m, seed) in enumerate((m, s) for m in ms for s in cfg.seeds)
    ]

    def worker(cell):
        ci, m, seed = cell
        inst = cfg.instance.with_m(m)
        path = sample_path(inst.materialize(), t_grid * m, seed, run_id=ci)
        return ci, m, seed, path / m

    results, errors = _run_cells(cells, worker, threads)
    for res in results:
        if res is None:
            continue
        ci, m, seed, scaled = res
        for t, q in zip(t_grid, scaled):
            rows.append([m, seed, "stochastic", repr(float(t)), *[repr(float(x)) for x in q]])
    header = ["m", "seed", "source", "t"] + [f"q_{k + 1}" for k in range(cfg.instance.K)]
    return _write_csv(Path(out_dir) / "trajectories.csv", "trajpair-v1", header, rows)


def run_eta_study(cfg: ExperimentConfig, out_dir, threads: int = 1, seed_offset: int = 0):
    """Invariant states across an exponent grid, plus the K=2 drift field.

    Writes eta.csv (states per exponent) always; for two-action instances
    also writes a drift vector field on a square grid (vfield.csv) and the
    invariant states of the super-linear example (states.csv).
    """
    lam = np.asarray(cfg.instance.lam)
    alpha0 = cfg.instance.alpha0
    etas = cfg.eta_grid or (0.5,)
    rows = []
    for eta in etas:
        if eta == 1.0:
            rep = theory.invariant_state_linear(lam, alpha0)
        elif eta < 1.0:
            rep = theory.invariant_state_poly(lam, alpha0, eta)
        elif cfg.instance.K == 2:
            rep = theory.invariant_states_eta_gt1_K2(lam[0], lam[1], eta, alpha0)
        else:
            log.warning("skipping eta=%g: multiple-state search needs K=2", eta)
            continue
        for si, (q, stab) in enumerate(rep.states):
            for k, v in enumerate(q):
                rows.append([repr(float(eta)), rep.case, si, stab.value, k + 1, repr(float(v))])
    paths = [
        _write_csv(
            Path(out_dir) / "eta.csv", "eta-v1",
            ["eta", "case", "state", "stability", "k", "q"], rows,
        )
    ]
    if cfg.instance.K == 2:
        eta_field = cfg.extra.get("field", {}).get("eta", 2.0)
        weight = WeightFn("poly", eta=float(eta_field))
        hi = float(cfg.extra.get("field", {}).get("q_max", 1.25 * lam[0]))
        axis = np.linspace(0.0, hi, cfg.grid_points)
        frows = []
        for q1 in axis:
            for q2 in axis:
                d = fluid.drift(np.array([q1, q2]), lam, alpha0, weight)
                frows.append(
                    [repr(float(q1)), repr(float(q2)), repr(float(d[0])), repr(float(d[1]))]
                )
        paths.append(
            _write_csv(
                Path(out_dir) / "vfield.csv", "vfield-v1",
                ["q1", "q2", "dq1", "dq2"], frows,
            )
        )
        rep = theory.invariant_states_eta_gt1_K2(lam[0], lam[1], float(eta_field), alpha0)
        srows = [
            [si, repr(float(q[0])), repr(float(q[1])), stab.value, repr(float(rep.residuals[si]))]
            for si, (q, stab) in enumerate(rep.states)
        ]
        paths.append(
            _write_csv(
                Path(out_dir) / "states.csv", "states-v1",
                ["state", "q1", "q2", "stability", "residual"], srows,
            )
        )
    return paths


def run_theory_table(cfg: ExperimentConfig, out_dir) -> Path:
    """Closed-form limits per action, both regimes (bar-chart source data)."""
    inst = cfg.instance
    ca, cd, qa, qd = _theory_overlays(inst)
    rows = [
        [k + 1, repr(float(np.asarray(inst.lam)[k])), repr(float(ca[k])),
         repr(float(cd[k])), repr(float(qa[k])), repr(float(qd[k]))]
        for k in range(inst.K)
    ]
    return _write_csv(
        Path(out_dir) / "theory.csv", "theory-v1",
        ["k", "lambda_k"] + THEORY_COLS, rows,
    )


def run_snapshot(cfg: ExperimentConfig, out_dir, seed_offset: int = 0) -> Path:
    """Embedded-chain conditional snapshot samples as a long-format CSV."""
    snap = conditional_update_snapshot(
        cfg.instance, cfg.seeds[0] + seed_offset, cfg.n_samples
    )
    rows = [
        [n, int(snap.choices[n]) + 1, *[repr(float(x)) for x in snap.scaled_Q[n]]]
        for n in range(len(snap.choices))
    ]
    header = ["n", "choice"] + [f"q_{k + 1}" for k in range(cfg.instance.K)]
    return _write_csv(Path(out_dir) / "snapshot.csv", "snapshot-v1", header, rows)
