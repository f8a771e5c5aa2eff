"""Config-driven runs, sweeps and reports.

A run writes a CSV trace: ``#``-prefixed header lines (format tag, status,
JSON config echo) followed by the columns in :data:`TRACE_COLUMNS`. Floats are
printed with 17 significant digits so traces round-trip exactly.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from . import algorithms as alg_mod
from .algorithms import ConfigurationError, Hyperparams, consensus_error, init_swarm
from .objectives import (
    NoiseModel,
    heterogeneity_constants,
    load_dataset_json,
    make_logistic_suite,
    make_quadratic_suite,
    smoothness_constant,
)
from .theory import TheoryConstants, max_step_size, theorem1_rhs
from .timemodel import CostModel, elapsed
from .topology import build_mixing

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
TRACE_FORMAT = "oldsgd-trace v1"
TRACE_COLUMNS = ("iteration", "simulated_time", "loss", "grad_norm2", "consensus_error", "diverged")
DEFAULT_TAU_GRID = (1, 3, 5, 10, 15, 20, 30, 40)
WORKERS_ENV = "OLDSGD_WORKERS"

STATUS_EXIT_CODES = {"converged": 0, "budget-exhausted": 3, "diverged": 4}


class ReportError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class TopologySpec:
    kind: str = "ring"
    n: int = 8
    weights: str = "metropolis"


@dataclass(frozen=True)
class ObjectiveSpec:
    kind: str = "quadratic"
    d: int = 50
    seed: int = 0
    # quadratic
    zeta2: float = 0.0
    eig_min: float = 0.5
    eig_max: float = 1.0
    bbar_norm: float = 1.0
    # logistic
    samples_per_agent: int = 200
    mu: float = 1e-3
    batch_size: int = 32
    cluster_spread: float = 1.0
    dataset: str | None = None


@dataclass(frozen=True)
class InitSpec:
    kind: str = "zeros"  # zeros | random
    scale: float = 1.0
    seed: int = 0


def _build(cls, doc: dict | None):
    doc = dict(doc or {})
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(doc) - names
    if unknown:
        raise ConfigurationError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    return cls(**doc)


@dataclass(frozen=True)
class RunConfig:
    algorithm: str = "oldsgd"
    topology: TopologySpec = field(default_factory=TopologySpec)
    objective: ObjectiveSpec = field(default_factory=ObjectiveSpec)
    noise: NoiseModel = field(default_factory=NoiseModel)
    hp: Hyperparams = field(default_factory=lambda: Hyperparams(alpha=0.01, tau=5, T=20000))
    c: float = 1
    init: InitSpec = field(default_factory=InitSpec)
    cadence: int = 1
    target_loss: float | None = None
    grad_tol: float | None = None
    stop_at_target: bool = False
    alpha_rule: str = "fixed"
    label: str = ""
    output: str | None = None
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.algorithm not in alg_mod.ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {self.algorithm!r}")
        if self.cadence < 1:
            raise ConfigurationError("cadence must be >= 1")
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigurationError(f"unsupported schema_version {self.schema_version}")
        if self.alpha_rule not in ("fixed", "theory"):
            raise ConfigurationError(f"alpha_rule must be 'fixed' or 'theory', got {self.alpha_rule!r}")

    @property
    def cost(self) -> CostModel:
        return CostModel(self.c, self.topology.n)

    def replace(self, **changes) -> "RunConfig":
        hp_changes = {k: changes.pop(k) for k in list(changes) if k in ("alpha", "tau", "T", "seed")}
        cfg = dataclasses.replace(self, **changes)
        if hp_changes:
            cfg = dataclasses.replace(cfg, hp=dataclasses.replace(cfg.hp, **hp_changes))
        return cfg

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["noise"] = self.noise.to_dict()
        c = self.c
        d["c"] = c if isinstance(c, (int, float)) else float(c)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        doc = dict(doc)
        version = doc.pop("schema_version", SCHEMA_VERSION)
        hp_doc = dict(doc.pop("hp", {}))
        alpha = hp_doc.get("alpha", 0.01)
        alpha_rule = doc.pop("alpha_rule", "fixed")
        if alpha == "theory":
            alpha_rule = "theory"
            hp_doc["alpha"] = 0.01
        kwargs = dict(
            topology=_build(TopologySpec, doc.pop("topology", None)),
            objective=_build(ObjectiveSpec, doc.pop("objective", None)),
            noise=_build(NoiseModel, doc.pop("noise", None)),
            hp=_build(Hyperparams, {"alpha": 0.01, "tau": 5, "T": 20000, **hp_doc}),
            init=_build(InitSpec, doc.pop("init", None)),
            schema_version=version,
            alpha_rule=alpha_rule,
        )
        unknown = set(doc) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigurationError(f"unknown config fields: {sorted(unknown)}")
        cfg = cls(**doc, **kwargs)
        return resolve_alpha(cfg) if alpha_rule == "theory" else cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# --------------------------------------------------------------------------
# problem assembly


@dataclass
class Problem:
    suite: object
    noise: NoiseModel
    mixing: object
    x0: np.ndarray
    hp: Hyperparams
    cost: CostModel


def build_suite(cfg: RunConfig):
    o, n = cfg.objective, cfg.topology.n
    if o.kind == "quadratic":
        return make_quadratic_suite(n, o.d, o.zeta2, o.eig_min, o.eig_max, o.bbar_norm, o.seed)
    if o.kind == "logistic":
        if o.dataset:
            suite = load_dataset_json(o.dataset)
            if suite.n != n:
                raise ConfigurationError(f"dataset has {suite.n} agents, topology has {n}")
            return suite
        return make_logistic_suite(n, o.d, o.samples_per_agent, o.mu, o.batch_size,
                                   o.cluster_spread, o.seed)
    raise ConfigurationError(f"unknown objective kind {o.kind!r}")


def build_problem(cfg: RunConfig) -> Problem:
    suite = build_suite(cfg)
    mixing = build_mixing(cfg.topology.kind, cfg.topology.n, cfg.topology.weights)
    if cfg.init.kind == "zeros":
        x0 = np.zeros((suite.n, suite.d))
    elif cfg.init.kind == "random":
        rng = np.random.default_rng(cfg.init.seed)
        x0 = cfg.init.scale * rng.standard_normal((suite.n, suite.d))
    else:
        raise ConfigurationError(f"unknown init kind {cfg.init.kind!r}")
    return Problem(suite, cfg.noise, mixing, x0, cfg.hp, cfg.cost)


def theory_constants(cfg: RunConfig, problem: Problem | None = None) -> TheoryConstants:
    """Analytic constants of the configured instance.

    The loss at the initial average model plays the role of ``f0``.
    """
    problem = problem or build_problem(cfg)
    suite = problem.suite
    het = heterogeneity_constants(suite)
    fstar = getattr(suite, "fstar", math.nan)
    return TheoryConstants(
        L=smoothness_constant(suite),
        sigma2=problem.noise.sigma2,
        M=problem.noise.M,
        zeta2=het.zeta2,
        P=het.P,
        p=problem.mixing.p,
        tau=cfg.hp.tau,
        n=suite.n,
        f0=suite.global_loss(problem.x0.mean(axis=0)),
        fstar=fstar,
    )


def resolve_alpha(cfg: RunConfig) -> RunConfig:
    """Set ``alpha`` to the largest step size the convergence theorem allows."""
    alpha = max_step_size(theory_constants(cfg))
    return dataclasses.replace(cfg, hp=dataclasses.replace(cfg.hp, alpha=alpha), alpha_rule="theory")


# --------------------------------------------------------------------------
# traces


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


@dataclass
class RunTrace:
    config: RunConfig
    rows: list[tuple]
    status: str = "budget-exhausted"
    error: str | None = None

    @property
    def columns(self) -> dict[str, np.ndarray]:
        arr = np.array(self.rows, dtype=float).reshape(-1, len(TRACE_COLUMNS))
        return {name: arr[:, k] for k, name in enumerate(TRACE_COLUMNS)}

    @property
    def diverged(self) -> bool:
        return self.status == "diverged"

    def final(self, column: str) -> float:
        return float(self.rows[-1][TRACE_COLUMNS.index(column)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {TRACE_FORMAT}\n")
        buf.write(f"# status: {self.status}\n")
        if self.error:
            buf.write(f"# error: {self.error}\n")
        buf.write(f"# seed: {self.config.hp.seed}\n")
        buf.write(f"# config: {self.config.to_json()}\n")
        buf.write(",".join(TRACE_COLUMNS) + "\n")
        for row in self.rows:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        return buf.getvalue()

    def write(self, path) -> Path:
        return atomic_write(path, self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "RunTrace":
        header, body = {}, []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(": ")
                header[key] = value
            elif line.strip():
                body.append(line)
        if TRACE_FORMAT not in header:
            raise ValueError("not a trace file")
        reader = csv.reader(body)
        names = tuple(next(reader))
        if names != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace columns {names}")
        rows = [(int(r[0]), float(r[1]), float(r[2]), float(r[3]), float(r[4]), int(r[5])) for r in reader]
        cfg = RunConfig.from_dict(json.loads(header["config"]))
        return cls(cfg, rows, header.get("status", "budget-exhausted"), header.get("error"))

    @classmethod
    def read(cls, path) -> "RunTrace":
        return cls.from_csv(Path(path).read_text())


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"could not write {path}: {exc}") from exc
    return path


# --------------------------------------------------------------------------
# running


def _metrics(suite, swarm):
    xbar = swarm.xbar
    with np.errstate(all="ignore"):
        try:
            loss = suite.global_loss(xbar)
            g = suite.global_gradient(xbar)
            gn2 = float(g @ g)
        except (ValueError, FloatingPointError):
            loss = gn2 = math.nan
        ce = consensus_error(swarm)
    return loss, gn2, ce


def simulate(cfg: RunConfig, problem: Problem | None = None) -> RunTrace:
    """Run one configuration in memory, without writing anything."""
    problem = problem or build_problem(cfg)
    suite, cost, hp = problem.suite, problem.cost, cfg.hp
    swarm = init_swarm(cfg.algorithm, problem.x0, problem.mixing, suite, problem.noise, hp)

    def row(t):
        loss, gn2, ce = _metrics(suite, swarm)
        return (t, float(elapsed(cfg.algorithm, hp.tau, cost, t)), loss, gn2, ce, int(swarm.diverged))

    rows = [row(0)]
    reached = cfg.target_loss is not None and rows[0][2] <= cfg.target_loss
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(1, 0 if reached and cfg.stop_at_target else hp.T + 1):
            alg_mod.step(cfg.algorithm, swarm, suite, problem.noise, hp)
            if swarm.diverged or t % cfg.cadence == 0 or t == hp.T:
                rows.append(row(t))
                if cfg.target_loss is not None and rows[-1][2] <= cfg.target_loss:
                    reached = True
            if swarm.diverged or (reached and cfg.stop_at_target):
                break

    if swarm.diverged:
        status = "diverged"
    elif reached or (cfg.grad_tol is not None and rows[-1][3] <= cfg.grad_tol):
        status = "converged"
    else:
        status = "budget-exhausted"
    return RunTrace(cfg, rows, status)


def run(cfg: RunConfig, output=None) -> RunTrace:
    """Simulate and, if an output path is configured, write the trace atomically."""
    trace = simulate(cfg)
    path = output or cfg.output
    if path:
        trace.write(path)
    return trace


def retime(trace: RunTrace, c) -> RunTrace:
    """Same trajectory under a different communication cost."""
    cfg = dataclasses.replace(trace.config, c=c)
    cost = cfg.cost
    rows = [(r[0], float(elapsed(cfg.algorithm, cfg.hp.tau, cost, r[0])), *r[2:]) for r in trace.rows]
    return RunTrace(cfg, rows, trace.status, trace.error)


# --------------------------------------------------------------------------
# sweeps


def _run_point(cfg: RunConfig) -> RunTrace:
    try:
        return simulate(cfg)
    except Exception as exc:  # recorded per point, the sweep goes on
        log.warning("sweep point failed: %s", exc)
        return RunTrace(cfg, [], "error", f"{type(exc).__name__}: {exc}")


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigurationError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def sweep(base: RunConfig, grid: dict, workers: int | None = None) -> list[RunTrace]:
    """One trace per point of ``algorithm x tau x c x seed``, in grid order.

    The communication cost only changes the clock, so each
    ``(algorithm, tau, seed)`` trajectory is simulated once and re-timed for
    every ``c``.
    """
    algorithms = list(grid.get("algorithm", [base.algorithm]))
    taus = list(grid.get("tau", DEFAULT_TAU_GRID))
    cs = list(grid.get("c", [base.c]))
    seeds = list(grid.get("seed", [base.hp.seed]))
    if not algorithms or not taus or not cs or not seeds:
        raise ConfigurationError("every sweep axis needs at least one value")
    for a in algorithms:
        if a not in alg_mod.ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {a!r}")

    keys = list(product(algorithms, taus, seeds))
    configs = []
    for a, tau, seed in keys:
        cfg = base.replace(algorithm=a, tau=tau, seed=seed, c=cs[0], output=None)
        if base.alpha_rule == "theory":
            cfg = resolve_alpha(cfg)
        configs.append(cfg)

    workers = worker_count() if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_point, configs))
    else:
        results = [_run_point(cfg) for cfg in configs]
    by_key = dict(zip(keys, results))

    out = []
    for a, tau, c, seed in product(algorithms, taus, cs, seeds):
        tr = by_key[(a, tau, seed)]
        if tr.status == "error":
            out.append(RunTrace(dataclasses.replace(tr.config, c=c), [], "error", tr.error))
        else:
            out.append(retime(tr, c))
    return out


# --------------------------------------------------------------------------
# reports


def time_to_target(trace: RunTrace, target_loss: float):
    """Simulated time of the first row whose loss is at or below the target."""
    if not math.isfinite(target_loss):
        raise ValueError("target must be finite")
    for r in trace.rows:
        if r[2] <= target_loss:
            return r[1]
    return None


def geometric_mean(values) -> float:
    values = list(values)
    if not values:
        raise ValueError("geometric mean of nothing")
    return math.exp(sum(math.log(v) for v in values) / len(values))


@dataclass
class SpeedupReport:
    target_loss: float
    reference: str
    entries: list[dict]
    geomean: dict[str, float]
    warnings: list[str] = field(default_factory=list)

    def speedup(self, algorithm: str, c, label: str = "") -> float | None:
        for e in self.entries:
            if e["algorithm"] == algorithm and e["c"] == c and e["label"] == label:
                return e["speedup"]
        raise KeyError((algorithm, c, label))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# target_loss: {_fmt(self.target_loss)}\n")
        buf.write(f"# reference: {self.reference}\n")
        for w in self.warnings:
            buf.write(f"# warning: {w}\n")
        buf.write("label,algorithm,c,best_tau,time_to_target,speedup\n")
        for e in self.entries:
            cells = [e["label"], e["algorithm"], _fmt(e["c"]),
                     "" if e["best_tau"] is None else str(e["best_tau"]),
                     "" if e["time"] is None else _fmt(e["time"]),
                     "unreachable" if e["speedup"] is None else _fmt(e["speedup"])]
            buf.write(",".join(cells) + "\n")
        for a, g in self.geomean.items():
            buf.write(f"geomean,{a},,,,{_fmt(g)}\n")
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)


def speedup_report(traces, target_loss: float, reference: str = "oldsgd") -> SpeedupReport:
    """Time-to-target of each algorithm at its best ``tau``, relative to ``reference``.

    Traces are grouped into settings by ``(label, c)``. Within a setting the
    time for one ``tau`` is the mean over seeds; a ``tau`` where any seed misses
    the target is unreachable. The speedup is ``best_time(alg) / best_time(ref)``;
    the geometric mean runs over settings where the algorithm reached the target.
    """
    groups: dict = {}
    for tr in traces:
        if tr.status == "error":
            continue
        cfg = tr.config
        key = (cfg.label, cfg.c, cfg.algorithm, cfg.hp.tau)
        groups.setdefault(key, []).append(time_to_target(tr, target_loss))

    settings = sorted({(k[0], k[1]) for k in groups}, key=lambda s: (s[0], float(s[1])))
    algorithms = sorted({k[2] for k in groups}, key=lambda a: (a != reference, a))
    if reference not in algorithms:
        raise ReportError(f"no {reference} traces to normalize against")

    def best(label, c, a):
        cands = []
        for (lb, cc, aa, tau), times in groups.items():
            if (lb, cc, aa) == (label, c, a) and all(t is not None for t in times):
                cands.append((float(np.mean(times)), tau))
        return min(cands) if cands else (None, None)

    entries, warnings, per_alg = [], [], {}
    for label, c in settings:
        ref_time, _ = best(label, c, reference)
        if ref_time is None:
            raise ReportError(f"{reference} never reaches target {target_loss} (label={label!r}, c={c})")
        for a in algorithms:
            t, tau = best(label, c, a)
            if t is None and not any(k[:3] == (label, c, a) for k in groups):
                continue
            speed = None if t is None else t / ref_time
            if speed is None:
                warnings.append(f"{a} unreachable at label={label!r} c={c}; excluded from geomean")
            else:
                per_alg.setdefault(a, []).append(speed)
            entries.append({"label": label, "algorithm": a, "c": c, "best_tau": tau,
                            "time": t, "speedup": speed})
    for w in warnings:
        log.warning(w)
    geo = {a: geometric_mean(v) for a, v in per_alg.items()}
    return SpeedupReport(target_loss, reference, entries, geo, warnings)


def scalability_report(base: RunConfig, n_list, target_loss: float, seeds=None) -> list[dict]:
    """Time-to-target versus agent count on the ring, normalized to ``n = 1``.

    A single agent is always included as the baseline. Times are averaged
    over ``seeds``.
    """
    if base.objective.kind == "quadratic" and base.objective.zeta2 != 0:
        raise ConfigurationError("scalability runs need a homogeneous objective (zeta2 = 0)")
    seeds = list(seeds) if seeds is not None else [base.hp.seed]
    ns = sorted(set(n_list) | {1})
    times = {}
    for n in ns:
        topo = dataclasses.replace(base.topology, kind="ring", n=n)
        ts = []
        for s in seeds:
            cfg = base.replace(topology=topo, seed=s, target_loss=target_loss,
                               stop_at_target=True, output=None)
            ts.append(time_to_target(simulate(cfg), target_loss))
        times[n] = None if any(t is None for t in ts) else float(np.mean(ts))
    if times[1] is None:
        raise ReportError("the single-agent baseline never reaches the target")
    return [{"n": n, "time_to_target": times[n],
             "speedup": None if times[n] is None else times[1] / times[n]} for n in ns]


# --------------------------------------------------------------------------
# checks


def verify_bound(cfg: RunConfig, seeds: int = 20) -> dict:
    """Seed-averaged ``(1/T) sum_t ||grad f(xbar^t)||^2`` against the theorem's bound."""
    cfg = cfg.replace(cadence=1, target_loss=None, stop_at_target=False, output=None)
    T = cfg.hp.T
    lhs_runs = []
    for s in range(seeds):
        tr = simulate(cfg.replace(seed=cfg.hp.seed + s))
        if tr.diverged:
            raise ReportError(f"seed {cfg.hp.seed + s} diverged")
        g = tr.columns["grad_norm2"][:T]
        lhs_runs.append(float(np.mean(g)))
    tc = theory_constants(cfg)
    lhs = float(np.mean(lhs_runs))
    rhs = theorem1_rhs(tc, cfg.hp.alpha, T)
    return {"lhs": lhs, "rhs": rhs, "slack_ratio": rhs / lhs if lhs > 0 else math.inf,
            "alpha": cfg.hp.alpha, "T": T, "seeds": seeds, "holds": lhs <= rhs}


def average_update_deviation(cfg: RunConfig, problem: Problem | None = None) -> float:
    """Largest per-step relative gap between ``xbar^t`` and the SGD-like recursion."""
    problem = problem or build_problem(cfg)
    if cfg.algorithm not in ("oldsgd", "ldsgd", "lsgd", "dsgd"):
        raise ConfigurationError("the average-update identity is stated for the SGD family")
    swarm = init_swarm(cfg.algorithm, problem.x0, problem.mixing, problem.suite, problem.noise, cfg.hp)
    worst = 0.0
    n = swarm.n
    for _ in range(cfg.hp.T):
        prev = swarm.xbar
        alg_mod.step(cfg.algorithm, swarm, problem.suite, problem.noise, cfg.hp)
        predicted = prev - cfg.hp.alpha / n * swarm.last_grads.sum(axis=0)
        xbar = swarm.xbar
        gap = np.linalg.norm(xbar - predicted) / max(1.0, float(np.linalg.norm(xbar)))
        worst = max(worst, float(gap))
    return worst


def gossip_contraction(cfg: RunConfig, rounds: int = 100) -> dict:
    """Zero-step-size OLDSGD: per-round consensus-error ratios against ``lambda2**2``."""
    cfg = cfg.replace(alpha=0.0, T=rounds * cfg.hp.tau)
    problem = build_problem(cfg)
    swarm = init_swarm("oldsgd", problem.x0, problem.mixing, problem.suite, problem.noise, cfg.hp)
    lam2 = problem.mixing.lambda2**2
    prev = consensus_error(swarm)
    worst_excess = -math.inf
    for _ in range(rounds):
        for _ in range(cfg.hp.tau):
            alg_mod.step_oldsgd(swarm, problem.suite, problem.noise, cfg.hp)
        cur = consensus_error(swarm)
        worst_excess = max(worst_excess, cur - lam2 * prev)
        prev = cur
    return {"lambda2_sq": lam2, "worst_excess": worst_excess, "holds": worst_excess <= 1e-9}


def trajectory_columns(trace: RunTrace) -> list[str]:
    """Trace rows minus the clock, formatted exactly as in the CSV."""
    return [",".join(_fmt(v) for i, v in enumerate(r) if i != 1) for r in trace.rows]


def verify_invariants(cfg: RunConfig) -> dict:
    out = {}
    sgd_cfg = cfg.replace(algorithm="oldsgd") if cfg.algorithm not in ("oldsgd", "ldsgd", "lsgd", "dsgd") else cfg
    dev = average_update_deviation(sgd_cfg)
    out["average_update"] = {"max_relative_deviation": dev, "holds": dev <= 1e-12}
    a = simulate(cfg.replace(algorithm="oldsgd", tau=1))
    b = simulate(cfg.replace(algorithm="dsgd", tau=1))
    out["oldsgd_tau1_equals_dsgd"] = {"holds": trajectory_columns(a) == trajectory_columns(b)}
    out["gossip_contraction"] = gossip_contraction(cfg.replace(init=InitSpec("random", 1.0, cfg.init.seed)),
                                                   rounds=min(100, max(1, cfg.hp.T // cfg.hp.tau)))
    out["all_hold"] = all(v["holds"] for v in out.values() if isinstance(v, dict))
    return out
