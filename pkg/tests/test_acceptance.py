"""End-to-end acceptance checks, one test per criterion.

Each test asserts its numerical tolerance and its runtime budget. The
terminal summary prints one PASS/FAIL line per criterion.
"""

import json
import math
import time
from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from conftest import FIXTURES, ROOT
from oldsgd import harness
from oldsgd.harness import InitSpec, RunConfig, simulate, trajectory_columns
from oldsgd.objectives import (
    NoiseModel,
    QuadraticSuite,
    iteration_rng,
    make_logistic_suite,
    make_quadratic_suite,
)
from oldsgd.timemodel import COMPARED_ALGORITHMS, CostModel, build_timeline, round_runtime

INSTANCE = ROOT / "configs" / "heterogeneous_quadratic.json"
DEGRADATION = FIXTURES / "degradation_instance.json"
TAU_GRID = [1, 3, 5, 10, 15, 20, 30, 40]


def instance(**changes) -> RunConfig:
    return RunConfig.load(INSTANCE).replace(**changes)


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.1f}s, budget {self.seconds}s"


# --------------------------------------------------------------------------
# trace producers, re-run by the determinism check

_first_outputs: dict[str, dict[str, str]] = {}


def _remember(name, outputs):
    _first_outputs.setdefault(name, outputs)
    return outputs


def random_identity_configs(count=5, seed=2024):
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        n = int(rng.integers(2, 11))
        noise = (NoiseModel("additive", sigma=float(rng.uniform(0, 2))) if k % 2 == 0
                 else NoiseModel("multiplicative", m=float(rng.uniform(0, 0.5))))
        doc = {
            "objective": {"kind": "quadratic", "d": int(rng.integers(2, 20)),
                          "zeta2": float(rng.uniform(0, 3)), "seed": int(rng.integers(1000))},
            "noise": noise.to_dict(),
            "hp": {"alpha": float(rng.uniform(0.01, 0.1)), "tau": int(rng.integers(1, 8)),
                   "T": 300, "seed": int(rng.integers(1 << 30))},
            "c": float(rng.uniform(0.5, 6)),
        }
        out.append((n, RunConfig.from_dict(doc)))
    return out


def produce_identity_traces():
    outputs = {}
    for k, (n, cfg) in enumerate(random_identity_configs()):
        ring = harness.TopologySpec("ring", n)
        complete = harness.TopologySpec("complete", n, "uniform")
        runs = {
            "oldsgd": cfg.replace(algorithm="oldsgd", topology=ring, tau=1),
            "dsgd": cfg.replace(algorithm="dsgd", topology=ring, tau=1),
            "ldsgd": cfg.replace(algorithm="ldsgd", topology=complete),
            "lsgd": cfg.replace(algorithm="lsgd", topology=complete),
        }
        for alg, c in runs.items():
            outputs[f"identity{k}_{alg}.csv"] = simulate(c).to_csv()
    return _remember("identity", outputs)


def produce_convergence_traces():
    outputs = {f"convergence_{a}.csv": simulate(instance(algorithm=a)).to_csv()
               for a in ("oldsgd", "ldsgd")}
    return _remember("convergence", outputs)


def bound_check():
    return harness.verify_bound(instance(), seeds=20)


def produce_bound_result():
    return _remember("bound", {"bound.json": json.dumps(bound_check(), sort_keys=True)})


def speedup_target():
    return harness.build_suite(instance()).fstar + 0.01


def speedup_traces():
    target = speedup_target()
    base = instance(target_loss=target, stop_at_target=True)
    grid = {"algorithm": ["oldsgd", "ldsgd"], "tau": TAU_GRID, "c": [5], "seed": [0]}
    return harness.sweep(base, grid)


def produce_speedup_traces():
    traces = speedup_traces()
    outputs = {f"speedup_{t.config.algorithm}_tau{t.config.hp.tau}.csv": t.to_csv() for t in traces}
    _remember("speedup", outputs)
    return traces


def degradation_setup():
    doc = json.loads(DEGRADATION.read_text())
    cfg = RunConfig.from_dict(doc["config"])
    tc = harness.theory_constants(cfg)
    target = tc.fstar + 1e-3 * (tc.f0 - tc.fstar)
    return cfg.replace(target_loss=target, stop_at_target=True), target


def produce_degradation_traces():
    cfg, _ = degradation_setup()
    traces = {a: simulate(cfg.replace(algorithm=a))
              for a in ("oldsgd", "ldsgd", "oled", "led", "olgt", "lugt")}
    _remember("degradation", {f"degradation_{a}.csv": t.to_csv() for a, t in traces.items()})
    return traces


PRODUCERS = {
    "identity": produce_identity_traces,
    "convergence": produce_convergence_traces,
    "bound": produce_bound_result,
    "speedup": produce_speedup_traces,
    "degradation": produce_degradation_traces,
}


# --------------------------------------------------------------------------


@pytest.mark.criterion(1, "average-update identity")
def test_criterion_01_average_update_identity():
    with Budget(5):
        cfg = instance(T=1000, alpha=0.01)
        assert cfg.topology.n == 8 and cfg.hp.tau == 5 and cfg.noise.sigma == 1.0
        dev = harness.average_update_deviation(cfg)
    print(f"max relative deviation {dev:.3e}")
    assert dev <= 1e-12


@pytest.mark.criterion(2, "coincidence identities")
def test_criterion_02_coincidence_identities():
    with Budget(10):
        produce_identity_traces()
        for k, (n, cfg) in enumerate(random_identity_configs()):
            ring = harness.TopologySpec("ring", n)
            complete = harness.TopologySpec("complete", n, "uniform")
            a = simulate(cfg.replace(algorithm="oldsgd", topology=ring, tau=1))
            b = simulate(cfg.replace(algorithm="dsgd", topology=ring, tau=1))
            assert trajectory_columns(a) == trajectory_columns(b), f"config {k}: oldsgd(tau=1) != dsgd"
            c = simulate(cfg.replace(algorithm="ldsgd", topology=complete))
            d = simulate(cfg.replace(algorithm="lsgd", topology=complete))
            assert trajectory_columns(c) == trajectory_columns(d), f"config {k}: ldsgd(uniform) != lsgd"


@pytest.mark.criterion(3, "time-model equivalence")
def test_criterion_03_time_model_equivalence():
    expected = {"oldsgd": 1, "ldsgd": 2, "kgt": 2, "led": 2, "lugt": 3}
    with Budget(1):
        for alg, tau, c, n in product(COMPARED_ALGORITHMS, TAU_GRID, [1, 5], [2, 4, 8, 16, 32]):
            cm = CostModel(c, n=n)
            closed = round_runtime(alg, tau, cm)
            tl = build_timeline(alg, tau, cm, rounds=2, agents=1)
            assert tl.round_makespans() == [closed, closed], (alg, tau, c, n)
            assert tl.makespan == 2 * closed
        for alg, n in product(COMPARED_ALGORITHMS, [2, 4, 8, 16, 32]):
            for tau in TAU_GRID:
                cm = CostModel(tau, n=n)
                ratio = Fraction(round_runtime(alg, tau, cm)) / Fraction(round_runtime("oldsgd", tau, cm))
                want = 1 + Fraction(2 * (n - 1), n) if alg == "lsgd" else expected[alg]
                assert ratio == want, (alg, tau, n)


@pytest.mark.criterion(4, "gossip contraction")
def test_criterion_04_gossip_contraction():
    with Budget(1):
        cfg = instance(init=InitSpec("random", 1.0, 3), alpha=0.0)
        res = harness.gossip_contraction(cfg, rounds=100)
    print(f"lambda2^2 = {res['lambda2_sq']:.6f}, worst excess {res['worst_excess']:.3e}")
    assert res["worst_excess"] <= 1e-9


@pytest.mark.criterion(5, "convergence on heterogeneous quadratic")
def test_criterion_05_convergence():
    with Budget(30):
        outputs = produce_convergence_traces()
    traces = {name: harness.RunTrace.from_csv(text) for name, text in outputs.items()}
    old, ld = traces["convergence_oldsgd.csv"], traces["convergence_ldsgd.csv"]
    tc = harness.theory_constants(old.config)
    assert tc.P == 0 and tc.zeta2 == pytest.approx(1.0) and tc.sigma2 == 1.0 and tc.n == 8
    assert old.rows[-1][0] == ld.rows[-1][0] == 20_000
    g2 = old.final("grad_norm2")
    f_old, f_ld = old.final("loss"), ld.final("loss")
    rel = abs(f_old - f_ld) / abs(f_ld)
    print(f"alpha={old.config.hp.alpha:.4e} final ||grad||^2={g2:.3e} loss gap rel={rel:.2e}")
    assert g2 <= 1e-3
    assert rel <= 0.05


@pytest.mark.criterion(6, "convergence bound holds")
def test_criterion_06_bound():
    with Budget(300):
        res = json.loads(produce_bound_result()["bound.json"])
    print(f"lhs={res['lhs']:.4e} rhs={res['rhs']:.4e} slack={res['slack_ratio']:.1f}x")
    assert res["seeds"] == 20
    assert res["lhs"] <= res["rhs"]


@pytest.mark.criterion(7, "simulated-time speedup in [1.6, 2.4]")
def test_criterion_07_speedup():
    with Budget(120):
        traces = produce_speedup_traces()
        report = harness.speedup_report(traces, speedup_target())
    print(report.to_csv())
    speed = report.speedup("ldsgd", 5.0, "heterogeneous-quadratic")
    assert speed is not None
    assert 1.6 <= speed <= 2.4, f"OLDSGD-vs-LDSGD speedup {speed:.4f} outside [1.6, 2.4]"


@pytest.mark.criterion(8, "gradient oracles")
def test_criterion_08_gradient_oracles():
    with Budget(10):
        rng = np.random.default_rng(8)
        suites = [make_quadratic_suite(4, 6, 1.0, 0.2, 5.0, 1.0, seed=s) for s in range(3)]
        suites += [make_logistic_suite(4, 6, samples_per_agent=50, mu=0.01, seed=s) for s in range(3)]
        h = 1e-5
        worst = 0.0
        for k in range(100):
            s = suites[k % len(suites)]
            i = int(rng.integers(s.n))
            x = rng.standard_normal(s.d)
            v = rng.standard_normal(s.d)
            v /= np.linalg.norm(v)
            fd = (s.loss(i, x + h * v) - s.loss(i, x - h * v)) / (2 * h)
            g = s.full_gradient(i, x)
            an = float(g @ v)
            err = abs(fd - an) / max(abs(an), float(np.linalg.norm(g)))
            worst = max(worst, err)
        print(f"worst finite-difference relative error {worst:.2e}")
        assert worst <= 1e-7

        draws = 100_000
        A = np.diag([1.0, 2.0, 3.0, 0.5])
        b = np.array([0.5, -1.0, 0.0, 2.0])
        x = np.array([1.0, 0.5, -0.5, 0.0])
        exact = A @ x - b
        clones = QuadraticSuite(A, np.tile(b, (draws, 1)))
        X = np.tile(x, (draws, 1))
        G = NoiseModel("additive", sigma=1.0).sample(clones, X, iteration_rng(1, 0))
        # per-coordinate standard deviation is sigma / sqrt(d)
        assert np.all(np.abs(G.mean(axis=0) - exact) <= 3 / np.sqrt(draws))
        unit = QuadraticSuite(np.eye(2), np.zeros((draws, 2)))
        G = NoiseModel("multiplicative", m=0.5).sample(unit, np.tile([2.0, 0.0], (draws, 1)),
                                                        iteration_rng(1, 1))
        assert np.mean(np.sum((G - [2.0, 0.0]) ** 2, axis=1)) == pytest.approx(1.0, rel=0.05)


def iterations_to(trace, target):
    for r in trace.rows:
        if r[2] <= target and not r[5]:
            return r[0]
    return math.inf


@pytest.mark.criterion(9, "overlapped tracking/diffusion degrade")
def test_criterion_09_degradation():
    with Budget(60):
        traces = produce_degradation_traces()
    _, target = degradation_setup()
    its = {a: iterations_to(t, target) for a, t in traces.items()}
    print({a: (t.status, its[a], t.rows[-1][0]) for a, t in traces.items()})
    oled = traces["oled"]
    assert oled.status == "diverged" and oled.rows[-1][0] <= 10_000
    assert traces["oldsgd"].status == "converged" and not traces["oldsgd"].diverged
    assert its["lugt"] < math.inf
    assert its["olgt"] > its["lugt"]


@pytest.mark.criterion(10, "determinism of trace files")
def test_criterion_10_determinism(tmp_path):
    for name, producer in PRODUCERS.items():
        first = _first_outputs.get(name)
        if first is None:
            producer()
            first = _first_outputs[name]
        del _first_outputs[name]
        producer()
        second = _first_outputs[name]
        assert sorted(first) == sorted(second)
        for fname in first:
            a, b = tmp_path / "a" / fname, tmp_path / "b" / fname
            harness.atomic_write(a, first[fname])
            harness.atomic_write(b, second[fname])
            assert a.read_bytes() == b.read_bytes(), f"{name}/{fname} differs between runs"
