import json
import math

import numpy as np
import pytest

from oldsgd import harness
from oldsgd.algorithms import ConfigurationError
from oldsgd.harness import (
    ReportError,
    RunConfig,
    RunTrace,
    geometric_mean,
    retime,
    simulate,
    speedup_report,
    sweep,
    time_to_target,
    trajectory_columns,
)


def small(**over):
    doc = {
        "algorithm": "oldsgd",
        "topology": {"kind": "ring", "n": 4},
        "objective": {"kind": "quadratic", "d": 5, "zeta2": 1.0, "seed": 1},
        "noise": {"kind": "additive", "sigma": 0.5},
        "hp": {"alpha": 0.05, "tau": 3, "T": 120, "seed": 0},
        "c": 2,
    }
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(doc.get(k), dict):
            doc[k] = {**doc[k], **v}
        else:
            doc[k] = v
    return RunConfig.from_dict(doc)


def fake_trace(alg, times_losses, c=1.0, tau=1, label="", seed=0):
    cfg = small(algorithm=alg, c=c, label=label, hp={"tau": tau, "seed": seed})
    rows = [(k, float(t), float(f), 0.0, 0.0, 0) for k, (t, f) in enumerate(times_losses)]
    return RunTrace(cfg, rows, "budget-exhausted")


# --------------------------------------------------------------------------
# configuration


def test_config_round_trip():
    cfg = small(label="x", target_loss=-0.1)
    again = RunConfig.from_dict(json.loads(cfg.to_json()))
    assert again == cfg


def test_config_rejects_unknown_fields():
    with pytest.raises(ConfigurationError):
        RunConfig.from_dict({"algorithm": "oldsgd", "bogus": 1})
    with pytest.raises(ConfigurationError):
        RunConfig.from_dict({"objective": {"kind": "quadratic", "eigs": 3}})
    with pytest.raises(ConfigurationError):
        RunConfig.from_dict({"algorithm": "adam"})


def test_theory_step_size_rule():
    cfg = small(hp={"alpha": "theory"})
    assert cfg.alpha_rule == "theory"
    tc = harness.theory_constants(cfg)
    from oldsgd.theory import max_step_size
    assert cfg.hp.alpha == max_step_size(tc)


def test_theory_constants_of_instance():
    cfg = small()
    tc = harness.theory_constants(cfg)
    assert tc.zeta2 == pytest.approx(1.0)
    assert tc.P == 0.0 and tc.sigma2 == 0.25 and tc.M == 0.0
    assert tc.p == pytest.approx(1 - (1 / 3) ** 2)
    assert tc.f0 == 0.0


# --------------------------------------------------------------------------
# running and traces


def test_single_agent_gradient_descent_decreases_loss():
    cfg = small(topology={"n": 1}, objective={"zeta2": 0.0}, noise={"sigma": 0.0},
                hp={"alpha": 0.5, "T": 50})
    loss = simulate(cfg).columns["loss"]
    assert np.all(np.diff(loss) < 0)


def test_determinism_byte_identical(tmp_path):
    cfg = small()
    a = harness.run(cfg, output=tmp_path / "a.csv")
    b = harness.run(cfg, output=tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert a.rows == b.rows


def test_trace_csv_round_trip(tmp_path):
    tr = simulate(small(cadence=7))
    path = tr.write(tmp_path / "sub" / "t.csv")
    back = RunTrace.read(path)
    assert back.rows == tr.rows
    assert back.config == tr.config
    assert back.status == tr.status
    assert back.to_csv() == tr.to_csv()


def test_trace_header_and_cadence():
    tr = simulate(small(cadence=50))
    text = tr.to_csv()
    assert text.startswith("# oldsgd-trace v1\n")
    assert "# seed: 0" in text
    assert [r[0] for r in tr.rows] == [0, 50, 100, 120]


def test_not_a_trace():
    with pytest.raises(ValueError):
        RunTrace.from_csv("a,b\n1,2\n")


def test_write_failure_has_path_context(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        harness.atomic_write(blocker / "t.csv", "data")


def test_divergence_recorded_not_raised():
    cfg = small(algorithm="dsgd", objective={"eig_max": 80.0}, hp={"alpha": 0.1, "tau": 1, "T": 500})
    tr = simulate(cfg)
    assert tr.status == "diverged"
    assert tr.rows[-1][5] == 1
    assert len(tr.rows) < 502


def test_status_converged_on_target_and_early_stop():
    cfg = small(target_loss=-0.2, stop_at_target=True, noise={"sigma": 0.0})
    tr = simulate(cfg)
    assert tr.status == "converged"
    assert tr.rows[-1][2] <= -0.2 < tr.rows[-2][2]
    assert len(simulate(cfg.replace(target_loss=1.0)).rows) == 1


def test_retime_changes_only_the_clock():
    tr = simulate(small(c=1))
    other = retime(tr, 5)
    assert trajectory_columns(tr) == trajectory_columns(other)
    assert other.rows[-1][1] == harness.elapsed("oldsgd", 3, other.config.cost, 120)
    assert simulate(small(c=5)).to_csv() == other.to_csv()


# --------------------------------------------------------------------------
# sweeps


def test_sweep_grid_size_and_order():
    base = small(hp={"T": 30})
    traces = sweep(base, {"tau": list(harness.DEFAULT_TAU_GRID), "c": [1, 5],
                          "algorithm": ["oldsgd"], "seed": [0, 1, 2]})
    assert len(traces) == 48
    keys = [(t.config.hp.tau, t.config.c, t.config.hp.seed) for t in traces]
    assert keys[:4] == [(1, 1, 0), (1, 1, 1), (1, 1, 2), (1, 5, 0)]


def test_sweep_empty_axis_is_an_error():
    with pytest.raises(ConfigurationError):
        sweep(small(), {"algorithm": []})
    with pytest.raises(ConfigurationError):
        sweep(small(), {"algorithm": ["nope"]})


def test_sweep_parallel_matches_serial():
    base = small(hp={"T": 40})
    grid = {"tau": [1, 4], "c": [1, 3], "algorithm": ["oldsgd", "lugt"], "seed": [0]}
    serial = [t.to_csv() for t in sweep(base, grid, workers=1)]
    parallel = [t.to_csv() for t in sweep(base, grid, workers=2)]
    assert serial == parallel


def test_sweep_records_point_errors(monkeypatch):
    def boom(cfg):
        if cfg.hp.tau == 2:
            raise RuntimeError("synthetic failure")
        return simulate(cfg)
    monkeypatch.setattr(harness, "simulate", boom)
    traces = sweep(small(hp={"T": 10}), {"tau": [1, 2]}, workers=1)
    assert [t.status for t in traces] == ["budget-exhausted", "error"]
    assert "synthetic failure" in traces[1].error


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv(harness.WORKERS_ENV, "3")
    assert harness.worker_count() == 3
    monkeypatch.setenv(harness.WORKERS_ENV, "many")
    with pytest.raises(ConfigurationError):
        harness.worker_count()


# --------------------------------------------------------------------------
# reports


def test_time_to_target_examples():
    tr = fake_trace("oldsgd", [(0, 1.0), (2, 0.5), (4, 0.2), (6, 0.1)])
    assert time_to_target(tr, 2.0) == 0
    assert time_to_target(tr, 0.3) == 4
    assert time_to_target(tr, -1.0) is None
    with pytest.raises(ValueError):
        time_to_target(tr, math.nan)


def test_speedup_ratio():
    traces = [fake_trace("oldsgd", [(0, 1.0), (10, 0.0)]),
              fake_trace("ldsgd", [(0, 1.0), (20, 0.0)])]
    rep = speedup_report(traces, 0.0)
    assert rep.speedup("ldsgd", 1.0) == 2.0
    assert rep.speedup("oldsgd", 1.0) == 1.0
    assert rep.geomean["ldsgd"] == 2.0


def test_speedup_uses_best_tau_and_seed_mean():
    traces = [fake_trace("oldsgd", [(0, 1), (10, 0)]),
              fake_trace("ldsgd", [(0, 1), (30, 0)], tau=1),
              fake_trace("ldsgd", [(0, 1), (10, 0)], tau=5, seed=0),
              fake_trace("ldsgd", [(0, 1), (20, 0)], tau=5, seed=1)]
    rep = speedup_report(traces, 0.0)
    entry = [e for e in rep.entries if e["algorithm"] == "ldsgd"][0]
    assert entry["best_tau"] == 5 and entry["speedup"] == 1.5


def test_speedup_unreachable_is_flagged():
    traces = [fake_trace("oldsgd", [(0, 1), (10, 0)]),
              fake_trace("lugt", [(0, 1), (10, 0.5)])]
    rep = speedup_report(traces, 0.0)
    assert rep.speedup("lugt", 1.0) is None
    assert "lugt" not in rep.geomean and rep.warnings
    assert "unreachable" in rep.to_csv()


def test_speedup_reference_unreachable_is_an_error():
    with pytest.raises(ReportError):
        speedup_report([fake_trace("oldsgd", [(0, 1), (10, 0.5)])], 0.0)


def test_geometric_mean_of_six_settings():
    assert geometric_mean([1.23, 1.26, 1.50, 1.62, 1.95, 2.65]) == pytest.approx(1.64, abs=5e-3)


def test_speedup_report_serializations():
    traces = [fake_trace("oldsgd", [(0, 1), (4, 0)], c=5.0, label="het"),
              fake_trace("ldsgd", [(0, 1), (8, 0)], c=5.0, label="het")]
    rep = speedup_report(traces, 0.0)
    doc = json.loads(rep.to_json())
    assert doc["geomean"]["ldsgd"] == 2.0
    assert rep.to_csv().splitlines()[0] == "# target_loss: 0"


def test_scalability_baseline_and_monotone_speedup():
    # variance-dominated: the noise floor of a single agent sits near the target
    base = small(objective={"zeta2": 0.0}, noise={"sigma": 4.0},
                 hp={"alpha": 0.05, "tau": 5, "T": 4000})
    fstar = harness.build_suite(base).fstar
    rows = harness.scalability_report(base, [2, 4, 8, 16], fstar + 0.15, seeds=range(5))
    assert [r["n"] for r in rows] == [1, 2, 4, 8, 16]
    assert rows[0]["speedup"] == 1.0
    speeds = [r["speedup"] for r in rows]
    assert all(s is not None for s in speeds)
    assert all(b >= a for a, b in zip(speeds, speeds[1:]))


def test_scalability_requires_homogeneous_objective():
    with pytest.raises(ConfigurationError):
        harness.scalability_report(small(), [2], 0.0)


# --------------------------------------------------------------------------
# checks


def test_verify_invariants_all_hold():
    out = harness.verify_invariants(small())
    assert out["all_hold"], out


def test_verify_bound_on_small_instance():
    cfg = small(hp={"alpha": "theory", "T": 500})
    res = harness.verify_bound(cfg, seeds=3)
    assert res["holds"] and res["slack_ratio"] > 1


def test_logistic_run_from_dataset(tmp_path):
    from oldsgd.objectives import make_logistic_suite, save_dataset_json
    path = tmp_path / "d.json"
    save_dataset_json(path, make_logistic_suite(4, 3, samples_per_agent=20, seed=0))
    cfg = small(objective={"kind": "logistic", "dataset": str(path)},
                noise={"kind": "minibatch"}, hp={"T": 60})
    tr = simulate(cfg)
    loss = tr.columns["loss"]
    assert loss[-1] < loss[0]
    with pytest.raises(ConfigurationError):
        simulate(small(topology={"n": 3}, objective={"kind": "logistic", "dataset": str(path)}))
