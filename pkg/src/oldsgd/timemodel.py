"""Simulated wall-clock time under the compute/communicate cost model.

One stochastic gradient costs 1 time unit; one consensus transmit of a
model-sized message costs ``c`` units. A *round* is ``tau`` local steps plus
the communication that closes it. ``round_runtime`` gives the closed form per
round; ``build_timeline`` lays the same schedule out interval by interval so
the two can be checked against each other.

Integer/Fraction inputs give exact Fraction results.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational

__all__ = [
    "CostModel",
    "Interval",
    "Timeline",
    "TIME_MODELS",
    "OVERLAPPING",
    "round_runtime",
    "build_timeline",
    "elapsed",
    "normalized_runtime",
]

# DSGD communicates every iteration, so its rounds are always one step long
TIME_MODELS = ("oldsgd", "ldsgd", "kgt", "led", "lugt", "lsgd", "dsgd", "olgt", "oled")
COMPARED_ALGORITHMS = ("oldsgd", "ldsgd", "kgt", "led", "lugt", "lsgd")
OVERLAPPING = frozenset({"oldsgd", "olgt", "oled", "kgt"})


class ConfigurationError(ValueError):
    pass


def _num(v):
    if isinstance(v, Rational):
        return Fraction(v)
    return v


@dataclass(frozen=True)
class CostModel:
    c: float | Fraction
    n: int = 2
    grad_cost: int = 1

    def __post_init__(self):
        if not self.c > 0:
            raise ConfigurationError(f"communication cost c must be > 0, got {self.c}")
        if self.n < 1:
            raise ConfigurationError(f"n must be >= 1, got {self.n}")
        if self.grad_cost != 1:
            raise ConfigurationError("gradient cost is the time unit and fixed at 1")


def _check(alg: str, tau: int) -> None:
    if alg not in TIME_MODELS:
        raise ConfigurationError(f"no time model for algorithm {alg!r}")
    if int(tau) != tau or tau < 1:
        raise ConfigurationError(f"tau must be an integer >= 1, got {tau}")


def effective_tau(alg: str, tau: int) -> int:
    return 1 if alg == "dsgd" else int(tau)


def round_runtime(alg: str, tau: int, cm: CostModel):
    """Closed-form duration of one communication round."""
    _check(alg, tau)
    tau = effective_tau(alg, tau)
    c = _num(cm.c)
    n = cm.n
    if alg == "oldsgd" or alg == "oled":
        return max(tau, c)
    if alg in ("ldsgd", "led", "dsgd"):
        return tau + c
    if alg == "kgt":
        return max(tau, c) + c
    if alg == "lugt":
        return tau + 2 * c
    if alg == "olgt":
        return max(tau, 2 * c)
    # lsgd, ring allreduce
    return tau + Fraction(2 * (n - 1), n) * c if isinstance(c, Fraction) else tau + 2 * (n - 1) / n * c


def normalized_runtime(alg: str, tau: int, cm: CostModel):
    """Round runtime relative to OLDSGD at the same ``tau``."""
    return round_runtime(alg, tau, cm) / round_runtime("oldsgd", tau, cm)


def elapsed(alg: str, tau: int, cm: CostModel, iterations: int):
    """Simulated time after ``iterations`` fine-grained steps.

    Completed rounds cost their full makespan; steps of an unfinished round
    cost one unit each.
    """
    _check(alg, tau)
    if iterations < 0:
        raise ValueError("iterations must be non-negative")
    tau_e = effective_tau(alg, tau)
    rounds, rest = divmod(int(iterations), tau_e)
    return rounds * round_runtime(alg, tau, cm) + rest


# --------------------------------------------------------------------------
# explicit schedules


@dataclass(frozen=True)
class Interval:
    kind: str  # compute | transmit | idle
    start: object
    end: object
    label: str = ""

    @property
    def length(self):
        return self.end - self.start


@dataclass
class Timeline:
    algorithm: str
    tau: int
    cost: CostModel
    rounds: int
    agents: dict[int, list[Interval]] = field(default_factory=dict)
    boundaries: list = field(default_factory=list)

    @property
    def makespan(self):
        return self.boundaries[-1]

    def round_makespans(self) -> list:
        return [b - a for a, b in zip(self.boundaries, self.boundaries[1:])]

    def idle_per_round(self, agent: int = 0) -> list:
        out = []
        for a, b in zip(self.boundaries, self.boundaries[1:]):
            out.append(sum((iv.length for iv in self.agents[agent]
                            if iv.kind == "idle" and a <= iv.start < b), 0))
        return out

    def total(self, kind: str, agent: int = 0):
        return sum((iv.length for iv in self.agents[agent] if iv.kind == kind), 0)

    def to_json(self) -> str:
        def enc(v):
            return float(v)
        doc = {
            "algorithm": self.algorithm,
            "tau": self.tau,
            "c": enc(self.cost.c),
            "n": self.cost.n,
            "rounds": self.rounds,
            "agents": {
                str(a): [{"kind": iv.kind, "start": enc(iv.start), "end": enc(iv.end)} for iv in ivs]
                for a, ivs in self.agents.items()
            },
        }
        return json.dumps(doc)


class _Lane:
    """One agent's activity lanes: a compute lane and a network lane."""

    def __init__(self):
        self.intervals: list[Interval] = []
        self.cpu_free = 0
        self.net_free = 0

    def compute(self, start, units: int):
        t = max(start, self.cpu_free)
        for _ in range(units):
            self.intervals.append(Interval("compute", t, t + 1))
            t = t + 1
        self.cpu_free = t
        return t

    def transmit(self, start, length, label=""):
        t = max(start, self.net_free)
        self.intervals.append(Interval("transmit", t, t + length, label))
        self.net_free = t + length
        return t + length

    def wait_until(self, t):
        # the compute lane idles until t
        if t > self.cpu_free:
            self.intervals.append(Interval("idle", self.cpu_free, t))
            self.cpu_free = t


def _simulate_round(alg, tau, c, n, lane: _Lane, start):
    """Schedule one round starting at boundary ``start``; return its end.

    For overlapping methods the message sent at ``start`` is the one the
    closing consensus receives, so the round ends when both it and the local
    steps are done.
    """
    if alg in ("oldsgd", "oled"):
        sent = lane.transmit(start, c, "model")
        done = lane.compute(start, tau)
        end = max(done, sent)
        lane.wait_until(end)
        return end
    if alg == "olgt":
        sent_x = lane.transmit(start, c, "model")
        sent_y = lane.transmit(sent_x, c, "tracking")
        done = lane.compute(start, tau)
        end = max(done, sent_y)
        lane.wait_until(end)
        return end
    if alg == "kgt":
        sent_x = lane.transmit(start, c, "model")
        done = lane.compute(start, tau)
        ready = max(done, sent_x)
        lane.wait_until(ready)
        end = lane.transmit(ready, c, "accumulated-gradient")
        lane.wait_until(end)
        return end
    done = lane.compute(start, tau)
    if alg in ("ldsgd", "led", "dsgd"):
        end = lane.transmit(done, c, "model")
    elif alg == "lugt":
        end = lane.transmit(lane.transmit(done, c, "model"), c, "tracking")
    elif alg == "lsgd":
        chunk = c / n
        end = done
        for s in range(2 * (n - 1)):
            end = lane.transmit(end, chunk, f"allreduce-{s}")
    else:  # pragma: no cover - guarded by _check
        raise ConfigurationError(alg)
    lane.wait_until(end)
    return end


def build_timeline(alg: str, tau: int, cm: CostModel, rounds: int, agents: int | None = None) -> Timeline:
    """Explicit per-agent schedule of ``rounds`` communication rounds.

    All agents are homogeneous, so every agent's lane is identical; ``agents``
    (default ``cm.n``) only controls how many copies are emitted.
    """
    _check(alg, tau)
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    tau_e = effective_tau(alg, tau)
    c = _num(cm.c)
    lane = _Lane()
    t = 0
    boundaries = [0]
    for _ in range(rounds):
        t = _simulate_round(alg, tau_e, c, cm.n, lane, t)
        boundaries.append(t)
    count = cm.n if agents is None else agents
    return Timeline(alg, tau, cm, rounds,
                    {a: list(lane.intervals) for a in range(count)}, boundaries)
