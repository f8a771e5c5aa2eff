"""Decentralized update rules on a synchronous, lock-step swarm.

All agents advance together. Overlap is modeled logically: an overlapping
method mixes the neighbor models snapshotted at the previous consensus
boundary (``SwarmState.stale``) rather than the fresh ones, which is exactly
what lets the transmit run concurrently with the local steps. Wall-clock
accounting lives in :mod:`oldsgd.timemodel`.

Iteration ``t`` produces ``x^t`` from ``x^{t-1}``. A stochastic gradient at
``x^k`` is always drawn from ``iteration_rng(seed, k)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .objectives import NoiseModel, iteration_rng
from .topology import MixingMatrix

__all__ = [
    "ConfigurationError",
    "Hyperparams",
    "AgentState",
    "SwarmState",
    "ALGORITHMS",
    "init_swarm",
    "step",
    "step_oldsgd",
    "step_ldsgd",
    "step_dsgd_cta",
    "step_lsgd",
    "step_olgt",
    "step_lugt",
    "step_oled",
    "step_led",
    "consensus_error",
]

DIVERGENCE_FACTOR = 1e6


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class Hyperparams:
    """Step sizes and schedule.

    ``eta`` scales the tracking variable in OLGT/LUGT; ``beta`` weights the
    correction in OLED/LED and defaults to ``alpha``. ``own_gradient`` switches
    LDSGD to the literal reading of its consensus line (mix models, subtract
    the agent's own gradient).
    """

    alpha: float
    tau: int = 1
    T: int = 1
    seed: int = 0
    eta: float = 1.0
    beta: float | None = None
    own_gradient: bool = False
    oled_init: str = "mixing"

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ConfigurationError(f"alpha must be >= 0, got {self.alpha}")
        if int(self.tau) != self.tau or self.tau < 1:
            raise ConfigurationError(f"tau must be an integer >= 1, got {self.tau}")
        if int(self.T) != self.T or self.T < 1:
            raise ConfigurationError(f"T must be an integer >= 1, got {self.T}")
        if self.oled_init not in ("mixing", "zero"):
            raise ConfigurationError(f"oled_init must be 'mixing' or 'zero', got {self.oled_init!r}")

    @property
    def beta_eff(self) -> float:
        return self.alpha if self.beta is None else self.beta


@dataclass
class AgentState:
    """Read-only snapshot of one agent, for inspection and tests."""

    x: np.ndarray
    grad_accum: np.ndarray
    stale_inbox: dict[int, np.ndarray]
    aux: dict[str, np.ndarray]


@dataclass
class SwarmState:
    """Row-stacked state of all agents.

    ``stale`` holds every agent's model as of the last consensus boundary (or
    the initial models). ``last_grads`` are the stochastic gradients consumed by
    the most recent step.
    """

    x: np.ndarray
    mixing: MixingMatrix
    t: int = 0
    grad_accum: np.ndarray = None
    stale: np.ndarray = None
    aux: dict = field(default_factory=dict)
    last_grads: np.ndarray | None = None
    xbar_trace: list | None = None
    diverged: bool = False
    x0_scale: float = 1.0

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def xbar(self) -> np.ndarray:
        return self.x.mean(axis=0)

    def agent(self, i: int) -> AgentState:
        W = self.mixing.weights
        inbox = {j: self.stale[j].copy() for j in range(self.n) if W[i, j] != 0 or j == i}
        return AgentState(self.x[i].copy(), self.grad_accum[i].copy(), inbox,
                          {k: v[i].copy() for k, v in self.aux.items() if isinstance(v, np.ndarray)})


def consensus_error(swarm: SwarmState | np.ndarray) -> float:
    """``sum_i ||x_i - xbar||^2`` for the current iterate."""
    X = swarm.x if isinstance(swarm, SwarmState) else np.asarray(swarm)
    dev = X - X.mean(axis=0)
    return float(np.sum(dev * dev))


@lru_cache(maxsize=None)
def _averaging_matrix(n: int) -> np.ndarray:
    W = np.full((n, n), 1.0 / n)
    W.flags.writeable = False
    return W


def _draw(suite, noise: NoiseModel, hp: Hyperparams, X: np.ndarray, k: int) -> np.ndarray:
    return noise.sample(suite, X, iteration_rng(hp.seed, k))


def _check_dims(swarm: SwarmState, suite) -> None:
    if swarm.x.shape != (suite.n, suite.d) or swarm.mixing.n != suite.n:
        raise ConfigurationError(
            f"swarm {swarm.x.shape} / mixing {swarm.mixing.n} do not match suite ({suite.n}, {suite.d})")


def _finish(swarm: SwarmState, x_new: np.ndarray) -> SwarmState:
    swarm.x = x_new
    swarm.t += 1
    if swarm.xbar_trace is not None:
        swarm.xbar_trace.append(swarm.xbar)
    if not np.all(np.isfinite(x_new)) or \
            np.abs(x_new).max() > DIVERGENCE_FACTOR * swarm.x0_scale:
        swarm.diverged = True
    return swarm


def _window(accum: np.ndarray, value: np.ndarray, k: int, tau: int) -> np.ndarray:
    # running sum over k in [boundary, boundary + tau); restarts on each boundary
    return value.copy() if k % tau == 0 else accum + value


# --------------------------------------------------------------------------
# gradient-descent family


def step_oldsgd(swarm: SwarmState, suite, noise: NoiseModel, hp: Hyperparams) -> SwarmState:
    """Overlapping local DSGD.

    Local step off the boundary; on the boundary mix the models held at the
    previous boundary and subtract every gradient drawn since then.
    """
    _check_dims(swarm, suite)
    t = swarm.t + 1
    G = _draw(suite, noise, hp, swarm.x, t - 1)
    swarm.last_grads = G
    swarm.grad_accum = _window(swarm.grad_accum, G, t - 1, hp.tau)
    if t % hp.tau:
        return _finish(swarm, swarm.x - hp.alpha * G)
    x_new = swarm.mixing.mix(swarm.stale) - hp.alpha * swarm.grad_accum
    swarm.stale = x_new.copy()
    swarm.grad_accum = np.zeros_like(x_new)
    return _finish(swarm, x_new)


def step_ldsgd(swarm: SwarmState, suite, noise: NoiseModel, hp: Hyperparams) -> SwarmState:
    """Local DSGD, adapt-then-combine on the boundary with fresh models."""
    _check_dims(swarm, suite)
    t = swarm.t + 1
    G = _draw(suite, noise, hp, swarm.x, t - 1)
    swarm.last_grads = G
    if t % hp.tau:
        return _finish(swarm, swarm.x - hp.alpha * G)
    if hp.own_gradient:
        x_new = swarm.mixing.mix(swarm.x) - hp.alpha * G
    else:
        x_new = swarm.mixing.mix(swarm.x - hp.alpha * G)
    swarm.stale = x_new.copy()
    return _finish(swarm, x_new)


def step_dsgd_cta(swarm: SwarmState, suite, noise: NoiseModel, hp: Hyperparams) -> SwarmState:
    """DSGD, combine-then-adapt, communicating every iteration (tau ignored)."""
    _check_dims(swarm, suite)
    t = swarm.t + 1
    G = _draw(suite, noise, hp, swarm.x, t - 1)
    swarm.last_grads = G
    x_new = swarm.mixing.mix(swarm.x) - hp.alpha * G
    swarm.stale = x_new.copy()
    return _finish(swarm, x_new)


def step_lsgd(swarm: SwarmState, suite, noise: NoiseModel, hp: Hyperparams) -> SwarmState:
    """Local SGD: exact global averaging (allreduce) on the boundary.

    The allreduce average is applied as the ``(1/n) * ones`` matrix so the
    arithmetic matches LDSGD on a uniformly weighted complete graph.
    """
    _check_dims(swarm, suite)
    t = swarm.t + 1
    G = _draw(suite, noise, hp, swarm.x, t - 1)
    swarm.last_grads = G
    if t % hp.tau:
        return _finish(swarm, swarm.x - hp.alpha * G)
    x_new = _averaging_matrix(swarm.n) @ (swarm.x - hp.alpha * G)
    swarm.stale = x_new.copy()
    return _finish(swarm, x_new)


# --------------------------------------------------------------------------
# gradient tracking


def _tracking_step(swarm, suite, noise, hp, overlap: bool) -> SwarmState:
    _check_dims(swarm, suite)
    t = swarm.t + 1
    k = t - 1
    aux = swarm.aux
    y, g = aux["y"], aux["g"]
    boundary = t % hp.tau == 0
    if overlap:
        aux["y_accum"] = _window(aux["y_accum"], y, k, hp.tau)
        if boundary:
            x_new = swarm.mixing.mix(swarm.stale) - hp.eta * aux["y_accum"]
        else:
            x_new = swarm.x - hp.eta * y
    else:
        x_new = (swarm.mixing.mix(swarm.x) if boundary else swarm.x) - hp.eta * y

    g_new = _draw(suite, noise, hp, x_new, t)
    delta = hp.alpha * (g_new - g)
    if overlap:
        aux["dy_accum"] = _window(aux["dy_accum"], delta, k, hp.tau)
        y_new = swarm.mixing.mix(aux["y_stale"]) + aux["dy_accum"] if boundary else y + delta
    else:
        y_new = swarm.mixing.mix(y) + delta if boundary else y + delta

    aux["y"], aux["g"] = y_new, g_new
    swarm.last_grads = g_new
    if boundary:
        swarm.stale = x_new.copy()
        aux["y_stale"] = y_new.copy()
    return _finish(swarm, x_new)


def step_olgt(swarm: SwarmState, suite, noise: NoiseModel, hp: Hyperparams) -> SwarmState:
    """Overlapping local-update gradient tracking.

    On a boundary both ``x`` and ``y`` are mixed as they stood at the previous
    boundary; the tracking steps and gradient differences of the round are
    added on top.
    """
    return _tracking_step(swarm, suite, noise, hp, overlap=True)


def step_lugt(swarm: SwarmState, suite, noise: NoiseModel, hp: Hyperparams) -> SwarmState:
    """Local-update gradient tracking with fresh models on the boundary."""
    return _tracking_step(swarm, suite, noise, hp, overlap=False)


# --------------------------------------------------------------------------
# exact diffusion


def _diffusion_step(swarm, suite, noise, hp, overlap: bool) -> SwarmState:
    _check_dims(swarm, suite)
    t = swarm.t + 1
    aux = swarm.aux
    phi = swarm.x - hp.alpha * aux["g"] - hp.beta_eff * aux["y"]
    if t % hp.tau:
        g_new = _draw(suite, noise, hp, phi, t)
        swarm.last_grads = aux["g"]
        aux["g"] = g_new
        return _finish(swarm, phi)
    if overlap:
        x_new = swarm.mixing.mix(swarm.stale) + (phi - swarm.stale)
    else:
        x_new = swarm.mixing.mix(phi)
    g_new = _draw(suite, noise, hp, x_new, t)
    aux["y"] = aux["y"] + (g_new - aux["g_round"])
    swarm.last_grads = aux["g"]
    aux["g"] = g_new
    aux["g_round"] = g_new
    swarm.stale = x_new.copy()
    return _finish(swarm, x_new)


def step_oled(swarm: SwarmState, suite, noise: NoiseModel, hp: Hyperparams) -> SwarmState:
    """Overlapping local exact diffusion, one inner iteration per call.

    A round is ``tau`` calls. Its last call closes the round: mix the models
    from the round start, add this agent's local progress, then shift the
    correction ``y`` by the gradient change between round starts.
    """
    return _diffusion_step(swarm, suite, noise, hp, overlap=True)


def step_led(swarm: SwarmState, suite, noise: NoiseModel, hp: Hyperparams) -> SwarmState:
    """Local exact diffusion: as :func:`step_oled` but mixing the post-local models."""
    return _diffusion_step(swarm, suite, noise, hp, overlap=False)


# --------------------------------------------------------------------------

ALGORITHMS = {
    "oldsgd": step_oldsgd,
    "ldsgd": step_ldsgd,
    "dsgd": step_dsgd_cta,
    "lsgd": step_lsgd,
    "olgt": step_olgt,
    "lugt": step_lugt,
    "oled": step_oled,
    "led": step_led,
}


def init_swarm(algorithm: str, x0: np.ndarray, mixing: MixingMatrix, suite,
               noise: NoiseModel, hp: Hyperparams, record_xbar: bool = False) -> SwarmState:
    """Fresh swarm at iteration 0.

    ``x0`` is either one ``d``-vector shared by all agents or an ``(n, d)``
    stack.
    """
    if algorithm not in ALGORITHMS:
        raise ConfigurationError(f"unknown algorithm {algorithm!r}; expected one of {sorted(ALGORITHMS)}")
    X = np.array(x0, dtype=float)
    if X.ndim == 1:
        X = np.tile(X, (suite.n, 1))
    swarm = SwarmState(x=X, mixing=mixing, grad_accum=np.zeros_like(X), stale=X.copy())
    _check_dims(swarm, suite)
    swarm.x0_scale = max(1.0, float(np.abs(X).max()))
    if record_xbar:
        swarm.xbar_trace = [swarm.xbar]
    if algorithm in ("olgt", "lugt"):
        g0 = _draw(suite, noise, hp, X, 0)
        y0 = hp.alpha * g0
        swarm.aux.update(y=y0, g=g0, y_stale=y0.copy(),
                         y_accum=np.zeros_like(X), dy_accum=np.zeros_like(X))
    elif algorithm in ("oled", "led"):
        g0 = _draw(suite, noise, hp, X, 0)
        y0 = X - mixing.mix(X) if hp.oled_init == "mixing" else np.zeros_like(X)
        swarm.aux.update(y=y0, g=g0, g_round=g0)
    return swarm


def step(algorithm: str, swarm: SwarmState, suite, noise: NoiseModel, hp: Hyperparams) -> SwarmState:
    try:
        fn = ALGORITHMS[algorithm]
    except KeyError:
        raise ConfigurationError(f"unknown algorithm {algorithm!r}") from None
    return fn(swarm, suite, noise, hp)
