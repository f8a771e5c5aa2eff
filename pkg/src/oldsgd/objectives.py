"""Per-agent objectives, stochastic gradient oracles and data partitioning.

The global objective is the agent average ``f(x) = (1/n) sum_i f_i(x)``.
Every suite exposes both per-agent calls (``loss``, ``full_gradient``) and a
vectorized ``gradients(X)`` over a row-stacked ``(n, d)`` array of models.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

__all__ = [
    "NumericDomainError",
    "QuadraticSuite",
    "LogisticSuite",
    "NoiseModel",
    "Partition",
    "Heterogeneity",
    "logistic_suite_from_partition",
    "iteration_rng",
    "make_quadratic_suite",
    "make_logistic_suite",
    "make_labeled_dataset",
    "partition_dataset",
    "full_gradient",
    "stochastic_gradient",
    "heterogeneity_constants",
    "smoothness_constant",
    "save_dataset_json",
    "load_dataset_json",
]

DATASET_SCHEMA_VERSION = 1


class NumericDomainError(ValueError):
    pass


def _check_finite(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise NumericDomainError("model contains non-finite entries")


def iteration_rng(seed: int, t: int) -> np.random.Generator:
    """Counter-based generator for iteration ``t`` of a run seeded by ``seed``.

    Agent ``i`` always consumes row ``i`` of whatever block is drawn, so the
    noise an agent sees at iteration ``t`` does not depend on the algorithm,
    on ``tau`` or on evaluation order.
    """
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, int(t), 0]))


# --------------------------------------------------------------------------
# suites


@dataclass(frozen=True)
class QuadraticSuite:
    """``f_i(x) = 0.5 x^T A x - b_i^T x`` with a shared PSD ``A``."""

    A: np.ndarray
    B: np.ndarray  # (n, d), row i is b_i
    seed: int | None = None

    kind = "quadratic"

    @property
    def n(self) -> int:
        return self.B.shape[0]

    @property
    def d(self) -> int:
        return self.B.shape[1]

    @property
    def b_bar(self) -> np.ndarray:
        return self.B.mean(axis=0)

    @property
    def minimizer(self) -> np.ndarray:
        return np.linalg.pinv(self.A) @ self.b_bar

    @property
    def fstar(self) -> float:
        return self.global_loss(self.minimizer)

    def loss(self, i: int, x: np.ndarray) -> float:
        return float(0.5 * x @ self.A @ x - self.B[i] @ x)

    def full_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        _check_finite(x)
        return self.A @ x - self.B[i]

    def gradients(self, X: np.ndarray) -> np.ndarray:
        return X @ self.A - self.B

    def global_loss(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.A @ x - self.b_bar @ x)

    def global_gradient(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x - self.b_bar


@dataclass(frozen=True)
class LogisticSuite:
    """Ridge-regularized logistic regression, one dataset per agent.

    Labels are in ``{0, 1}``; the loss uses signed labels ``2y - 1``.
    """

    features: tuple[np.ndarray, ...]
    labels: tuple[np.ndarray, ...]
    mu: float = 0.0
    batch_size: int = 32
    seed: int | None = None

    kind = "logistic"

    def __post_init__(self):
        if len(self.features) != len(self.labels):
            raise ValueError("features and labels must cover the same agents")
        for a, y in zip(self.features, self.labels):
            if a.ndim != 2 or a.shape[0] != y.shape[0] or a.shape[0] == 0:
                raise ValueError("each agent needs a non-empty (m, d) feature block")

    @property
    def n(self) -> int:
        return len(self.features)

    @property
    def d(self) -> int:
        return self.features[0].shape[1]

    @staticmethod
    def _loss(a, s, x, mu):
        z = s * (a @ x)
        return float(np.mean(np.logaddexp(0.0, -z)) + 0.5 * mu * (x @ x))

    @staticmethod
    def _grad(a, s, x, mu):
        z = s * (a @ x)
        coef = -s * expit(-z)
        return a.T @ coef / a.shape[0] + mu * x

    def _signed(self, i):
        return 2.0 * self.labels[i] - 1.0

    def loss(self, i: int, x: np.ndarray) -> float:
        return self._loss(self.features[i], self._signed(i), x, self.mu)

    def full_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        _check_finite(x)
        return self._grad(self.features[i], self._signed(i), x, self.mu)

    def gradients(self, X: np.ndarray) -> np.ndarray:
        return np.stack([self.full_gradient(i, X[i]) for i in range(self.n)])

    def minibatch_gradients(self, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        out = np.empty_like(X)
        for i in range(self.n):
            a = self.features[i]
            idx = rng.integers(0, a.shape[0], size=self.batch_size)
            out[i] = self._grad(a[idx], self._signed(i)[idx], X[i], self.mu)
        return out

    def global_loss(self, x: np.ndarray) -> float:
        return float(np.mean([self.loss(i, x) for i in range(self.n)]))

    def global_gradient(self, x: np.ndarray) -> np.ndarray:
        return np.mean([self.full_gradient(i, x) for i in range(self.n)], axis=0)


# --------------------------------------------------------------------------
# noise


@dataclass(frozen=True)
class NoiseModel:
    """Stochastic gradient perturbation.

    ``additive``: ``g = grad + sigma * z / sqrt(d)`` with ``z ~ N(0, I)``, so the
    expected squared error is exactly ``sigma**2`` (variance constants
    ``sigma**2``, ``M = 0``).
    ``multiplicative``: ``g = (1 + m u) grad`` with scalar ``u ~ N(0, 1)``
    (``sigma**2 = 0``, ``M = m**2``).
    ``minibatch``: minibatch gradients of a :class:`LogisticSuite`.
    """

    kind: str = "additive"
    sigma: float = 0.0
    m: float = 0.0

    def __post_init__(self):
        if self.kind not in ("additive", "multiplicative", "minibatch"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0 or self.m < 0:
            raise ValueError("noise scales must be non-negative")

    @property
    def sigma2(self) -> float:
        return self.sigma**2 if self.kind == "additive" else 0.0

    @property
    def M(self) -> float:
        return self.m**2 if self.kind == "multiplicative" else 0.0

    def sample(self, suite, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Stochastic gradients for all agents at the stacked models ``X``."""
        if self.kind == "minibatch":
            if not isinstance(suite, LogisticSuite):
                raise ValueError("minibatch noise requires a sampled (logistic) suite")
            return suite.minibatch_gradients(X, rng)
        return self.perturb(suite.gradients(X), rng)

    def perturb(self, G: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Apply additive or multiplicative noise to exact stacked gradients."""
        if self.kind == "additive":
            if self.sigma == 0.0:
                return G
            return G + (self.sigma / math.sqrt(G.shape[1])) * rng.standard_normal(G.shape)
        if self.kind == "minibatch":
            raise ValueError("minibatch noise cannot be applied to exact gradients")
        if self.m == 0.0:
            return G
        u = rng.standard_normal(G.shape[0])
        return (1.0 + self.m * u)[:, None] * G

    def to_dict(self) -> dict:
        return {"kind": self.kind, "sigma": self.sigma, "m": self.m}


def full_gradient(suite, i: int, x: np.ndarray) -> np.ndarray:
    return suite.full_gradient(i, np.asarray(x, dtype=float))


def stochastic_gradient(suite, noise: NoiseModel, i: int, x: np.ndarray,
                        rng: np.random.Generator) -> np.ndarray:
    """One agent's stochastic gradient at ``x``.

    Uses the same draw layout as :meth:`NoiseModel.sample`: the block for all
    agents is drawn and row ``i`` is kept, so agent ``i`` sees the noise it would
    see inside a full swarm step with the same generator.
    """
    x = np.asarray(x, dtype=float)
    _check_finite(x)
    if noise.kind == "minibatch":
        X = np.zeros((suite.n, x.shape[0]))
        X[i] = x
        return noise.sample(suite, X, rng)[i]
    G = np.zeros((suite.n, x.shape[0]))
    G[i] = suite.full_gradient(i, x)
    return noise.perturb(G, rng)[i]


# --------------------------------------------------------------------------
# constants


def smoothness_constant(suite) -> float:
    """``L`` such that every ``f_i`` is ``L``-smooth.

    Exact for quadratics; for logistic suites the standard upper bound
    ``max_i mean_k ||a_k||^2 / 4 + mu``.
    """
    if isinstance(suite, QuadraticSuite):
        return float(np.linalg.eigvalsh(suite.A).max())
    return 0.25 * max(float(np.mean(np.sum(a * a, axis=1))) for a in suite.features) + suite.mu


@dataclass(frozen=True)
class Heterogeneity:
    zeta2: float
    P: float
    estimate: bool = False

    def __iter__(self):
        return iter((self.zeta2, self.P))


def heterogeneity_constants(suite, grid_points: int = 200, scale: float = 3.0,
                            seed: int = 0) -> Heterogeneity:
    """Constants ``(zeta2, P)`` bounding gradient dissimilarity.

    Exact for quadratics. Other suites get an empirical fit over random probe
    points: ``P`` from a least-squares slope, then ``zeta2`` raised until the
    bound covers every probe. The result is flagged ``estimate=True``.
    """
    if isinstance(suite, QuadraticSuite):
        dev = suite.B - suite.b_bar
        return Heterogeneity(float(np.mean(np.sum(dev * dev, axis=1))), 0.0)
    rng = np.random.default_rng(seed)
    h = np.empty(grid_points)
    g2 = np.empty(grid_points)
    for k in range(grid_points):
        x = scale * rng.standard_normal(suite.d) / math.sqrt(suite.d)
        G = np.stack([suite.full_gradient(i, x) for i in range(suite.n)])
        gbar = G.mean(axis=0)
        h[k] = np.mean(np.sum((G - gbar) ** 2, axis=1))
        g2[k] = gbar @ gbar
    design = np.column_stack([np.ones_like(g2), g2])
    _, slope = np.linalg.lstsq(design, h, rcond=None)[0]
    P = max(float(slope), 0.0)
    zeta2 = max(float(np.max(h - P * g2)), 0.0)
    return Heterogeneity(zeta2, P, estimate=True)


# --------------------------------------------------------------------------
# construction


def make_quadratic_suite(n: int, d: int, zeta2: float = 0.0, eig_min: float = 0.5,
                         eig_max: float = 1.0, bbar_norm: float = 1.0,
                         seed: int = 0) -> QuadraticSuite:
    """Random quadratic suite with prescribed spectrum and heterogeneity.

    ``A = Q diag(linspace(eig_min, eig_max, d)) Q^T`` with a random orthogonal
    ``Q``; the offsets are centered and rescaled so that
    ``(1/n) sum ||b_i - b_bar||^2 == zeta2`` and ``||b_bar|| == bbar_norm``.
    """
    if eig_min < 0 or eig_max < eig_min:
        raise ValueError("need 0 <= eig_min <= eig_max")
    if n == 1 and zeta2 != 0:
        raise ValueError("a single agent cannot be heterogeneous")
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    Q = Q * np.sign(np.diag(R))
    A = (Q * np.linspace(eig_min, eig_max, d)) @ Q.T
    A = 0.5 * (A + A.T)
    bbar = rng.standard_normal(d)
    bbar *= bbar_norm / np.linalg.norm(bbar)
    dev = rng.standard_normal((n, d))
    dev -= dev.mean(axis=0)
    spread = np.mean(np.sum(dev * dev, axis=1))
    dev = dev * math.sqrt(zeta2 / spread) if spread > 0 and zeta2 > 0 else np.zeros((n, d))
    return QuadraticSuite(A, bbar + dev, seed)


def make_labeled_dataset(n_samples: int, n_classes: int, d: int, seed: int = 0,
                         separation: float = 2.0):
    """Balanced Gaussian-cluster classification data ``(features, labels)``."""
    rng = np.random.default_rng(seed)
    centers = separation * rng.standard_normal((n_classes, d)) / math.sqrt(d)
    labels = np.arange(n_samples) % n_classes
    rng.shuffle(labels)
    features = centers[labels] + rng.standard_normal((n_samples, d)) / math.sqrt(d)
    return features, labels


def make_logistic_suite(n: int, d: int, samples_per_agent: int = 200, mu: float = 1e-3,
                        batch_size: int = 32, cluster_spread: float = 1.0,
                        seed: int = 0) -> LogisticSuite:
    """Synthetic logistic suite: one Gaussian feature cluster per agent,
    labels drawn from a planted linear model shared by all agents."""
    rng = np.random.default_rng(seed)
    w_true = rng.standard_normal(d)
    w_true /= np.linalg.norm(w_true)
    feats, labs = [], []
    for _ in range(n):
        center = cluster_spread * rng.standard_normal(d)
        a = center + rng.standard_normal((samples_per_agent, d)) / math.sqrt(d)
        prob = expit(4.0 * (a @ w_true))
        feats.append(a)
        labs.append((rng.random(samples_per_agent) < prob).astype(float))
    return LogisticSuite(tuple(feats), tuple(labs), mu, batch_size, seed)


# --------------------------------------------------------------------------
# partitioning


@dataclass(frozen=True)
class Partition:
    assignment: tuple[np.ndarray, ...]
    skew: float
    designated: tuple[int, ...] = field(default=())

    @property
    def n(self) -> int:
        return len(self.assignment)


def partition_dataset(labels, n: int, skew: float, seed: int = 0) -> Partition:
    """Split sample indices over ``n`` agents with label skew.

    Agent ``i`` is designated label ``classes[i % n_classes]`` (round-robin when
    there are more agents than labels). Each agent first draws
    ``floor(skew * quota)`` samples of its designated label, then fills the rest
    of its quota uniformly from the leftover pool. Quotas differ by at most one.
    """
    if not 0.0 <= skew <= 1.0:
        raise ValueError(f"skew must be in [0, 1], got {skew}")
    labels = np.asarray(labels)
    N = labels.shape[0]
    if n < 1 or n > N:
        raise ValueError("need 1 <= n <= number of samples")
    rng = np.random.default_rng(seed)
    classes = np.unique(labels)
    quotas = [N // n + (1 if i < N % n else 0) for i in range(n)]
    designated = tuple(int(classes[i % len(classes)]) for i in range(n))

    pools = {c: list(rng.permutation(np.flatnonzero(labels == c))) for c in classes}
    taken: list[list[int]] = [[] for _ in range(n)]
    for i in range(n):
        want = math.floor(skew * quotas[i])
        pool = pools[designated[i]]
        grab = min(want, len(pool))
        taken[i].extend(pool[:grab])
        pools[designated[i]] = pool[grab:]

    leftover = np.array(sorted(idx for pool in pools.values() for idx in pool), dtype=int)
    leftover = rng.permutation(leftover)
    pos = 0
    for i in range(n):
        need = quotas[i] - len(taken[i])
        taken[i].extend(leftover[pos:pos + need].tolist())
        pos += need
    assignment = tuple(np.array(sorted(t), dtype=int) for t in taken)
    return Partition(assignment, skew, designated)


def logistic_suite_from_partition(features, labels, partition: Partition, mu: float = 1e-3,
                                  batch_size: int = 32, seed: int | None = None) -> LogisticSuite:
    """Binary logistic suite over a partitioned dataset (labels must be 0/1)."""
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("logistic suites need binary labels")
    return LogisticSuite(tuple(features[idx] for idx in partition.assignment),
                         tuple(labels[idx] for idx in partition.assignment),
                         mu, batch_size, seed)


# --------------------------------------------------------------------------
# serialization


def save_dataset_json(path, suite: LogisticSuite, seed: int | None = None) -> None:
    doc = {
        "version": DATASET_SCHEMA_VERSION,
        "seed": suite.seed if seed is None else seed,
        "d": suite.d,
        "n": suite.n,
        "mu": suite.mu,
        "batch_size": suite.batch_size,
        "agents": [
            {"features": a.tolist(), "labels": y.astype(int).tolist()}
            for a, y in zip(suite.features, suite.labels)
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_dataset_json(path) -> LogisticSuite:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != DATASET_SCHEMA_VERSION:
        raise ValueError(f"unsupported dataset version {doc.get('version')!r}")
    agents = doc["agents"]
    if len(agents) != doc["n"]:
        raise ValueError("agent count does not match header")
    feats = tuple(np.asarray(a["features"], dtype=float).reshape(-1, doc["d"]) for a in agents)
    labs = tuple(np.asarray(a["labels"], dtype=float) for a in agents)
    return LogisticSuite(feats, labs, doc.get("mu", 0.0), doc.get("batch_size", 32), doc.get("seed"))
