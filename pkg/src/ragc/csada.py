"""Pseudo-label guided weighting of contrastive pairs.

K-means on the fused embedding gives pseudo labels; samples close to their
centre form the high-confidence set, and pairs inside that set get weights
that depend on whether they share a pseudo label and on how similar they are.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .tensor import minmax_normalize

MAX_ITER = 300


def fuse_embeddings(z_a: np.ndarray, z_b: np.ndarray) -> np.ndarray:
    z_a, z_b = np.asarray(z_a), np.asarray(z_b)
    if z_a.shape != z_b.shape:
        raise ShapeError(f"cannot fuse embeddings of shapes {z_a.shape} and {z_b.shape}")
    return 0.5 * (z_a + z_b)


def _sq_dists(z: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d = (z * z).sum(1)[:, None] - 2.0 * z @ centers.T + (centers * centers).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _kmeans_pp(z: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = z.shape[0]
    chosen = [int(rng.integers(n))]
    closest = _sq_dists(z, z[chosen])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            # every point coincides with a chosen centre; take an unused index
            unused = np.setdiff1d(np.arange(n), chosen)
            idx = int(unused[0])
        chosen.append(idx)
        closest = np.minimum(closest, _sq_dists(z, z[[idx]])[:, 0])
    return z[chosen].copy()


def lloyd(z: np.ndarray, centers: np.ndarray, max_iter: int = MAX_ITER, trace: list | None = None):
    """Lloyd iterations from ``centers``; returns (labels, centers, inertia).

    Stops once assignments no longer change.  An empty cluster is re-seeded
    with the point farthest from its current centre.  ``trace`` collects the
    distortion after every assignment step when given.
    """
    k = centers.shape[0]
    labels = None
    for _ in range(max_iter):
        d = _sq_dists(z, centers)
        new = d.argmin(axis=1)
        if trace is not None:
            trace.append(float(d[np.arange(len(z)), new].sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in range(k):
            members = labels == c
            if members.any():
                centers[c] = z[members].mean(axis=0)
            else:
                far = int(d[np.arange(len(z)), labels].argmax())
                centers[c] = z[far]
                labels[far] = c
                d[far] = 0.0
    d = _sq_dists(z, centers)
    inertia = float(d[np.arange(len(z)), labels].sum())
    return labels, centers, inertia


def kmeans(z: np.ndarray, k: int, seed: int, n_init: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """K-means++ seeded Lloyd's algorithm, best of ``n_init`` restarts."""
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= N, got k={k} for N={n}")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        labels, centers, inertia = lloyd(z, _kmeans_pp(z, k, rng))
        if best is None or inertia < best[2]:
            best = (labels, centers, inertia)
    return best[0], best[1]


def confidence_scores(z: np.ndarray, labels: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Softmax over samples of the negated distance to the assigned centre."""
    dist = np.linalg.norm(np.asarray(z) - centers[labels], axis=1)
    logits = -dist - (-dist).max()
    e = np.exp(logits)
    return e / e.sum()


def high_confidence_count(n: int, tau: float) -> int:
    # round half up; the 1e-9 guards against 2.4999999... from float products
    return int(math.floor(n * (1.0 - tau) + 0.5 + 1e-9))


def select_high_confidence(conf: np.ndarray, tau: float) -> np.ndarray:
    """Indices of the ``round(N(1 - tau))`` most confident samples, sorted.

    Ties are broken towards the lower index.
    """
    if not 0.0 <= tau < 1.0:
        raise ConfigError(f"tau must lie in [0, 1), got {tau}")
    conf = np.asarray(conf)
    m = high_confidence_count(len(conf), tau)
    order = np.lexsort((np.arange(len(conf)), -conf))
    return np.sort(order[:m])


@dataclass(frozen=True)
class TauSchedule:
    tau_start: float = 0.8
    tau_end: float = 0.2
    total_epochs: int = 400

    def __post_init__(self):
        if not 1.0 > self.tau_start >= self.tau_end >= 0.0:
            raise ConfigError(f"need 1 > tau_start >= tau_end >= 0, got {self.tau_start}, {self.tau_end}")
        if self.total_epochs < 1:
            raise ConfigError("total_epochs must be positive")


def tau_at(schedule: TauSchedule, epoch: int) -> float:
    """Linear interpolation from ``tau_start`` (epoch 0) to ``tau_end`` (last epoch)."""
    if not 0 <= epoch < schedule.total_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {schedule.total_epochs})")
    if schedule.total_epochs == 1:
        return schedule.tau_start
    frac = epoch / (schedule.total_epochs - 1)
    return schedule.tau_start + (schedule.tau_end - schedule.tau_start) * frac


def pseudo_label_correlation(labels) -> np.ndarray:
    labels = np.asarray(labels)
    return (labels[:, None] == labels[None, :]).astype(np.float64)


def check_exponents(beta: float, gamma: float) -> None:
    if not 0.0 < beta < 1.0:
        raise ConfigError(f"beta must lie in (0, 1), got {beta}")
    if not 1.0 <= gamma <= 5.0:
        raise ConfigError(f"gamma must lie in [1, 5], got {gamma}")


def modulation_weights(s: np.ndarray, q: np.ndarray, h, beta: float, gamma: float) -> np.ndarray:
    """Pairwise weights for one similarity matrix.

    Pairs with an endpoint outside ``h`` get 1.  Inside ``h``, with
    ``s_hat = minmax(s)``, same-label pairs get ``exp((1 - s_hat)**beta)``
    and different-label pairs ``exp((1 - s_hat)**gamma)``.
    """
    check_exponents(beta, gamma)
    s = np.asarray(s, dtype=np.float64)
    n = s.shape[0]
    gap = 1.0 - minmax_normalize(s)
    weighted = np.where(q == 1, np.exp(gap**beta), np.exp(gap**gamma))
    inside = np.zeros(n, dtype=bool)
    inside[np.asarray(h, dtype=np.int64)] = True
    both = inside[:, None] & inside[None, :]
    return np.where(both, weighted, 1.0)


@dataclass
class ClusterState:
    p: np.ndarray
    centers: np.ndarray
    conf: np.ndarray
    h: np.ndarray
    q: np.ndarray


def cluster_state(z: np.ndarray, k: int, tau: float, seed: int, n_init: int = 1) -> ClusterState:
    labels, centers = kmeans(z, k, seed, n_init=n_init)
    conf = confidence_scores(z, labels, centers)
    return ClusterState(
        p=labels,
        centers=centers,
        conf=conf,
        h=select_high_confidence(conf, tau),
        q=pseudo_label_correlation(labels),
    )
