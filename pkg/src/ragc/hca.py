"""Hybrid node/edge augmentation: smoothed features, encoders, similarity, structure refinement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Node

VIEWS = ("a", "b")
PAIRS = (("a", "a"), ("a", "b"), ("b", "a"), ("b", "b"))


def perturb_attributes(x: np.ndarray, sigma_n: float, mask_ratio: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Return a noisy copy and a randomly masked copy of ``x``.

    Each mask entry is zero with probability ``mask_ratio``.
    """
    if not 0.0 <= mask_ratio <= 1.0:
        raise ValueError(f"mask ratio must lie in [0, 1], got {mask_ratio}")
    if sigma_n < 0:
        raise ValueError(f"noise std must be non-negative, got {sigma_n}")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(x.shape)
    keep = rng.random(x.shape) >= mask_ratio
    return x + sigma_n * noise, x * keep


def laplacian_smooth(x: np.ndarray, l_tilde: np.ndarray, t: int) -> np.ndarray:
    """Apply the low-pass filter ``I - l_tilde`` to ``x`` ``t`` times."""
    if t < 0:
        raise ValueError(f"filter order must be non-negative, got {t}")
    filt = np.eye(l_tilde.shape[0]) - l_tilde
    out = np.asarray(x, dtype=np.float64)
    for _ in range(t):
        out = filt @ out
    return out


def build_x_aug(x, l_tilde, sigma_n, mask_ratio, t_n, t_m, seed) -> np.ndarray:
    x_noisy, x_masked = perturb_attributes(x, sigma_n, mask_ratio, seed)
    return 0.5 * (laplacian_smooth(x_noisy, l_tilde, t_n) + laplacian_smooth(x_masked, l_tilde, t_m))


@dataclass
class EncoderParams:
    """Linear encoder weights plus the unconstrained balance parameter.

    ``w`` maps view -> D x d node-encoder weight, ``u`` maps view -> N x d
    edge-encoder weight; ``alpha = logistic(alpha_raw)``.
    """

    w: dict[str, np.ndarray]
    u: dict[str, np.ndarray]
    alpha_raw: float = 0.0

    @classmethod
    def initialize(cls, n: int, d_in: int, d_out: int, rng: np.random.Generator) -> "EncoderParams":
        # uniform in +-1/sqrt(fan_in)
        def draw(fan_in):
            bound = 1.0 / np.sqrt(fan_in)
            return rng.uniform(-bound, bound, size=(fan_in, d_out))

        w = {v: draw(d_in) for v in VIEWS}
        u = {v: draw(n) for v in VIEWS}
        return cls(w=w, u=u, alpha_raw=0.0)

    @property
    def alpha(self) -> float:
        return float(1.0 / (1.0 + np.exp(-self.alpha_raw)))

    def as_dict(self) -> dict[str, np.ndarray]:
        return {
            "w_a": self.w["a"],
            "w_b": self.w["b"],
            "u_a": self.u["a"],
            "u_b": self.u["b"],
            "alpha_raw": np.array([[self.alpha_raw]]),
        }

    @classmethod
    def from_dict(cls, d: dict[str, np.ndarray]) -> "EncoderParams":
        return cls(
            w={"a": d["w_a"], "b": d["w_b"]},
            u={"a": d["u_a"], "b": d["u_b"]},
            alpha_raw=float(np.asarray(d["alpha_raw"]).reshape(-1)[0]),
        )


def encode_nodes(x_aug: np.ndarray, w_a: Node, w_b: Node) -> tuple[Node, Node]:
    x = T.constant(x_aug)
    return T.row_l2_normalize(x @ w_a), T.row_l2_normalize(x @ w_b)


def edge_input(a_aug: np.ndarray) -> np.ndarray:
    """Matrix fed to the edge encoders: the buffer with a unit diagonal floor."""
    return a_aug + np.eye(a_aug.shape[0])


def encode_edges(a_aug: np.ndarray, u_a: Node, u_b: Node) -> tuple[Node, Node]:
    """Edge-level embeddings; the buffer enters as a constant."""
    a = T.constant(edge_input(a_aug))
    return T.row_l2_normalize(a @ u_a), T.row_l2_normalize(a @ u_b)


@dataclass
class AugmentedViews:
    z: dict[str, Node]
    e: dict[str, Node] | None = None


def contrastive_similarity(views: AugmentedViews, alpha: Node | float, l: str, m: str) -> Node:
    """``alpha * Z^l Z^m' + (1 - alpha) * E^l E^m'``.

    ``alpha`` may be a 1x1 node (learned) or a plain float.  Without
    edge views only the node term is used, whatever ``alpha`` is.
    """
    zz = views.z[l] @ views.z[m].T
    if views.e is None:
        return zz
    ee = views.e[l] @ views.e[m].T
    if isinstance(alpha, Node):
        return T.scalar_mul(alpha, zz) + T.scalar_mul(1.0 - alpha, ee)
    return alpha * zz + (1.0 - alpha) * ee


def similarity_matrices(views: AugmentedViews, alpha) -> dict[tuple[str, str], Node]:
    return {(l, m): contrastive_similarity(views, alpha, l, m) for l, m in PAIRS}


def refine_structure(z_a, z_b, e_a, e_b, buffer: np.ndarray) -> np.ndarray:
    """Gate the structure buffer by normalized node+edge cross-view agreement.

    Inputs are plain arrays (detached embeddings).  Entries can only shrink
    and the support can only contract.
    """
    agreement = z_a @ z_b.T + e_a @ e_b.T
    return T.minmax_normalize(agreement) * buffer
