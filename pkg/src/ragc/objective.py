"""Weighted contrastive objective and the end-to-end training loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import csada, hca
from . import tensor as T
from .config import RunConfig
from .errors import NumericalError
from .graphio import Graph, normalized_operators
from .tensor import Node

log = logging.getLogger(__name__)

PARAM_NAMES = ("w_a", "w_b", "u_a", "u_b", "alpha_raw")


def _other(view: str) -> str:
    return "b" if view == "a" else "a"


def per_node_loss(i: int, l: str, s_all: dict, w_all: dict) -> Node:
    """Loss of anchor ``i`` in view ``l``.

    Positive: the same node in the other view.  Negatives: every other node
    ``j != i`` in both views.  Weights are constants.
    """
    m = _other(l)
    n = s_all[(l, m)].shape[0]
    sel = np.zeros((n, 1))
    sel[i, 0] = 1.0
    pick = T.constant(sel.T)  # 1 x N row selector

    def row(view):
        logits = s_all[(l, view)] * T.constant(w_all[(l, view)])
        return pick @ T.exp(logits)  # 1 x N

    cross, same = row(m), row(l)
    off = np.ones((n, 1))
    off[i, 0] = 0.0
    positive = cross @ T.constant(sel)
    negatives = (cross + same) @ T.constant(off)
    return T.log(positive + negatives) - T.log(positive)


def node_losses(s_all: dict, w_all: dict, l: str) -> Node:
    """Per-anchor losses of view ``l`` as an N x 1 column."""
    m = _other(l)
    logit_cross = s_all[(l, m)] * T.constant(w_all[(l, m)])
    logit_same = s_all[(l, l)] * T.constant(w_all[(l, l)])
    exp_cross, exp_same = T.exp(logit_cross), T.exp(logit_same)
    # denominator: every cross-view term plus same-view terms with j != i
    denom = T.row_sum(exp_cross) + T.row_sum(exp_same) - T.diagonal(exp_same)
    return T.log(denom) - T.diagonal(logit_cross)


def total_loss(s_all: dict, w_all: dict) -> Node:
    """Mean of the per-anchor losses over both views and all nodes."""
    n = s_all[("a", "a")].shape[0]
    both = T.total_sum(node_losses(s_all, w_all, "a")) + T.total_sum(node_losses(s_all, w_all, "b"))
    return T.scale(both, 1.0 / (2 * n))


def unit_weights(n: int) -> dict:
    return {pair: np.ones((n, n)) for pair in hca.PAIRS}


@dataclass
class Forward:
    """One forward pass: views, similarities and the parameter leaves used."""

    leaves: dict[str, Node]
    views: hca.AugmentedViews
    alpha: Node | float
    s: dict


def forward(params: dict[str, np.ndarray], x_aug: np.ndarray, a_aug: np.ndarray | None, variant: str = "full") -> Forward:
    """Encode both views and build the four similarity matrices.

    ``no_hca`` drops the edge encoders and fixes the balance at 1, so only
    ``w_a`` and ``w_b`` enter the tape.
    """
    use_edges = variant != "no_hca"
    names = PARAM_NAMES if use_edges else ("w_a", "w_b")
    leaves = {name: T.parameter(params[name], name) for name in names}
    z_a, z_b = hca.encode_nodes(x_aug, leaves["w_a"], leaves["w_b"])
    if use_edges:
        e_a, e_b = hca.encode_edges(a_aug, leaves["u_a"], leaves["u_b"])
        views = hca.AugmentedViews(z={"a": z_a, "b": z_b}, e={"a": e_a, "b": e_b})
        alpha = T.sigmoid(leaves["alpha_raw"])
    else:
        views = hca.AugmentedViews(z={"a": z_a, "b": z_b})
        alpha = 1.0
    return Forward(leaves, views, alpha, hca.similarity_matrices(views, alpha))


def loss_value(params, x_aug, a_aug, w_all, variant="full") -> float:
    """Scalar loss with everything except ``params`` held fixed."""
    fwd = forward(params, x_aug, a_aug, variant)
    return float(total_loss(fwd.s, w_all).value[0, 0])


def loss_and_grads(params, x_aug, a_aug, w_all, variant="full") -> tuple[float, dict[str, np.ndarray]]:
    fwd = forward(params, x_aug, a_aug, variant)
    loss = total_loss(fwd.s, w_all)
    return float(loss.value[0, 0]), T.backward(loss)


@dataclass
class Adam:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        """Return updated copies of ``params``; parameters without a gradient are kept."""
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise NumericalError(f"non-finite gradient for {name}")
        self.t += 1
        out = dict(params)
        for name, g in grads.items():
            m = self.beta1 * self.m.get(name, 0.0) + (1 - self.beta1) * g
            v = self.beta2 * self.v.get(name, 0.0) + (1 - self.beta2) * g * g
            self.m[name], self.v[name] = m, v
            m_hat = m / (1 - self.beta1**self.t)
            v_hat = v / (1 - self.beta2**self.t)
            out[name] = params[name] - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return out


def optimizer_step(state: "ModelState", grads: dict[str, np.ndarray], lr: float | None = None) -> "ModelState":
    if lr is not None:
        state.optimizer.lr = lr
    state.params = state.optimizer.step(state.params, grads)
    return state


@dataclass
class ModelState:
    params: dict[str, np.ndarray]
    a_aug: np.ndarray
    optimizer: Adam
    epoch: int = 0

    @property
    def alpha(self) -> float:
        return float(1.0 / (1.0 + np.exp(-self.params["alpha_raw"][0, 0])))


@dataclass
class EpochInfo:
    """Per-epoch snapshot handed to the ``on_epoch`` callback."""

    epoch: int
    loss: float
    tau: float
    views: dict[str, np.ndarray]
    s: dict
    a_aug_before: np.ndarray
    a_aug_after: np.ndarray
    cluster: csada.ClusterState


@dataclass
class TrainResult:
    state: ModelState
    z: np.ndarray
    labels: np.ndarray
    loss_history: list[float]
    x_aug: np.ndarray
    embeddings_by_epoch: list[np.ndarray] | None = None


def _seed_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    init_ss, kmeans_ss = np.random.SeedSequence([seed, 1]).spawn(2)
    return np.random.default_rng(init_ss), np.random.default_rng(kmeans_ss)


def prepare_x_aug(g: Graph, cfg: RunConfig) -> np.ndarray:
    _, l_tilde = normalized_operators(g)
    if cfg.variant == "no_hca":
        return hca.build_x_aug(g.x, l_tilde, 0.0, 0.0, cfg.t_n, cfg.t_m, cfg.seed)
    return hca.build_x_aug(g.x, l_tilde, cfg.sigma_n, cfg.mask_ratio, cfg.t_n, cfg.t_m, cfg.seed)


def init_state(g: Graph, cfg: RunConfig, rng: np.random.Generator) -> ModelState:
    enc = hca.EncoderParams.initialize(g.n, g.d, cfg.embed_dim, rng)
    return ModelState(params=enc.as_dict(), a_aug=g.a.copy(), optimizer=Adam(cfg.lr))


def train(g: Graph, cfg: RunConfig, on_epoch: Callable[[EpochInfo], None] | None = None) -> TrainResult:
    """Train the two-view encoders and return the final clustering.

    Per epoch: encode nodes and edges, refine the structure buffer, build
    similarities, cluster the fused embedding, weight the pairs, take one
    Adam step on the weighted loss.  A final K-means on the fused embedding
    gives the labels.
    """
    k = cfg.k if g.k is None else g.k
    init_rng, km_rng = _seed_streams(cfg.seed)
    x_aug = prepare_x_aug(g, cfg)
    state = init_state(g, cfg, init_rng)
    schedule = csada.TauSchedule(cfg.tau_start, cfg.tau_end, cfg.epochs)
    use_edges = cfg.variant != "no_hca"
    history: list[float] = []
    snapshots = [] if cfg.snapshot_embeddings else None

    for epoch in range(cfg.epochs):
        fwd = forward(state.params, x_aug, state.a_aug, cfg.variant)
        z_a, z_b = fwd.views.z["a"].value, fwd.views.z["b"].value
        before = state.a_aug
        if use_edges:
            state.a_aug = hca.refine_structure(
                z_a, z_b, fwd.views.e["a"].value, fwd.views.e["b"].value, state.a_aug
            )
        tau = cfg.tau_start if cfg.variant == "no_dynamic_tau" else csada.tau_at(schedule, epoch)
        z = csada.fuse_embeddings(z_a, z_b)
        cluster = csada.cluster_state(z, k, tau, seed=int(km_rng.integers(2**63)))
        if cfg.variant == "no_csada":
            w_all = unit_weights(g.n)
        else:
            w_all = {
                pair: csada.modulation_weights(fwd.s[pair].value, cluster.q, cluster.h, cfg.beta, cfg.gamma)
                for pair in hca.PAIRS
            }
        loss = total_loss(fwd.s, w_all)
        value = float(loss.value[0, 0])
        if not np.isfinite(value) or value < 0:
            raise NumericalError(f"epoch {epoch}: loss {value!r} is invalid")
        grads = T.backward(loss)
        history.append(value)
        if on_epoch is not None:
            on_epoch(
                EpochInfo(
                    epoch=epoch,
                    loss=value,
                    tau=tau,
                    views={name: node.value for name, node in _view_items(fwd.views)},
                    s={pair: node.value for pair, node in fwd.s.items()},
                    a_aug_before=before,
                    a_aug_after=state.a_aug,
                    cluster=cluster,
                )
            )
        try:
            optimizer_step(state, grads)
        except NumericalError as exc:
            raise NumericalError(f"epoch {epoch}: {exc}") from None
        state.epoch = epoch + 1
        if snapshots is not None:
            snapshots.append(z)
        if epoch % 50 == 0:
            log.debug("epoch %d loss %.6f tau %.3f alpha %.4f", epoch, value, tau, state.alpha)

    fwd = forward(state.params, x_aug, state.a_aug, cfg.variant)
    z = csada.fuse_embeddings(fwd.views.z["a"].value, fwd.views.z["b"].value)
    labels, _ = csada.kmeans(z, k, seed=int(km_rng.integers(2**63)), n_init=cfg.kmeans_restarts)
    return TrainResult(state, z, labels, history, x_aug, snapshots)


def _view_items(views: hca.AugmentedViews):
    for v, node in views.z.items():
        yield f"z_{v}", node
    for v, node in (views.e or {}).items():
        yield f"e_{v}", node
