"""Shared builders for small random training instances."""

import numpy as np

from ragc import csada, hca, objective
from ragc.config import RunConfig
from ragc.graphio import generate_sbm


def random_instance(seed, n=12, d_in=6, d=4, k=2, variant="full", tau=0.5, beta=0.7, gamma=2.0):
    """A graph, parameters, X_aug, structure buffer and frozen weights."""
    g = generate_sbm(k, n // k, 0.6, 0.1, d_in, 1.0, seed=seed)
    cfg = RunConfig(k=k, embed_dim=d, seed=seed, variant=variant, beta=beta, gamma=gamma)
    rng = np.random.default_rng(seed)
    x_aug = objective.prepare_x_aug(g, cfg)
    state = objective.init_state(g, cfg, rng)
    params = {name: v.copy() for name, v in state.params.items()}
    params["alpha_raw"] = np.array([[rng.normal()]])
    a_aug = g.a * rng.uniform(0.2, 1.0, g.a.shape)
    a_aug = np.triu(a_aug, 1) + np.triu(a_aug, 1).T
    fwd = objective.forward(params, x_aug, a_aug, variant)
    if variant == "no_csada":
        w_all = objective.unit_weights(g.n)
    else:
        z = csada.fuse_embeddings(fwd.views.z["a"].value, fwd.views.z["b"].value)
        cluster = csada.cluster_state(z, k, tau, seed=seed)
        w_all = {p: csada.modulation_weights(fwd.s[p].value, cluster.q, cluster.h, beta, gamma) for p in hca.PAIRS}
    return g, params, x_aug, a_aug, w_all
