"""External clustering metrics (ACC, NMI, ARI, macro-F1) and multi-seed aggregation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

METRICS = ("acc", "nmi", "ari", "f1")


def _validate(pred, truth, minimum: int = 1) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.shape != truth.shape:
        raise ValueError(f"label vectors differ in length: {pred.size} vs {truth.size}")
    if pred.size < minimum:
        raise ValueError(f"need at least {minimum} samples, got {pred.size}")
    return pred, truth


def contingency(pred, truth) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Counts table with rows = predicted clusters, columns = true classes."""
    p_vals, p_idx = np.unique(pred, return_inverse=True)
    t_vals, t_idx = np.unique(truth, return_inverse=True)
    table = np.zeros((p_vals.size, t_vals.size), dtype=np.int64)
    np.add.at(table, (p_idx, t_idx), 1)
    return table, p_vals, t_vals


def _assignment(table: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cluster/class pairing that maximizes matches, then summed per-class F1.

    The secondary term ``2 n_rc / (n_r + n_c)`` lies in [0, 1] per pair, so
    scaling it below 1 / (K + 1) never overturns a difference in matches.
    Ties in matches are thereby resolved by the partition itself, not by
    the order of cluster ids.
    """
    sizes = table.sum(1)[:, None] + table.sum(0)[None, :]
    f1 = 2.0 * table / sizes
    eps = 1.0 / (max(table.shape) + 1)
    return linear_sum_assignment(-(table + eps * f1))


def best_mapping(pred, truth) -> dict:
    """Cluster id -> class value maximizing matches (bijective where sizes allow).

    Clusters left without a class (more clusters than classes) are absent
    from the mapping.
    """
    pred, truth = _validate(pred, truth)
    table, p_vals, t_vals = contingency(pred, truth)
    rows, cols = _assignment(table)
    return {p_vals[r].item(): t_vals[c].item() for r, c in zip(rows, cols)}


def clustering_accuracy(pred, truth) -> float:
    pred, truth = _validate(pred, truth)
    table, _, _ = contingency(pred, truth)
    rows, cols = _assignment(table)
    return float(table[rows, cols].sum() / pred.size)


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(pred, truth, average: str = "geometric") -> float:
    """Normalized mutual information in nats.

    ``average`` picks the normalizer: ``"geometric"`` (sqrt(H_p H_t)) or
    ``"arithmetic"`` ((H_p + H_t) / 2).
    """
    pred, truth = _validate(pred, truth)
    n = pred.size
    table, _, _ = contingency(pred, truth)
    h_p = _entropy(table.sum(1), n)
    h_t = _entropy(table.sum(0), n)
    if h_p == 0.0 or h_t == 0.0:
        return 1.0 if h_p == h_t else 0.0
    nz = table > 0
    joint = table[nz] / n
    outer = np.outer(table.sum(1), table.sum(0))[nz] / (n * n)
    mi = float((joint * np.log(joint / outer)).sum())
    if average == "geometric":
        denom = math.sqrt(h_p * h_t)
    elif average == "arithmetic":
        denom = 0.5 * (h_p + h_t)
    else:
        raise ValueError(f"unknown NMI average {average!r}")
    return min(max(mi / denom, 0.0), 1.0)


def _pairs(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float((x * (x - 1) / 2).sum())


def ari(pred, truth) -> float:
    """Adjusted Rand index from pair counts of the contingency table.

    When the chance-corrected denominator vanishes (both partitions trivial
    in the same way) the result is 1 for identical partitions, else 0.
    """
    pred, truth = _validate(pred, truth, minimum=2)
    table, _, _ = contingency(pred, truth)
    index = _pairs(table)
    a, b = _pairs(table.sum(1)), _pairs(table.sum(0))
    expected = a * b / _pairs([pred.size])
    maximum = 0.5 * (a + b)
    if maximum == expected:
        return 1.0 if index == maximum else 0.0
    return (index - expected) / (maximum - expected)


def macro_f1(pred, truth) -> float:
    """Unweighted mean over true classes of per-class F1 under the ACC mapping.

    Among mappings with equal accuracy the one with the highest macro-F1 is used.
    """
    pred, truth = _validate(pred, truth)
    mapping = best_mapping(pred, truth)
    missing = object()
    mapped = np.array([mapping.get(p.item(), missing) for p in pred], dtype=object)
    scores = []
    for c in np.unique(truth):
        c = c.item()
        is_pred = mapped == c
        is_true = truth == c
        tp = int(np.sum(is_pred & is_true))
        precision = tp / is_pred.sum() if is_pred.any() else 0.0
        recall = tp / is_true.sum()
        scores.append(0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall))
    return float(np.mean(scores))


def evaluate(pred, truth, nmi_average: str = "geometric") -> dict[str, float]:
    return {
        "acc": clustering_accuracy(pred, truth),
        "nmi": nmi(pred, truth, average=nmi_average),
        "ari": ari(pred, truth),
        "f1": macro_f1(pred, truth),
    }


@dataclass
class MetricReport:
    """Per-seed metric values with mean and population standard deviation."""

    seeds: list[int]
    per_seed: dict[str, list[float]] = field(default_factory=dict)

    @property
    def n_seeds(self) -> int:
        return len(self.seeds)

    def mean(self, metric: str) -> float:
        return float(np.mean(self.per_seed[metric]))

    def std(self, metric: str) -> float:
        return float(np.std(self.per_seed[metric]))

    def best(self, metric: str) -> float:
        return float(np.max(self.per_seed[metric]))

    def formatted(self, metric: str) -> str:
        """``mm.mm±s.ss`` in percent."""
        return f"{100 * self.mean(metric):.2f}±{100 * self.std(metric):.2f}"

    def to_dict(self) -> dict:
        return {
            "seeds": list(self.seeds),
            "metrics": {
                m: {
                    "per_seed": [float(v) for v in self.per_seed[m]],
                    "mean": self.mean(m),
                    "std": self.std(m),
                    "formatted": self.formatted(m),
                }
                for m in METRICS
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)


def aggregate(reports: list[dict[str, float]], seeds: list[int] | None = None) -> MetricReport:
    if not reports:
        raise ValueError("aggregate needs at least one report")
    seeds = list(range(len(reports))) if seeds is None else list(seeds)
    if len(seeds) != len(reports):
        raise ValueError("one seed per report expected")
    return MetricReport(seeds=seeds, per_seed={m: [float(r[m]) for r in reports] for m in METRICS})


def format_table(rows: list[tuple[str, MetricReport]], label: str = "run") -> str:
    """Aligned text table, one row per report, ``mean±std`` cells in percent."""
    header = [label] + [m.upper() for m in METRICS]
    body = [[name] + [rep.formatted(m) for m in METRICS] for name, rep in rows]
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in [header] + body]
    return "\n".join(lines) + "\n"
