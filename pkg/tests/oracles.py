"""Reference implementations used only by the tests.

These are written in the plainest possible form (Python loops, scalar math)
and share no code with the package paths they check.
"""

import itertools
import math

import numpy as np

VIEWS = ("a", "b")


def scalar_anchor_loss(i, l, s, w):
    """Loss of node i in view l by direct enumeration of the two sums.

    s and w map (l, m) to nested lists / arrays indexed [i][j].
    """
    n = len(s[("a", "a")])
    num = 0.0
    for m in VIEWS:
        if m != l:
            num += math.exp(w[(l, m)][i][i] * s[(l, m)][i][i])
    neg = 0.0
    for j in range(n):
        if j == i:
            continue
        for m in VIEWS:
            neg += math.exp(w[(l, m)][i][j] * s[(l, m)][i][j])
    return -math.log(num / (num + neg))


def scalar_total_loss(s, w):
    n = len(s[("a", "a")])
    total = 0.0
    for l in VIEWS:
        for i in range(n):
            total += scalar_anchor_loss(i, l, s, w)
    return total / (2 * n)


def direct_infonce(s):
    """Unweighted two-view InfoNCE on similarity blocks, vectorized numpy."""
    n = s[("a", "a")].shape[0]
    off = ~np.eye(n, dtype=bool)
    losses = []
    for l, m in (("a", "b"), ("b", "a")):
        pos = np.exp(np.diag(s[(l, m)]))
        neg = (np.exp(s[(l, m)]) * off).sum(1) + (np.exp(s[(l, l)]) * off).sum(1)
        losses.append(-np.log(pos / (pos + neg)))
    return float(np.mean(np.concatenate(losses)))


def central_difference(f, params, h=1e-5):
    """Gradient of scalar f(params dict) by central differences, entry by entry."""
    grads = {}
    for name, value in params.items():
        g = np.zeros_like(value)
        for idx in np.ndindex(value.shape):
            plus = {k: v.copy() for k, v in params.items()}
            minus = {k: v.copy() for k, v in params.items()}
            plus[name][idx] += h
            minus[name][idx] -= h
            g[idx] = (f(plus) - f(minus)) / (2 * h)
        grads[name] = g
    return grads


def relative_error(a, b, floor=1e-8):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


# --- clustering metrics ---------------------------------------------------


def all_mappings(pred, truth):
    """Every injective map from predicted ids into class ids padded with dummies."""
    p_ids = sorted(set(pred))
    t_ids = sorted(set(truth))
    k = max(len(p_ids), len(t_ids))
    targets = t_ids + [("dummy", i) for i in range(k - len(t_ids))]
    for perm in itertools.permutations(targets, len(p_ids)):
        yield dict(zip(p_ids, perm))


def matches(pred, truth, mapping):
    return sum(1 for p, t in zip(pred, truth) if mapping[p] == t)


def brute_accuracy(pred, truth):
    return max(matches(pred, truth, mp) for mp in all_mappings(pred, truth)) / len(pred)


def optimal_mappings(pred, truth):
    best = max(matches(pred, truth, mp) for mp in all_mappings(pred, truth))
    return [mp for mp in all_mappings(pred, truth) if matches(pred, truth, mp) == best]


def f1_under(pred, truth, mapping):
    scores = []
    for c in sorted(set(truth)):
        tp = sum(1 for p, t in zip(pred, truth) if mapping[p] == c and t == c)
        n_pred = sum(1 for p in pred if mapping[p] == c)
        n_true = sum(1 for t in truth if t == c)
        precision = tp / n_pred if n_pred else 0.0
        recall = tp / n_true
        scores.append(0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall))
    return sum(scores) / len(scores)


def brute_nmi(pred, truth):
    n = len(pred)
    p_ids, t_ids = sorted(set(pred)), sorted(set(truth))
    pp = {a: sum(1 for x in pred if x == a) / n for a in p_ids}
    pt = {b: sum(1 for x in truth if x == b) / n for b in t_ids}
    h_p = -sum(v * math.log(v) for v in pp.values())
    h_t = -sum(v * math.log(v) for v in pt.values())
    if h_p == 0 or h_t == 0:
        return 1.0 if h_p == h_t else 0.0
    mi = 0.0
    for a in p_ids:
        for b in t_ids:
            joint = sum(1 for x, y in zip(pred, truth) if x == a and y == b) / n
            if joint > 0:
                mi += joint * math.log(joint / (pp[a] * pt[b]))
    return mi / math.sqrt(h_p * h_t)


def brute_ari(pred, truth):
    """Adjusted Rand index by enumerating every unordered pair of samples."""
    n = len(pred)
    same_both = same_pred = same_truth = 0
    for i, j in itertools.combinations(range(n), 2):
        sp = pred[i] == pred[j]
        st = truth[i] == truth[j]
        same_pred += sp
        same_truth += st
        same_both += sp and st
    total = n * (n - 1) / 2
    expected = same_pred * same_truth / total
    maximum = (same_pred + same_truth) / 2
    if maximum == expected:
        return 1.0 if same_both == maximum else 0.0
    return (same_both - expected) / (maximum - expected)
