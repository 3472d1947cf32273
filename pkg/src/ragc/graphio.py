"""Attributed-graph datasets: CSV ingestion, normalized operators, SBM generator.

On-disk layout of a dataset directory (no headers, UTF-8, LF or CRLF)::

    features.csv   N lines of D comma-separated decimals
    edges.csv      one "src,dst" pair per line, 0-indexed
    labels.csv     optional, N lines with one integer each
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DatasetError

FEATURES = "features.csv"
EDGES = "edges.csv"
LABELS = "labels.csv"


@dataclass(frozen=True)
class Graph:
    """Attribute matrix ``x`` (N x D) and a symmetric 0/1 adjacency ``a`` (N x N).

    ``labels`` holds ground-truth classes remapped to 0..K-1; the original
    values live in ``label_values`` so reports can translate back.
    """

    x: np.ndarray
    a: np.ndarray
    labels: np.ndarray | None = None
    label_values: np.ndarray | None = field(default=None, repr=False)
    k: int | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        a = np.asarray(self.a, dtype=np.float64)
        if x.ndim != 2:
            raise ValueError("features must be a matrix")
        n = x.shape[0]
        if a.shape != (n, n):
            raise ValueError(f"adjacency shape {a.shape} does not match {n} nodes")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency is not symmetric")
        if np.any(np.diag(a) != 0):
            raise ValueError("adjacency has self-loops")
        if not np.all((a == 0) | (a == 1)):
            raise ValueError("adjacency entries must be 0 or 1")
        x.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "a", a)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (n,):
                raise ValueError(f"expected {n} labels, got {labels.shape}")
            k = len(np.unique(labels))
            if self.k is not None and self.k != k:
                raise ValueError(f"k={self.k} but labels hold {k} distinct values")
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)
            object.__setattr__(self, "k", k)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def original_labels(self) -> np.ndarray | None:
        if self.labels is None:
            return None
        if self.label_values is None:
            return self.labels
        return self.label_values[self.labels]


def _read_lines(path: Path) -> list[str]:
    if not path.is_file():
        raise DatasetError("file not found", path)
    text = path.read_bytes().decode("utf-8")
    lines = text.replace("\r\n", "\n").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def _parse_features(path: Path) -> np.ndarray:
    rows: list[list[float]] = []
    width = None
    for lineno, line in enumerate(_read_lines(path), start=1):
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise DatasetError(f"ragged row: expected {width} values, found {len(cells)}", path, lineno)
        try:
            row = [float(c) for c in cells]
        except ValueError:
            raise DatasetError(f"non-numeric cell in {line!r}", path, lineno) from None
        if not all(np.isfinite(row)):
            raise DatasetError("non-finite value", path, lineno)
        rows.append(row)
    if not rows:
        raise DatasetError("no feature rows", path)
    return np.array(rows, dtype=np.float64)


def _parse_int_cell(cell: str, path: Path, lineno: int) -> int:
    try:
        return int(cell.strip())
    except ValueError:
        raise DatasetError(f"non-integer cell {cell!r}", path, lineno) from None


def _parse_edges(path: Path, n: int) -> np.ndarray:
    a = np.zeros((n, n))
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != 2:
            raise DatasetError(f"expected 'src,dst', found {line!r}", path, lineno)
        i, j = (_parse_int_cell(c, path, lineno) for c in cells)
        for idx in (i, j):
            if not 0 <= idx < n:
                raise DatasetError(f"node index {idx} out of range for {n} nodes", path, lineno)
        if i != j:
            a[i, j] = a[j, i] = 1.0
    return a


def _parse_labels(path: Path, n: int) -> np.ndarray:
    lines = _read_lines(path)
    if len(lines) != n:
        raise DatasetError(f"expected {n} labels, found {len(lines)}", path)
    return np.array([_parse_int_cell(c, path, i) for i, c in enumerate(lines, start=1)], dtype=np.int64)


def load_dataset(directory) -> Graph:
    """Read a dataset directory into a :class:`Graph`.

    Edges are symmetrized, duplicates collapse, and self-loops are dropped
    (they are re-added when the normalized operators are built).
    """
    root = Path(directory)
    x = _parse_features(root / FEATURES)
    a = _parse_edges(root / EDGES, x.shape[0])
    labels_path = root / LABELS
    if not labels_path.exists():
        return Graph(x, a)
    raw = _parse_labels(labels_path, x.shape[0])
    values, remapped = np.unique(raw, return_inverse=True)
    return Graph(x, a, labels=remapped, label_values=values)


def _format_float(v: float) -> str:
    return repr(float(v))


def save_dataset(g: Graph, directory) -> Path:
    """Write ``g`` in the CSV layout read by :func:`load_dataset`.

    Floats are written with ``repr`` so a reload reproduces them exactly.
    """
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / FEATURES, "w", encoding="utf-8", newline="\n") as fh:
        for row in g.x:
            fh.write(",".join(_format_float(v) for v in row) + "\n")
    src, dst = np.nonzero(np.triu(g.a, k=1))
    with open(root / EDGES, "w", encoding="utf-8", newline="\n") as fh:
        for i, j in zip(src, dst):
            fh.write(f"{i},{j}\n")
    if g.labels is not None:
        with open(root / LABELS, "w", encoding="utf-8", newline="\n") as fh:
            for v in g.original_labels:
                fh.write(f"{int(v)}\n")
    return root


def normalized_operators(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric-normalized adjacency with self-loops and its Laplacian.

    Returns ``(a_tilde, l_tilde)`` with ``a_tilde = D^-1/2 (A + I) D^-1/2``
    (D the degrees of A + I) and ``l_tilde = I - a_tilde``.
    """
    n = g.n
    a_hat = g.a + np.eye(n)
    inv_sqrt = 1.0 / np.sqrt(a_hat.sum(axis=1))
    a_tilde = a_hat * inv_sqrt[:, None] * inv_sqrt[None, :]
    return a_tilde, np.eye(n) - a_tilde


def generate_sbm(
    blocks: int,
    per_block: int,
    p_in: float,
    p_out: float,
    feature_dim: int,
    feature_shift: float,
    seed: int,
) -> Graph:
    """Stochastic block model with Gaussian node attributes.

    Block ``b`` gets features drawn from N(mu_b, I) where ``mu_b`` has norm
    ``feature_shift`` and points along coordinate ``b mod feature_dim``.
    """
    if not 0.0 <= p_out <= p_in <= 1.0:
        raise ConfigError(f"need 0 <= p_out <= p_in <= 1, got p_in={p_in}, p_out={p_out}")
    if blocks < 1 or per_block < 1 or feature_dim < 1:
        raise ConfigError("blocks, per_block and feature_dim must be positive")
    rng = np.random.default_rng(seed)
    n = blocks * per_block
    labels = np.repeat(np.arange(blocks), per_block)
    same = labels[:, None] == labels[None, :]
    prob = np.where(same, p_in, p_out)
    draws = rng.random((n, n))
    upper = np.triu(draws < prob, k=1)
    a = (upper | upper.T).astype(np.float64)
    x = rng.standard_normal((n, feature_dim))
    x[np.arange(n), labels % feature_dim] += feature_shift
    return Graph(x, a, labels=labels)
