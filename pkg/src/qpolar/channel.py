"""Discrete memoryless channels and their scalar functionals.

A :class:`Channel` is a ``q x m`` row-stochastic matrix ``W[x, y] = W(y|x)``
together with a label for every output column.  Labels are either plain
integers (atomic symbols) or tuples built by the transforms in
:mod:`qpolar.kernels`; nested tuples share their sub-labels, so deep labels
cost nothing extra to store.

All quantities are computed with the uniform input law.  "Normalized"
capacities use base-``q`` logarithms so they live in ``[0, 1]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Hashable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import xlogy

from .errors import (
    BudgetTooSmall,
    DuplicateLabel,
    EmptyAlphabet,
    EqualInputs,
    FileParseError,
    GroupSizeMismatch,
    IndexOutOfRange,
    NegativeEntry,
    NonStochasticRow,
    OutOfRange,
)

ROW_SUM_TOL = 1e-9
MERGE_RTOL = 1e-10
# the greedy pass sees at most GREEDY_FACTOR * budget columns (capped); a
# posterior-grid bucketing pre-merge gets larger alphabets down to that size
GREEDY_FACTOR = 4
GREEDY_CAP = 2048
GRID_BITS = 20

OutputLabel = Hashable


class Tag(NamedTuple):
    """Randomness index carried in an output label (``kind`` is ``"pi"`` or ``"r"``)."""

    kind: str
    value: int


class Channel:
    """Immutable finite-input, finite-output channel.

    Use :func:`make_channel` to build one from user data; the constructor
    itself trusts its arguments.
    """

    __slots__ = ("matrix", "outputs")

    def __init__(self, matrix: np.ndarray, outputs: Sequence[OutputLabel]):
        matrix = np.array(matrix, dtype=float)
        matrix.setflags(write=False)
        self.matrix = matrix
        self.outputs = tuple(outputs)

    @property
    def q(self) -> int:
        return self.matrix.shape[0]

    @property
    def m(self) -> int:
        return self.matrix.shape[1]

    def index(self, label: OutputLabel) -> int:
        try:
            return self.outputs.index(label)
        except ValueError:
            raise IndexOutOfRange(f"unknown output label {label!r}") from None

    def __repr__(self) -> str:
        return f"Channel(q={self.q}, m={self.m})"


class Capacity(NamedTuple):
    normalized: float
    nats: float


@dataclass(frozen=True)
class MetricsReport:
    capacity_normalized: float
    capacity_nats: float
    z_avg: float
    z_max: float
    ml_error: float
    z_profile: Optional[tuple] = None


def make_channel(matrix, labels: Optional[Sequence[OutputLabel]] = None) -> Channel:
    """Validate ``matrix`` (rows are inputs) and return a :class:`Channel`.

    Rows must sum to one within ``1e-9``; they are renormalized exactly.
    """
    mat = np.array(matrix, dtype=float)
    if mat.ndim != 2 or mat.shape[0] < 2 or mat.shape[1] < 1:
        raise EmptyAlphabet(f"need at least 2 inputs and 1 output, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise NonStochasticRow("matrix contains non-finite entries")
    if np.any(mat < 0):
        x, y = np.argwhere(mat < 0)[0]
        raise NegativeEntry(f"W({y}|{x}) = {mat[x, y]} is negative")
    sums = mat.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
    if bad.size:
        raise NonStochasticRow(f"row {bad[0]} sums to {sums[bad[0]]!r}")
    mat = mat / sums[:, None]
    if labels is None:
        labels = range(mat.shape[1])
    labels = tuple(labels)
    if len(labels) != mat.shape[1]:
        raise EmptyAlphabet(f"{len(labels)} labels for {mat.shape[1]} outputs")
    if len(set(labels)) != len(labels):
        raise DuplicateLabel("output labels must be distinct")
    return Channel(mat, labels)


def noiseless_channel(q: int) -> Channel:
    return make_channel(np.eye(q))


def useless_channel(q: int, m: int = 1) -> Channel:
    return make_channel(np.full((q, m), 1.0 / m))


def random_channel(q: int, m: int, rng: np.random.Generator, sparsity: float = 0.0) -> Channel:
    """Dirichlet(1) rows; with ``sparsity > 0`` entries are zeroed at that rate."""
    mat = rng.dirichlet(np.ones(m), size=q)
    if sparsity > 0:
        mask = rng.random((q, m)) < sparsity
        mask[np.arange(q), rng.integers(0, m, size=q)] = False
        mat = np.where(mask, 0.0, mat)
        mat /= mat.sum(axis=1, keepdims=True)
    return make_channel(mat)


# ---------------------------------------------------------------- functionals

def _column_information(cols: np.ndarray) -> np.ndarray:
    """Per-column contribution to the symmetric capacity in nats, input axis 0."""
    q = cols.shape[0]
    s = cols.sum(axis=0)
    return (xlogy(cols, cols).sum(axis=0) - xlogy(s, s / q)) / q


def mutual_information(W: Channel, px) -> float:
    """I(X;Y) in nats under input law ``px``."""
    px = np.asarray(px, dtype=float)
    joint = px[:, None] * W.matrix
    py = joint.sum(axis=0)
    ratio = np.divide(W.matrix, py, out=np.ones_like(W.matrix), where=py > 0)
    return float(xlogy(joint, ratio).sum())


def symmetric_capacity(W: Channel) -> Capacity:
    nats = float(max(_column_information(W.matrix).sum(), 0.0))
    return Capacity(nats / math.log(W.q), nats)


def pairwise_z_matrix(W: Channel) -> np.ndarray:
    """``Z[x, x'] = sum_y sqrt(W(y|x) W(y|x'))``; ones on the diagonal."""
    r = np.sqrt(W.matrix)
    z = np.clip(r @ r.T, 0.0, 1.0)
    np.fill_diagonal(z, 1.0)
    return z


def pairwise_z(W: Channel, x: int, x2: int) -> float:
    for v in (x, x2):
        if not 0 <= v < W.q:
            raise IndexOutOfRange(f"input {v} outside 0..{W.q - 1}")
    if x == x2:
        raise EqualInputs("Bhattacharyya distance needs two distinct inputs")
    return float(min(np.sqrt(W.matrix[x] * W.matrix[x2]).sum(), 1.0))


def _average_from_matrix(z: np.ndarray) -> float:
    q = z.shape[0]
    return float((z.sum() - np.trace(z)) / (q * (q - 1)))


def average_z(W: Channel) -> float:
    return _average_from_matrix(pairwise_z_matrix(W))


def _profile_from_matrix(z: np.ndarray, add: np.ndarray) -> np.ndarray:
    q = z.shape[0]
    xs = np.arange(q)
    return np.array([z[xs, add[xs, d]].mean() for d in range(1, q)])


def z_profile(W: Channel, G) -> tuple[np.ndarray, float]:
    """Return ``(Z_1, ..., Z_{q-1})`` and their maximum for the group ``G``."""
    if G.q != W.q:
        raise GroupSizeMismatch(f"group of order {G.q} for a {W.q}-input channel")
    prof = _profile_from_matrix(pairwise_z_matrix(W), G.add)
    return prof, float(prof.max())


def ml_error_probability(W: Channel) -> float:
    """Exact single-use error of the ML decoder under the uniform prior."""
    return float(max(0.0, 1.0 - W.matrix.max(axis=0).sum() / W.q))


def capacity_bounds_from_z(z: float, q: int) -> tuple[float, float]:
    """Lower and upper bounds on the normalized capacity given the average Z."""
    if q < 2:
        raise OutOfRange(f"q must be at least 2, got {q}")
    if not -1e-12 <= z <= 1 + 1e-12:
        raise OutOfRange(f"z = {z} outside [0, 1]")
    z = min(max(z, 0.0), 1.0)
    lnq = math.log(q)
    root = math.sqrt(max(0.0, 1.0 - z * z))
    lower = math.log(q / (1.0 + (q - 1) * z)) / lnq
    upper_genie = math.log(q / 2) / lnq + (math.log(2) / lnq) * root
    upper_pinsker = 2 * (q - 1) * root / lnq
    return lower, min(upper_genie, upper_pinsker)


def is_equidistant(W: Channel, tol: float = 1e-9) -> bool:
    z = pairwise_z_matrix(W)
    off = z[~np.eye(W.q, dtype=bool)]
    return bool(off.max() - off.min() <= tol)


def erasure_probability(W: Channel, tol: float = 1e-12) -> Optional[float]:
    """If ``W`` is a q-ary erasure channel return its erasure rate, else ``None``.

    Every column must either be constant across inputs (an erasure) or have a
    single nonzero entry, and the erased mass must not depend on the input.
    """
    mat = W.matrix
    nonzero = (mat > tol).sum(axis=0)
    flat = np.ptp(mat, axis=0) <= tol
    if not np.all(flat | (nonzero <= 1)):
        return None
    erased = mat[:, flat & (nonzero > 0)].sum(axis=1)
    if np.ptp(erased) > 1e-9:
        return None
    return float(erased[0])


def metrics(W: Channel, G=None) -> MetricsReport:
    cap = symmetric_capacity(W)
    z = pairwise_z_matrix(W)
    zavg = _average_from_matrix(z)
    if G is not None:
        if G.q != W.q:
            raise GroupSizeMismatch(f"group of order {G.q} for a {W.q}-input channel")
        prof = _profile_from_matrix(z, G.add)
        zmax, profile = float(prof.max()), tuple(float(v) for v in prof)
    else:
        zmax, profile = float(z[~np.eye(W.q, dtype=bool)].max()), None
    return MetricsReport(cap.normalized, cap.nats, zavg, zmax, ml_error_probability(W), profile)


# ---------------------------------------------------------------- output merging

def _lossless_groups(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Group proportional columns.

    Returns the merged matrix and, per merged column, the index of its first
    source column.  Zero-mass columns are dropped.
    """
    mass = mat.sum(axis=0)
    keep = np.flatnonzero(mass > 0)
    cols = mat[:, keep]
    post = cols / mass[keep]
    # posteriors sum to one, so the last row is implied by the others
    keys = np.rint(post[:-1] / MERGE_RTOL).astype(np.int64)
    gid, first = _column_classes(keys)
    merged = np.stack([np.bincount(gid, weights=row, minlength=first.size) for row in cols])
    return merged, keep[first]


def _column_classes(keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Partition columns of an integer matrix into classes of identical columns.

    Returns per-column class ids, numbered by first occurrence, and the first
    column of each class.  Rows are folded in one at a time with 1-D
    ``np.unique`` calls, which is far faster than ``np.unique(axis=...)``.
    """
    if keys.shape[1] == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    if keys.shape[0] == 0:
        return np.zeros(keys.shape[1], dtype=np.int64), np.zeros(1, dtype=np.int64)
    gid = np.unique(keys[0], return_inverse=True)[1].ravel()
    for row in keys[1:]:
        r = np.unique(row, return_inverse=True)[1].ravel()
        gid = np.unique(gid * (int(r.max()) + 1) + r, return_inverse=True)[1].ravel()
    ngroups = int(gid.max()) + 1 if gid.size else 0
    first = np.full(ngroups, gid.size, dtype=np.int64)
    np.minimum.at(first, gid, np.arange(gid.size))
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return rank[gid], first[order]


def merge_outputs_lossless(W: Channel) -> Channel:
    merged, reps = _lossless_groups(W.matrix)
    if merged.shape[1] == W.m:
        return W
    return Channel(merged, [W.outputs[r] for r in reps])


def _bucket_groups(cols: np.ndarray, limit: int) -> np.ndarray:
    """Group ids from the finest power-of-two posterior grid with at most ``limit`` cells.

    Coarser grids are unions of finer cells, so the cell count is monotone in
    the resolution and the exponent can be found by bisection.
    """
    post = cols / cols.sum(axis=0)

    def classes(e: int):
        return _column_classes(np.floor(post[:-1] * float(2 ** e)).astype(np.int64))

    lo, hi = 0, GRID_BITS  # invariant: grid 2^lo fits (or lo == 0), 2^hi is the finest candidate
    best = classes(hi)
    if best[1].size <= limit:
        return best[0]
    best = classes(lo)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        cand = classes(mid)
        if cand[1].size <= limit:
            lo, best = mid, cand
        else:
            hi = mid
    return best[0]


def _greedy_merge(cols: np.ndarray, budget: int) -> tuple[np.ndarray, np.ndarray]:
    """Merge columns pairwise, cheapest capacity loss first, down to ``budget``.

    Returns the merged matrix and the surviving original column indices (each
    the smallest index of its group).
    """
    cols = np.array(cols, dtype=float)
    m = cols.shape[1]
    fval = _column_information(cols)
    cost = np.empty((m, m))
    q = cols.shape[0]
    for lo in range(0, m, 128):
        blk = cols[:, lo:lo + 128]
        pair = blk[:, :, None] + cols[:, None, :]
        s = pair.sum(axis=0)
        fpair = (xlogy(pair, pair).sum(axis=0) - xlogy(s, s / q)) / q
        cost[lo:lo + 128] = fval[lo:lo + 128, None] + fval[None, :] - fpair
    np.fill_diagonal(cost, np.inf)
    alive = np.ones(m, dtype=bool)
    rowarg = cost.argmin(axis=1)
    rowmin = cost[np.arange(m), rowarg]
    count = m
    while count > budget:
        i = int(np.argmin(rowmin))
        j = int(rowarg[i])
        if j < i:
            i, j = j, i
        cols[:, i] += cols[:, j]
        cols[:, j] = 0.0
        alive[j] = False
        fval[i] = _column_information(cols[:, i:i + 1])[0]
        cost[j, :] = np.inf
        cost[:, j] = np.inf
        rowmin[j] = np.inf
        new = fval[i] + fval - _column_information(cols[:, i:i + 1] + cols)
        new[~alive] = np.inf
        new[i] = np.inf
        cost[i, :] = new
        cost[:, i] = new
        count -= 1
        stale = np.flatnonzero(alive & ((rowarg == i) | (rowarg == j)))
        if stale.size:
            rowarg[stale] = cost[stale].argmin(axis=1)
            rowmin[stale] = cost[stale, rowarg[stale]]
        better = new < rowmin
        rowmin[better] = new[better]
        rowarg[better] = i
        rowarg[i] = int(np.argmin(new))
        rowmin[i] = new[rowarg[i]]
    idx = np.flatnonzero(alive)
    return cols[:, idx], idx


def _quantize_matrix(mat: np.ndarray, budget: int) -> tuple[np.ndarray, np.ndarray, bool]:
    """Merged matrix, representative source columns, and whether any lossy merge happened."""
    merged, reps = _lossless_groups(mat)
    if merged.shape[1] <= budget:
        return merged, reps, False
    limit = max(min(GREEDY_FACTOR * budget, GREEDY_CAP), budget)
    if merged.shape[1] > limit:
        gid = _bucket_groups(merged, limit)
        ngroups = int(gid.max()) + 1
        first = np.full(ngroups, merged.shape[1])
        np.minimum.at(first, gid, np.arange(merged.shape[1]))
        merged = np.stack([np.bincount(gid, weights=row, minlength=ngroups) for row in merged])
        reps = reps[first]
        if merged.shape[1] <= budget:
            return merged, reps, True
    merged, keep = _greedy_merge(merged, budget)
    return merged, reps[keep], True


def quantize_outputs(W: Channel, budget: int) -> tuple[Channel, float]:
    """Degrade ``W`` to at most ``budget`` outputs.

    Proportional columns are merged first (free); then pairs of columns are
    merged greedily by smallest capacity loss.  Very large alphabets are first
    bucketed on a posterior grid so the greedy pass stays tractable.

    Returns the merged channel and its capacity loss in nats.
    """
    if budget < W.q:
        raise BudgetTooSmall(f"budget {budget} is below the input size {W.q}")
    if W.m <= budget:
        return W, 0.0
    merged, reps, lossy = _quantize_matrix(W.matrix, budget)
    out = Channel(merged, [W.outputs[r] for r in reps])
    if not lossy:
        return out, 0.0
    loss = symmetric_capacity(W).nats - symmetric_capacity(out).nats
    return out, max(loss, 0.0)


# ---------------------------------------------------------------- file format

def parse_channel_text(text: str) -> Channel:
    """Parse ``q m`` followed by ``q`` rows of ``m`` probabilities; ``#`` starts a comment line."""
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise FileParseError("empty channel file")
    try:
        q, m = (int(t) for t in lines[0].split())
        rows = [[float(t) for t in ln.split()] for ln in lines[1:]]
    except ValueError as exc:
        raise FileParseError(f"malformed channel file: {exc}") from None
    if len(rows) != q or any(len(r) != m for r in rows):
        raise FileParseError(f"expected {q} rows of {m} entries")
    return make_channel(rows)


def read_channel_file(path) -> Channel:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FileParseError(f"cannot read {path}: {exc}") from None
    return parse_channel_text(text)


def format_channel_text(W: Channel) -> str:
    lines = [f"{W.q} {W.m}"]
    lines += [" ".join(repr(float(v)) for v in row) for row in W.matrix]
    return "\n".join(lines) + "\n"


def write_channel_file(W: Channel, path) -> None:
    Path(path).write_text(format_channel_text(W))
