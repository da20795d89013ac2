"""Polarization-tree evolution, polarization statistics and code construction.

Leaves are indexed by their sign path: bit ``j`` (most significant first) of
leaf index ``i`` is ``-`` for 0 and ``+`` for 1, so ``i = 0`` is ``--...-``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .channel import Channel, MetricsReport, metrics, quantize_outputs, erasure_probability
from .errors import BadBeta, BadDelta, BudgetTooSmall, KOutOfRange, PolarError
from .kernels import SPLIT_ENTRY_CAP, KernelConfig, apply_kernel, choose_sigma

DEFAULT_MERGE_BUDGET = 4096
Z_95 = 1.959963984540054


@dataclass(frozen=True)
class LeafReport:
    path: str
    metrics: MetricsReport
    schedule: tuple = ()  # ((node_path, sigma), ...) from the root down
    merge_loss: float = 0.0


@dataclass
class TreeResult:
    """Leaves plus the per-node map choices made while evolving."""

    leaves: list
    schedule: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(self.leaves)

    def __len__(self):
        return len(self.leaves)

    def __getitem__(self, i):
        return self.leaves[i]


def path_of(index: int, n: int) -> str:
    return "".join("+" if (index >> (n - 1 - j)) & 1 else "-" for j in range(n))


def index_of(path: str) -> int:
    return sum(1 << (len(path) - 1 - j) for j, s in enumerate(path) if s == "+")


def _split_budget(W: Channel, kernel: KernelConfig) -> Optional[int]:
    tags = len(kernel.candidates()) if kernel.ensemble else 1
    m_cap = int(math.isqrt(SPLIT_ENTRY_CAP // (W.q * W.q * tags)))
    return max(m_cap, W.q) if W.m > m_cap else None


def split_node(W: Channel, kernel: KernelConfig, merge_budget: int):
    """One tree step: choose the node map, split, quantize both children.

    Returns ``(minus, plus, sigma, loss_here, loss_minus, loss_plus)`` where
    ``loss_here`` is any pre-split degradation of ``W`` itself.
    """
    loss_here = 0.0
    cap = _split_budget(W, kernel)
    if cap is not None:
        W, loss_here = quantize_outputs(W, cap)
    sigma = None if kernel.ensemble else choose_sigma(W, kernel)
    wm, wp, lm, lp = apply_kernel(W, kernel, sigma, budget=merge_budget)
    return wm, wp, sigma, loss_here, lm, lp


def _metrics(W: Channel, kernel: KernelConfig) -> MetricsReport:
    return metrics(W, kernel.group)


def evolve_tree(W: Channel, n: int, kernel: KernelConfig, merge_budget: int = DEFAULT_MERGE_BUDGET,
                keep_channels: bool = False) -> TreeResult:
    """Apply the kernel recursively ``n`` times and report on all ``2**n`` leaves.

    Children are quantized to ``merge_budget`` outputs; capacity lost that way
    is charged to every leaf below the merge point, so that the leaf capacities
    plus their ``merge_loss`` sum exactly to ``2**n * I(W)`` (nats).

    With ``keep_channels`` the leaf channels are returned as ``.channels``.
    """
    if n < 0:
        raise PolarError("n must be nonnegative")
    if merge_budget < W.q:
        raise BudgetTooSmall(f"merge budget {merge_budget} below q={W.q}")
    if kernel.q != W.q:
        raise PolarError(f"{kernel.q}-ary kernel for a {W.q}-input channel")
    leaves: list = []
    channels: list = []
    schedule: dict = {}

    def visit(ch: Channel, path: str, loss: float, sched: tuple):
        if len(path) == n:
            leaves.append(LeafReport(path, _metrics(ch, kernel), sched, loss))
            if keep_channels:
                channels.append(ch)
            return
        wm, wp, sigma, l0, lm, lp = split_node(ch, kernel, merge_budget)
        if sigma is not None:
            schedule[path] = sigma
            sched = sched + ((path, sigma),)
        loss += l0
        visit(wm, path + "-", loss + lm, sched)
        visit(wp, path + "+", loss + lp, sched)

    visit(W, "", 0.0, ())
    result = TreeResult(leaves, schedule)
    if keep_channels:
        result.channels = channels
    return result


def polarization_fraction(leaves: Sequence[LeafReport], delta: float) -> float:
    """Fraction of leaves whose normalized capacity lies strictly in ``(delta, 1 - delta)``."""
    if not 0 < delta < 0.5:
        raise BadDelta(f"delta must lie in (0, 1/2), got {delta}")
    vals = np.array([leaf.metrics.capacity_normalized for leaf in leaves])
    return float(np.mean((vals > delta) & (vals < 1 - delta)))


def select_information_set(leaves: Sequence[LeafReport], K: int) -> tuple:
    """Indices of the ``K`` leaves with smallest average Z (ties to the lower index)."""
    N = len(leaves)
    if not 0 <= K <= N:
        raise KOutOfRange(f"K={K} outside 0..{N}")
    order = sorted(range(N), key=lambda i: (leaves[i].metrics.z_avg, i))
    return tuple(sorted(order[:K]))


def leaves_to_csv(leaves: Sequence[LeafReport], digest: Optional[str] = None) -> str:
    buf = io.StringIO()
    if digest is not None:
        buf.write(f"# config_digest={digest}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["path", "I_normalized", "z_avg", "z_max", "merge_loss"])
    for leaf in leaves:
        mt = leaf.metrics
        w.writerow([leaf.path or ".", repr(mt.capacity_normalized), repr(mt.z_avg),
                    repr(mt.z_max), repr(leaf.merge_loss)])
    return buf.getvalue()


# ---------------------------------------------------------------- rate of polarization

@dataclass(frozen=True)
class RateEstimate:
    estimate: float
    halfwidth: float
    trials: int
    successes: int
    log2_threshold: float
    method: str


def wilson_halfwidth(successes: int, trials: int, z: float = Z_95) -> float:
    if trials <= 0:
        return 0.0
    p = successes / trials
    denom = 1 + z * z / trials
    return z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent counter-based stream for one trial, derived from ``(seed, trial)``."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(trial),))
    return np.random.Generator(np.random.Philox(ss))


def sample_paths(n: int, trials: int, seed: int) -> np.ndarray:
    """``trials x n`` array of signs (True for ``+``), one RNG stream per trial."""
    out = np.empty((trials, n), dtype=bool)
    for t in range(trials):
        out[t] = trial_rng(seed, t).random(n) < 0.5
    return out


def erasure_log2_z(eps: float, signs: np.ndarray) -> np.ndarray:
    """Exact ``log2 Z`` after each path of the erasure recursion ``Z- = 2Z - Z^2``, ``Z+ = Z^2``."""
    trials, n = signs.shape
    if eps <= 0:
        return np.full(trials, -np.inf)
    lz = np.full(trials, math.log2(eps))
    with np.errstate(divide="ignore"):
        for j in range(n):
            plus = signs[:, j]
            minus_val = lz + np.log2(2.0 - np.exp2(lz))
            lz = np.where(plus, 2.0 * lz, minus_val)
    return lz


def track_path(W: Channel, path: str, kernel: KernelConfig, merge_budget: int = DEFAULT_MERGE_BUDGET,
               proxy: Optional[str] = None) -> list:
    """The ``T`` proxy (``z_max`` or ``z_avg``) after each step along ``path``, starting at the root."""
    proxy = proxy or ("z_max" if kernel.is_prime_deterministic else "z_avg")
    vals = [getattr(_metrics(W, kernel), proxy)]
    ch = W
    for s in path:
        wm, wp, *_ = split_node(ch, kernel, merge_budget)
        ch = wm if s == "-" else wp
        vals.append(getattr(_metrics(ch, kernel), proxy))
    return vals


def rate_experiment(W: Channel, n: int, beta: float, trials: int, seed: int,
                    kernel: Optional[KernelConfig] = None, merge_budget: int = DEFAULT_MERGE_BUDGET,
                    method: str = "auto") -> RateEstimate:
    """Estimate ``P(T_n <= 2^(-2^(beta n)))`` over uniformly random sign paths.

    ``method="erasure"`` (chosen automatically for erasure channels) runs the
    exact scalar recursion in the log domain; ``"channel"`` evolves the channel
    along each sampled path, caching shared prefixes.
    """
    if not 0 < beta < 1:
        raise BadBeta(f"beta must lie in (0, 1), got {beta}")
    if trials < 1:
        raise PolarError("need at least one trial")
    log2_thr = -(2.0 ** (beta * n))
    signs = sample_paths(n, trials, seed)
    eps = erasure_probability(W)
    if method == "auto":
        method = "erasure" if eps is not None else "channel"
    if method == "erasure":
        if eps is None:
            raise PolarError("channel is not an erasure channel")
        lz = erasure_log2_z(eps, signs)
    elif method == "channel":
        kernel = kernel or KernelConfig("group", W.q)
        proxy = "z_max" if kernel.is_prime_deterministic else "z_avg"
        cache = {"": W}
        lz = np.empty(trials)
        for t in range(trials):
            path = "".join("+" if b else "-" for b in signs[t])
            for j in range(1, n + 1):
                pre = path[:j]
                if pre not in cache:
                    wm, wp, *_ = split_node(cache[pre[:-1]], kernel, merge_budget)
                    cache[pre[:-1] + "-"] = wm
                    cache[pre[:-1] + "+"] = wp
            tval = getattr(_metrics(cache[path], kernel), proxy)
            lz[t] = math.log2(tval) if tval > 0 else -math.inf
    else:
        raise PolarError(f"unknown method {method!r}")
    hits = int(np.sum(lz <= log2_thr))
    return RateEstimate(hits / trials, wilson_halfwidth(hits, trials), trials, hits, log2_thr, method)


# ---------------------------------------------------------------- code construction

@dataclass(frozen=True)
class PolarCodeSpec:
    """A complete polar code: block length, node maps, information set, frozen values.

    ``schedule`` maps every internal node path (``""`` is the root) to the map
    ``sigma`` used there; ``frozen_values`` lists the pinned symbols of the
    frozen indices in increasing index order.
    """

    q: int
    n: int
    kernel: str
    algebra: str  # "cyclic" or "field": which '+' the node maps combine with
    schedule: dict
    info_set: tuple
    frozen_values: tuple

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def K(self) -> int:
        return len(self.info_set)

    @property
    def rate(self) -> float:
        return self.K / self.N

    @property
    def frozen_set(self) -> tuple:
        info = set(self.info_set)
        return tuple(i for i in range(self.N) if i not in info)

    @property
    def group(self):
        from . import algebra as alg

        return alg.finite_field(self.q).additive_group() if self.algebra == "field" else alg.cyclic_group(self.q)

    def u_template(self) -> np.ndarray:
        u = np.zeros(self.N, dtype=np.int64)
        u[list(self.frozen_set)] = self.frozen_values
        return u


def construct_code(W: Channel, n: int, kernel: KernelConfig, K: Optional[int] = None,
                   rate: Optional[float] = None, merge_budget: int = DEFAULT_MERGE_BUDGET,
                   frozen_values: Optional[Sequence[int]] = None) -> tuple[PolarCodeSpec, TreeResult]:
    """Evolve the tree with per-node fixed maps and pick the ``K`` most reliable leaves.

    Randomized kernels are run in fixed mode: each node commits to one member
    of its randomization set, so encoding and decoding are deterministic.
    """
    N = 1 << n
    if K is None:
        if rate is None:
            raise KOutOfRange("give K or rate")
        K = int(math.floor(rate * N + 0.5))
    if kernel.ensemble:
        kernel = KernelConfig(kernel.variant, kernel.q, True, kernel.choose or "first", kernel.pi)
    tree = evolve_tree(W, n, kernel, merge_budget)
    info = select_information_set(tree.leaves, K)
    nfrozen = N - K
    if frozen_values is None:
        frozen_values = (0,) * nfrozen
    frozen_values = tuple(int(v) for v in frozen_values)
    if len(frozen_values) != nfrozen or any(not 0 <= v < W.q for v in frozen_values):
        raise KOutOfRange(f"need {nfrozen} frozen values in 0..{W.q - 1}")
    alg = "field" if kernel.variant in ("mult", "multhalf") else "cyclic"
    spec = PolarCodeSpec(W.q, n, kernel.variant, alg, dict(tree.schedule), info, frozen_values)
    return spec, tree
