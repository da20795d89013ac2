"""Two-copy combine/split transforms ``W -> (W-, W+)`` and related channel maps.

Every transform combines two uses of ``W`` through

    x1 = u1 + u2,   x2 = sigma(u2)

where ``+`` is a group operation on the inputs and ``sigma`` is a bijection.
The deterministic kernel uses one fixed ``sigma``; the randomized kernels
draw ``sigma`` uniformly from a set (permutations, or field scalings
``x -> r*x``) and reveal the draw to the receiver as an extra output
component tagged in the output label.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import algebra
from .algebra import FieldTable, GroupTable, Permutation
from .channel import (
    Channel,
    Tag,
    _lossless_groups,
    _quantize_matrix,
    average_z,
    pairwise_z_matrix,
    symmetric_capacity,
)
from .errors import (
    AlgebraMismatch,
    BadFactorization,
    BadMap,
    EmptyPermutationSet,
    InvalidMultiplier,
    PolarError,
)

VARIANTS = ("group", "perm", "permfix0", "mult", "multhalf")
# largest q*q*m*m*|tags| tensor a single split may allocate; bigger parents are quantized first
SPLIT_ENTRY_CAP = 1 << 23


@dataclass(frozen=True)
class KernelConfig:
    """Which transform to apply at each node of the polarization tree.

    ``fixed`` only matters for the randomized variants: when set, every node
    commits to one member of the randomization set (chosen by ``choose``)
    instead of averaging over all of them.  The group variant always uses a
    fixed map: ``pi`` if given, otherwise the identity, unless ``choose`` asks
    for a per-node permutation search.
    """

    variant: str
    q: int
    fixed: bool = False
    choose: Optional[str] = None  # None, "first" or "min"
    pi: Optional[Permutation] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise PolarError(f"unknown kernel variant {self.variant!r}")
        if self.choose not in (None, "first", "min"):
            raise PolarError(f"unknown selection rule {self.choose!r}")
        if self.pi is not None:
            if self.variant != "group":
                raise PolarError("a fixed permutation only applies to the group kernel")
            object.__setattr__(self, "pi", algebra.validate_permutation(self.pi, self.q))
        # touch the algebra so incompatible (variant, q) pairs fail early
        self.candidates()

    @property
    def randomized(self) -> bool:
        return self.variant != "group"

    @property
    def ensemble(self) -> bool:
        """True when splits average over the randomization set (tagged outputs)."""
        return self.randomized and not self.fixed

    @property
    def field(self) -> Optional[FieldTable]:
        if self.variant in ("mult", "multhalf"):
            return algebra.finite_field(self.q)
        return None

    @property
    def group(self) -> GroupTable:
        F = self.field
        return F.additive_group() if F is not None else algebra.cyclic_group(self.q)

    @property
    def tag_kind(self) -> str:
        return "r" if self.variant in ("mult", "multhalf") else "pi"

    def multipliers(self) -> tuple:
        F = self.field
        if self.variant == "mult":
            return F.nonzero
        if self.variant == "multhalf":
            return algebra.half_multiplier_set(F)
        raise PolarError(f"{self.variant} kernel has no multiplier set")

    def candidates(self) -> list:
        """The maps ``sigma`` a node may use, with the tag value identifying each."""
        q = self.q
        if self.variant == "group":
            if self.choose is not None:
                return [(i, p) for i, p in enumerate(algebra.permutation_set(q))]
            return [(0, self.pi or algebra.identity_permutation(q))]
        if self.variant == "perm":
            return list(enumerate(algebra.permutation_set(q)))
        if self.variant == "permfix0":
            return list(enumerate(algebra.permutation_set(q, fix_zero=True)))
        F = self.field
        return [(r, F.scaling(r)) for r in self.multipliers()]

    @property
    def is_prime_deterministic(self) -> bool:
        return self.variant == "group" and algebra.is_prime(self.q)

    def describe(self) -> str:
        parts = [self.variant]
        if self.fixed:
            parts.append("fixed")
        if self.choose:
            parts.append(f"choose={self.choose}")
        return ",".join(parts)


def make_kernel(variant: str, q: int, fixed: bool = False, choose: Optional[str] = None,
                pi: Optional[Sequence[int]] = None) -> KernelConfig:
    if variant != "group" and fixed and choose is None:
        choose = "first"
    return KernelConfig(variant, q, fixed, choose, None if pi is None else tuple(pi))


@dataclass(frozen=True)
class SplitPair:
    minus: Channel
    plus: Channel
    provenance: dict = field(default_factory=dict)


# ---------------------------------------------------------------- split machinery

def _split_raw(W: Channel, add: np.ndarray, sigmas: Sequence[Permutation],
               tags: Optional[Sequence[Tag]]):
    """Unmerged minus/plus matrices plus functions mapping a column index to its label."""
    mat = W.matrix
    q, m = mat.shape
    T = len(sigmas)
    A = mat[add]  # A[u1, u2] = W(. | u1 + u2)
    minus_parts, plus_parts = [], []
    for sigma in sigmas:
        B = mat[np.asarray(sigma)]  # B[u2] = W(. | sigma(u2))
        joint = A[:, :, :, None] * B[None, :, None, :]  # (u1, u2, y1, y2)
        minus_parts.append(joint.sum(axis=1).reshape(q, m * m))
        plus_parts.append(joint.transpose(1, 2, 3, 0).reshape(q, m * m * q))
    scale = 1.0 / (q * T)
    minus = np.concatenate(minus_parts, axis=1) * scale
    plus = np.concatenate(plus_parts, axis=1) * scale
    outs = W.outputs

    def minus_label(f: int):
        t, rem = divmod(int(f), m * m)
        y1, y2 = divmod(rem, m)
        lab = (outs[y1], outs[y2])
        return lab + (tags[t],) if tags is not None else lab

    def plus_label(f: int):
        t, rem = divmod(int(f), m * m * q)
        yy, u1 = divmod(rem, q)
        y1, y2 = divmod(yy, m)
        lab = (outs[y1], outs[y2], u1)
        return lab + (tags[t],) if tags is not None else lab

    return minus, plus, minus_label, plus_label


def _finish(mat: np.ndarray, label: Callable, budget: Optional[int]) -> tuple[Channel, float]:
    if budget is None:
        merged, reps = _lossless_groups(mat)
        return Channel(merged, [label(r) for r in reps]), 0.0
    merged, reps, lossy = _quantize_matrix(mat, budget)
    out = Channel(merged, [label(r) for r in reps])
    if not lossy:
        return out, 0.0
    loss = _raw_capacity(mat) - symmetric_capacity(out).nats
    return out, max(loss, 0.0)


def _raw_capacity(mat: np.ndarray) -> float:
    return symmetric_capacity(Channel(mat, range(mat.shape[1]))).nats


def _check_group(W: Channel, G) -> None:
    if G.q != W.q:
        raise AlgebraMismatch(f"algebra of order {G.q} for a {W.q}-input channel")


def _split(W: Channel, add, sigmas, tags, budget=None):
    minus, plus, ml, pl = _split_raw(W, add, sigmas, tags)
    wm, lm = _finish(minus, ml, budget)
    wp, lp = _finish(plus, pl, budget)
    return wm, wp, lm, lp


def split_deterministic(W: Channel, G: GroupTable, pi: Optional[Sequence[int]] = None) -> SplitPair:
    """Split with ``x1 = u1 + u2``, ``x2 = pi(u2)`` (``pi`` defaults to the identity)."""
    _check_group(W, G)
    sigma = algebra.identity_permutation(W.q) if pi is None else algebra.validate_permutation(pi, W.q)
    wm, wp, _, _ = _split(W, G.add, [sigma], None)
    return SplitPair(wm, wp, {"kernel": "group", "sigma": sigma})


def split_random_perm(W: Channel, perms: Sequence[Sequence[int]], G: Optional[GroupTable] = None) -> SplitPair:
    """Split averaging uniformly over ``perms``; the permutation index is revealed."""
    if not perms:
        raise EmptyPermutationSet("permutation set is empty")
    G = algebra.cyclic_group(W.q) if G is None else G
    _check_group(W, G)
    perms = [algebra.validate_permutation(p, W.q) for p in perms]
    tags = [Tag("pi", i) for i in range(len(perms))]
    wm, wp, _, _ = _split(W, G.add, perms, tags)
    return SplitPair(wm, wp, {"kernel": "perm", "perms": tuple(perms)})


def split_multiplier(W: Channel, F: FieldTable, mults: Sequence[int]) -> SplitPair:
    """Split with ``x2 = r * u2``, ``r`` uniform over ``mults`` and revealed."""
    _check_group(W, F)
    mults = tuple(int(r) for r in mults)
    if not mults:
        raise InvalidMultiplier("multiplier set is empty")
    for r in mults:
        if not 0 < r < F.q:
            raise InvalidMultiplier(f"{r} is not a nonzero element of GF({F.q})")
    sigmas = [F.scaling(r) for r in mults]
    tags = [Tag("r", r) for r in mults]
    wm, wp, _, _ = _split(W, F.add, sigmas, tags)
    return SplitPair(wm, wp, {"kernel": "mult", "mults": mults})


def apply_kernel(W: Channel, kernel: KernelConfig, sigma: Optional[Permutation] = None,
                 budget: Optional[int] = None) -> tuple[Channel, Channel, float, float]:
    """Split according to ``kernel``; returns ``(minus, plus, loss_minus, loss_plus)``.

    In ensemble mode the whole randomization set is averaged over; otherwise
    ``sigma`` (or the kernel's single candidate) is used.
    """
    if kernel.q != W.q:
        raise AlgebraMismatch(f"{kernel.q}-ary kernel for a {W.q}-input channel")
    add = kernel.group.add
    if kernel.ensemble:
        cands = kernel.candidates()
        tags = [Tag(kernel.tag_kind, v) for v, _ in cands]
        return _split(W, add, [s for _, s in cands], tags, budget)
    if sigma is None:
        sigma = choose_sigma(W, kernel)
    return _split(W, add, [sigma], None, budget)


# ---------------------------------------------------------------- permutation selection

def plus_z_fixed(W: Channel, G: GroupTable, sigma: Sequence[int]) -> float:
    """Average Z of the plus channel for a fixed ``sigma``, without building it."""
    _check_group(W, G)
    z = pairwise_z_matrix(W)
    q = W.q
    s = np.asarray(sigma)
    a = z[np.ix_(s, s)]
    # b[x, x'] = mean_u Z(u + x, u + x')
    b = z[G.add[:, :, None], G.add[:, None, :]].mean(axis=0)
    off = ~np.eye(q, dtype=bool)
    return float((a * b)[off].sum() / (q * (q - 1)))


def find_good_permutation(W: Channel, G: GroupTable, candidates: Optional[Sequence[Permutation]] = None,
                          minimize: bool = False) -> Permutation:
    """First permutation (lexicographic) with ``Z(W+) <= Z(W)^2``, or the minimizer.

    ``candidates`` defaults to all ``q!`` permutations.
    """
    _check_group(W, G)
    if candidates is None:
        candidates = algebra.permutation_set(W.q)
    return _select(W, G, list(candidates), minimize)


def _select(W: Channel, G: GroupTable, cands: list, minimize: bool):
    if not cands:
        raise EmptyPermutationSet("no candidate maps")
    target = average_z(W) ** 2 + 1e-12
    scores = []
    for sigma in cands:
        zp = plus_z_fixed(W, G, sigma)
        if not minimize and zp <= target:
            return tuple(sigma)
        scores.append(zp)
    return tuple(cands[int(np.argmin(scores))])


def choose_sigma(W: Channel, kernel: KernelConfig) -> Permutation:
    cands = [s for _, s in kernel.candidates()]
    if len(cands) == 1:
        return cands[0]
    return _select(W, kernel.group, cands, kernel.choose == "min")


# ---------------------------------------------------------------- other channel maps

def decompose_composite(W: Channel, radices: Sequence[int]) -> list:
    """Split a composite-input channel into prime-input levels.

    With ``x = u1 + q1*u2 + q1*q2*u3 + ...`` the ``i``-th level is
    ``W_i(y, u1..u_{i-1} | u_i)``, averaging over the higher digits.  Output
    labels are ``(y, u1, ..., u_{i-1})``.
    """
    radices = [int(r) for r in radices]
    if not radices or math.prod(radices) != W.q or not all(algebra.is_prime(r) for r in radices):
        raise BadFactorization(f"{radices} is not a prime factorization of {W.q}")
    m = W.m
    L = len(radices)
    # axes (u_L, ..., u_1, y) since x is the row index in C order
    cube = W.matrix.reshape(tuple(reversed(radices)) + (m,))
    levels = []
    for i in range(L):
        higher = tuple(range(L - 1 - i))  # axes of u_L .. u_{i+2}
        part = cube.sum(axis=higher) if higher else cube
        part = part / math.prod(radices[i + 1:])
        # remaining axes (u_{i+1}, u_i, ..., u_1, y); move u_{i+1} first, then y, u_1..u_i
        lower = radices[:i]
        part = part.reshape((radices[i],) + tuple(reversed(lower)) + (m,))
        nlow = len(lower)
        order = (0, nlow + 1) + tuple(range(nlow, 0, -1))
        part = part.transpose(order).reshape(radices[i], -1) / math.prod(lower)
        labels = []
        for y in W.outputs:
            for digits in np.ndindex(*lower) if lower else [()]:
                labels.append((y,) + tuple(int(d) for d in digits) if lower else (y,))
        levels.append(Channel(part, labels))
    return levels


def shape_channel(W: Channel, f: Sequence[int]) -> Channel:
    """Channel on a larger uniform alphabet: ``W'(y|x') = W(y|f(x'))``."""
    f = [int(v) for v in f]
    if len(f) < 2 or any(not 0 <= v < W.q for v in f):
        raise BadMap(f"map {f} must send at least 2 letters into 0..{W.q - 1}")
    return Channel(W.matrix[f], W.outputs)


def shaping_map(px: Sequence[float], m: int) -> tuple:
    """Map ``{0..m-1} -> X`` whose preimage sizes approximate ``m * px`` (largest remainder)."""
    px = np.asarray(px, dtype=float)
    if m < 2 or np.any(px < 0) or not math.isclose(px.sum(), 1.0, abs_tol=1e-9):
        raise BadMap("need m >= 2 and a probability vector")
    raw = px * m
    counts = np.floor(raw).astype(int)
    short = m - counts.sum()
    for x in np.argsort(-(raw - counts), kind="stable")[:short]:
        counts[x] += 1
    return tuple(x for x, c in enumerate(counts) for _ in range(c))


def induced_distribution(f: Sequence[int], q: int) -> np.ndarray:
    return np.bincount(np.asarray(f), minlength=q) / len(f)
