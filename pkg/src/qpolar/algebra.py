"""Algebraic structure on the input alphabet ``{0, ..., q-1}``.

Field elements are encoded positionally: integer ``i`` is the polynomial
whose coefficients are the base-``p`` digits of ``i`` (least significant
digit is the constant term).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import (
    EnumerationTooLarge,
    EvenCharacteristic,
    InvalidPermutation,
    NotPrimePower,
    PolarError,
)

Permutation = tuple  # image table: perm[x] is the image of x

AXIOM_CHECK_LIMIT = 64
MAX_FIELD = 256
MAX_FULL_ENUM = 6
MAX_FIXZERO_ENUM = 7


@dataclass(frozen=True, eq=False)
class GroupTable:
    q: int
    add: np.ndarray
    neg: np.ndarray
    name: str = "cyclic"

    identity = 0

    def sub(self, a, b):
        return self.add[a, self.neg[b]]


@dataclass(frozen=True, eq=False)
class FieldTable:
    q: int
    p: int
    k: int
    modulus: tuple  # monic polynomial coefficients, constant term first
    add: np.ndarray
    mul: np.ndarray
    neg: np.ndarray
    inv: np.ndarray = field(repr=False)

    @property
    def characteristic(self) -> int:
        return self.p

    @property
    def nonzero(self) -> tuple:
        return tuple(range(1, self.q))

    def additive_group(self) -> GroupTable:
        return GroupTable(self.q, self.add, self.neg, name="field")

    def scaling(self, r: int) -> Permutation:
        """The bijection ``x -> r * x`` as a permutation."""
        return tuple(int(v) for v in self.mul[r])

    def to_digits(self, x: int) -> tuple:
        return tuple((x // self.p ** i) % self.p for i in range(self.k))


def _check_group(add: np.ndarray, neg: np.ndarray) -> None:
    q = add.shape[0]
    xs = np.arange(q)
    if add.min() < 0 or add.max() >= q:
        raise PolarError("addition table not closed")
    if not (np.array_equal(add[0], xs) and np.array_equal(add[:, 0], xs)):
        raise PolarError("0 is not an identity")
    if not np.all(add[xs, neg] == 0):
        raise PolarError("inverse law fails")
    if q <= AXIOM_CHECK_LIMIT and not np.array_equal(add[add], add[:, add]):
        raise PolarError("addition is not associative")


def cyclic_group(q: int) -> GroupTable:
    return _cyclic_group(int(q))


@lru_cache(maxsize=None)
def _cyclic_group(q: int) -> GroupTable:
    if q < 2:
        raise PolarError(f"group order must be at least 2, got {q}")
    xs = np.arange(q)
    add = (xs[:, None] + xs[None, :]) % q
    neg = (-xs) % q
    _check_group(add, neg)
    add.setflags(write=False)
    neg.setflags(write=False)
    return GroupTable(q, add, neg)


def prime_power(q: int) -> tuple[int, int]:
    """Return ``(p, k)`` with ``q = p**k``, or raise :class:`NotPrimePower`."""
    if q < 2:
        raise NotPrimePower(f"{q} is not a prime power")
    p = next(d for d in range(2, q + 1) if q % d == 0)
    k, rest = 0, q
    while rest % p == 0:
        rest //= p
        k += 1
    if rest != 1:
        raise NotPrimePower(f"{q} is not a prime power")
    return p, k


def is_prime(q: int) -> bool:
    return q >= 2 and all(q % d for d in range(2, math.isqrt(q) + 1))


def _poly_mod(a: list, mod: Sequence[int], p: int) -> list:
    a = list(a)
    k = len(mod) - 1
    for i in range(len(a) - 1, k - 1, -1):
        c = a[i] % p
        if c:
            for j in range(k + 1):
                a[i - k + j] = (a[i - k + j] - c * mod[j]) % p
    return [c % p for c in a[:k]] + [0] * max(0, k - len(a))


def _is_irreducible(mod: Sequence[int], p: int) -> bool:
    k = len(mod) - 1
    for d in range(1, k // 2 + 1):
        for low in itertools.product(range(p), repeat=d):
            div = list(low) + [1]
            if not any(_poly_mod(mod, div, p)[:d]):
                return False
    return True


def irreducible_polynomial(p: int, k: int) -> tuple:
    """Lexicographically first monic irreducible polynomial of degree ``k`` over GF(p).

    Candidates are ordered by the integer whose base-``p`` digits are the
    non-leading coefficients (constant term least significant).
    """
    if k == 1:
        return (0, 1)
    for code in range(p ** k):
        low = [(code // p ** i) % p for i in range(k)]
        if low[0] == 0:
            continue
        mod = tuple(low) + (1,)
        if _is_irreducible(mod, p):
            return mod
    raise PolarError(f"no irreducible polynomial of degree {k} over GF({p})")


def finite_field(q: int) -> FieldTable:
    return _finite_field(int(q))


@lru_cache(maxsize=None)
def _finite_field(q: int) -> FieldTable:
    p, k = prime_power(q)
    if q > MAX_FIELD:
        raise NotPrimePower(f"fields above {MAX_FIELD} elements are not supported")
    mod = irreducible_polynomial(p, k)
    digits = np.array([[(x // p ** i) % p for i in range(k)] for x in range(q)])
    weights = p ** np.arange(k)
    add = ((digits[:, None, :] + digits[None, :, :]) % p) @ weights
    mul = np.zeros((q, q), dtype=np.int64)
    for a in range(q):
        for b in range(a, q):
            prod = np.convolve(digits[a], digits[b]) % p
            red = _poly_mod(list(prod), mod, p)
            mul[a, b] = mul[b, a] = int(np.dot(red, weights))
    neg = ((-digits) % p) @ weights
    inv = np.zeros(q, dtype=np.int64)
    for a in range(1, q):
        hits = np.flatnonzero(mul[a] == 1)
        if hits.size != 1:
            raise PolarError(f"element {a} has no inverse")
        inv[a] = hits[0]
    _check_group(add, neg)
    if q <= AXIOM_CHECK_LIMIT:
        nz = np.arange(1, q)
        if np.any(mul[np.ix_(nz, nz)] == 0):
            raise PolarError("zero divisors present")
        lhs = mul[:, add]  # a * (b + c)
        rhs = add[mul[:, :, None], mul[:, None, :]]  # a*b + a*c
        if not np.array_equal(lhs, rhs):
            raise PolarError("distributivity fails")
        if not np.array_equal(mul[mul, :], mul[:, mul]):
            raise PolarError("multiplication is not associative")
    for t in (add, mul, neg, inv):
        t.setflags(write=False)
    return FieldTable(q, p, k, mod, add, mul, neg, inv)


def validate_permutation(perm: Sequence[int], q: int) -> Permutation:
    perm = tuple(int(v) for v in perm)
    if len(perm) != q or sorted(perm) != list(range(q)):
        raise InvalidPermutation(f"{perm} is not a permutation of 0..{q - 1}")
    return perm


def identity_permutation(q: int) -> Permutation:
    return tuple(range(q))


def permutation_set(q: int, fix_zero: bool = False) -> list:
    """All permutations of ``{0..q-1}`` in lexicographic order, optionally only those fixing 0."""
    if fix_zero:
        if q > MAX_FIXZERO_ENUM:
            raise EnumerationTooLarge(f"(q-1)! too large to enumerate for q={q}")
        return [(0,) + rest for rest in itertools.permutations(range(1, q))]
    if q > MAX_FULL_ENUM:
        raise EnumerationTooLarge(f"q! too large to enumerate for q={q}")
    return list(itertools.permutations(range(q)))


def half_multiplier_set(F: FieldTable) -> tuple:
    """One representative (the smaller encoding) from each pair ``{r, -r}``."""
    if F.p == 2:
        raise EvenCharacteristic(f"GF({F.q}) has characteristic 2")
    return tuple(sorted({min(r, int(F.neg[r])) for r in range(1, F.q)}))
