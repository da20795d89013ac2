"""Polar encoding and successive-cancellation decoding over a node schedule.

A block of length ``N`` at node ``path`` is built from two half blocks: the
first half of ``u`` is a code over the minus channel (child ``path + "-"``),
the second half a code over the plus channel.  Their codewords ``v`` and
``w`` are combined pairwise as ``x[j] = v[j] + w[j]`` and
``x[j + N/2] = sigma(w[j])`` with the node's map ``sigma``.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from . import algebra
from .channel import Channel
from .construction import PolarCodeSpec
from .errors import (
    BadFactorization,
    DegenerateLikelihood,
    FileParseError,
    IncompleteSchedule,
    LengthMismatch,
    SpecMismatch,
)

SPEC_MAGIC = "qpolar-spec"
SPEC_VERSION = 1


def _sigma(spec_schedule: dict, path: str) -> np.ndarray:
    try:
        return spec_schedule[path]
    except KeyError:
        raise IncompleteSchedule(f"no map recorded for node {path or '(root)'}") from None


def _prepared_schedule(spec: PolarCodeSpec) -> dict:
    sched = {p: np.asarray(s, dtype=np.int64) for p, s in spec.schedule.items()}
    for depth in range(spec.n):
        for i in range(1 << depth):
            p = "".join("+" if (i >> (depth - 1 - j)) & 1 else "-" for j in range(depth))
            if p not in sched:
                raise IncompleteSchedule(f"no map recorded for node {p or '(root)'}")
    return sched


def polar_transform(u: np.ndarray, add: np.ndarray, sched: dict, path: str = "") -> np.ndarray:
    N = u.shape[0]
    if N == 1:
        return u.copy()
    h = N // 2
    v = polar_transform(u[:h], add, sched, path + "-")
    w = polar_transform(u[h:], add, sched, path + "+")
    return np.concatenate([add[v, w], _sigma(sched, path)[w]])


def encode(spec: PolarCodeSpec, msg: Sequence[int]) -> np.ndarray:
    """Place ``msg`` on the information set (increasing order), frozen values elsewhere, and transform."""
    msg = np.asarray(msg, dtype=np.int64).ravel()
    if msg.size != spec.K:
        raise LengthMismatch(f"message has {msg.size} symbols, code carries {spec.K}")
    if msg.size and (msg.min() < 0 or msg.max() >= spec.q):
        raise LengthMismatch(f"message symbols must lie in 0..{spec.q - 1}")
    u = spec.u_template()
    u[list(spec.info_set)] = msg
    return polar_transform(u, spec.group.add, _prepared_schedule(spec))


def _normalize(L: np.ndarray) -> np.ndarray:
    s = L.sum(axis=1, keepdims=True)
    if np.any(s <= 0):
        raise DegenerateLikelihood("all-zero likelihood vector")
    return L / s


class _SC:
    """Recursive SC pass; fills ``u`` and ``post`` (posterior of each u_i)."""

    def __init__(self, spec: PolarCodeSpec, genie: Optional[np.ndarray] = None):
        self.add = spec.group.add
        self.sched = _prepared_schedule(spec)
        self.frozen = np.zeros(spec.N, dtype=bool)
        self.frozen[list(spec.frozen_set)] = True
        self.u = spec.u_template()
        self.post = np.zeros((spec.N, spec.q))
        self.genie = genie

    def run(self, L: np.ndarray, path: str = "", offset: int = 0) -> np.ndarray:
        N = L.shape[0]
        if N == 1:
            p = _normalize(L)[0]
            self.post[offset] = p
            if self.genie is not None:
                self.u[offset] = self.genie[offset]
            elif not self.frozen[offset]:
                self.u[offset] = int(np.argmax(p))
            return self.u[offset:offset + 1].copy()
        h = N // 2
        sigma = _sigma(self.sched, path)
        L1 = L[:h]
        L2 = L[h:][:, sigma]  # L2[j, b] = likelihood of x2 = sigma(b)
        minus = np.einsum("jab,jb->ja", L1[:, self.add], L2)
        v = self.run(_normalize(minus), path + "-", offset)
        plus = L1[np.arange(h)[:, None], self.add[v]] * L2
        w = self.run(_normalize(plus), path + "+", offset + h)
        return np.concatenate([self.add[v, w], sigma[w]])


def received_likelihoods(W: Channel, rx) -> np.ndarray:
    """``N x q`` likelihood matrix from output labels, or pass a likelihood matrix through."""
    if isinstance(rx, np.ndarray) and rx.dtype.kind == "f" and rx.ndim == 2:
        L = rx
    else:
        lookup = {lab: i for i, lab in enumerate(W.outputs)}
        try:
            idx = [lookup[y] for y in rx]
        except (KeyError, TypeError):
            raise LengthMismatch("received word contains unknown output labels") from None
        L = W.matrix[:, idx].T
    if np.any(L < 0):
        raise DegenerateLikelihood("negative likelihood")
    return np.asarray(L, dtype=float)


def sc_decode(spec: PolarCodeSpec, W: Channel, rx, genie: Optional[Sequence[int]] = None,
              return_posteriors: bool = False):
    """Successive-cancellation decode.

    Returns ``(message, u_hat)``, plus the per-index posteriors when
    ``return_posteriors`` is set.  With ``genie`` the true ``u`` is fed back
    instead of the decisions (genie-aided decoding).
    """
    if W.q != spec.q:
        raise SpecMismatch(f"{spec.q}-ary code for a {W.q}-input channel")
    L = received_likelihoods(W, rx)
    if L.shape != (spec.N, spec.q):
        raise LengthMismatch(f"received {L.shape[0]} symbols, block length is {spec.N}")
    sc = _SC(spec, None if genie is None else np.asarray(genie, dtype=np.int64))
    sc.run(L)
    msg = sc.u[list(spec.info_set)]
    if return_posteriors:
        return msg, sc.u, sc.post
    return msg, sc.u


# ---------------------------------------------------------------- serialization

def dump_spec(spec: PolarCodeSpec) -> str:
    lines = [
        f"{SPEC_MAGIC} {SPEC_VERSION}",
        f"q {spec.q}",
        f"n {spec.n}",
        f"kernel {spec.kernel}",
        f"algebra {spec.algebra}",
        "info " + " ".join(map(str, spec.info_set)),
        "frozen " + " ".join(map(str, spec.frozen_values)),
    ]
    for depth in range(spec.n):
        for i in range(1 << depth):
            p = "".join("+" if (i >> (depth - 1 - j)) & 1 else "-" for j in range(depth))
            if p in spec.schedule:
                lines.append(f"node {p or '.'} " + " ".join(str(int(v)) for v in spec.schedule[p]))
    return "\n".join(lines) + "\n"


def load_spec(text: str) -> PolarCodeSpec:
    fields: dict = {}
    schedule: dict = {}
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0].split()[:1] != [SPEC_MAGIC]:
        raise FileParseError("not a code spec document")
    try:
        version = int(lines[0].split()[1])
        if version != SPEC_VERSION:
            raise FileParseError(f"unsupported spec version {version}")
        for ln in lines[1:]:
            key, *rest = ln.split()
            if key == "node":
                path = "" if rest[0] == "." else rest[0]
                schedule[path] = tuple(int(v) for v in rest[1:])
            elif key in ("q", "n"):
                fields[key] = int(rest[0])
            elif key in ("kernel", "algebra"):
                fields[key] = rest[0]
            elif key in ("info", "frozen"):
                fields[key] = tuple(int(v) for v in rest)
            else:
                raise FileParseError(f"unknown field {key!r}")
        q = fields["q"]
        spec = PolarCodeSpec(q, fields["n"], fields["kernel"], fields["algebra"], schedule,
                             fields.get("info", ()), fields.get("frozen", ()))
    except (KeyError, IndexError, ValueError) as exc:
        if isinstance(exc, FileParseError):
            raise
        raise FileParseError(f"malformed code spec: {exc}") from None
    for sigma in schedule.values():
        algebra.validate_permutation(sigma, q)
    if len(spec.frozen_values) != spec.N - spec.K or len(set(spec.info_set)) != spec.K:
        raise FileParseError("information set and frozen values do not cover the block")
    return spec


def format_symbols(symbols) -> str:
    return " ".join(str(int(s)) for s in symbols) + "\n"


def parse_symbols(text: str) -> list:
    try:
        return [int(t) for t in text.split()]
    except ValueError as exc:
        raise FileParseError(f"bad symbol list: {exc}") from None


# ---------------------------------------------------------------- multi-level

class MultilevelCode:
    """One prime-alphabet polar code per digit of a composite input.

    Physical symbols are ``x = d1 + q1*d2 + q1*q2*d3 + ...`` where ``d_i`` is
    the codeword of level ``i``.  Decoding handles level 1 first with the
    higher digits averaged out, then each later level conditioned on the
    already decided lower digits.
    """

    def __init__(self, W: Channel, radices: Sequence[int], specs: Sequence[PolarCodeSpec]):
        radices = [int(r) for r in radices]
        if math.prod(radices) != W.q or not all(algebra.is_prime(r) for r in radices):
            raise BadFactorization(f"{radices} is not a prime factorization of {W.q}")
        if len(specs) != len(radices):
            raise SpecMismatch("one spec per level required")
        if len({s.N for s in specs}) != 1:
            raise SpecMismatch("all levels must share the block length")
        for r, s in zip(radices, specs):
            if s.q != r:
                raise SpecMismatch(f"level spec is {s.q}-ary, digit is {r}-ary")
        self.W = W
        self.radices = radices
        self.specs = list(specs)
        self.N = specs[0].N
        self.strides = [math.prod(radices[:i]) for i in range(len(radices))]
        xs = np.arange(W.q)
        self.digits = np.stack([(xs // st) % r for st, r in zip(self.strides, radices)], axis=1)

    @property
    def rate(self) -> float:
        """Normalized rate: information in base-q units per channel use."""
        bits = sum(s.K * math.log(s.q) for s in self.specs)
        return bits / (self.N * math.log(self.W.q))

    def encode(self, msgs: Sequence[Sequence[int]]) -> np.ndarray:
        if len(msgs) != len(self.specs):
            raise LengthMismatch("one message per level required")
        x = np.zeros(self.N, dtype=np.int64)
        for st, spec, msg in zip(self.strides, self.specs, msgs):
            x += st * encode(spec, msg)
        return x

    def decode(self, rx) -> list:
        L = received_likelihoods(self.W, rx)
        if L.shape[0] != self.N:
            raise LengthMismatch(f"received {L.shape[0]} symbols, block length is {self.N}")
        mask = np.ones_like(L, dtype=bool)
        msgs = []
        for i, (r, spec) in enumerate(zip(self.radices, self.specs)):
            onehot = (self.digits[:, i][:, None] == np.arange(r)[None, :]).astype(float)
            level = (L * mask) @ onehot
            msg, u = sc_decode(spec, Channel(np.eye(r), range(r)), level)
            msgs.append(msg)
            d = polar_transform(u, spec.group.add, _prepared_schedule(spec))
            mask &= self.digits[:, i][None, :] == d[:, None]
        return msgs


def multilevel_codec(W: Channel, radices: Sequence[int], specs: Sequence[PolarCodeSpec], msgs):
    code = MultilevelCode(W, radices, specs)
    return code.encode(msgs), code.decode
