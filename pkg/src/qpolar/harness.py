"""Channel factories and Monte Carlo block-error simulation."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from .channel import Channel, format_channel_text, make_channel, read_channel_file
from .codec import dump_spec, encode, sc_decode
from .construction import PolarCodeSpec, trial_rng, wilson_halfwidth
from .errors import BadParam, DegenerateLikelihood, PolarError

COUNTEREXAMPLE4 = [[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0]]
ERASURE = "e"


def qsc(q: int, p: float) -> Channel:
    """q-ary symmetric channel: correct with probability ``1 - p``, else uniform over the rest."""
    if q < 2 or not 0 <= p <= 1:
        raise BadParam(f"qsc needs q >= 2 and p in [0, 1], got q={q}, p={p}")
    mat = np.full((q, q), p / (q - 1))
    np.fill_diagonal(mat, 1.0 - p)
    return make_channel(mat)


def qec(q: int, eps: float) -> Channel:
    """q-ary erasure channel; the last output (label ``"e"``) is the erasure."""
    if q < 2 or not 0 <= eps <= 1:
        raise BadParam(f"qec needs q >= 2 and eps in [0, 1], got q={q}, eps={eps}")
    mat = np.zeros((q, q + 1))
    mat[np.arange(q), np.arange(q)] = 1.0 - eps
    mat[:, q] = eps
    return make_channel(mat, list(range(q)) + [ERASURE])


def counterexample4() -> Channel:
    """Quaternary channel that reveals only the parity of its input."""
    return make_channel(COUNTEREXAMPLE4)


def factory(kind: str, *params) -> Channel:
    if kind == "qsc":
        return qsc(int(params[0]), float(params[1]))
    if kind == "qec":
        return qec(int(params[0]), float(params[1]))
    if kind == "counterexample4":
        return counterexample4()
    if kind in ("file", "from_file"):
        return read_channel_file(params[0])
    if kind == "noiseless":
        return make_channel(np.eye(int(params[0])))
    if kind == "useless":
        q = int(params[0])
        m = int(params[1]) if len(params) > 1 else 1
        return make_channel(np.full((q, m), 1.0 / m))
    raise BadParam(f"unknown channel kind {kind!r}")


def parse_channel(text: str) -> Channel:
    """Build a channel from ``kind[:param...]``, e.g. ``qsc:3:0.1`` or ``file:path``."""
    kind, _, rest = text.partition(":")
    if kind in ("file", "from_file"):
        params = (rest,)
    else:
        params = tuple(rest.split(":")) if rest else ()
    try:
        return factory(kind, *params)
    except (IndexError, ValueError) as exc:
        if isinstance(exc, PolarError):
            raise
        raise BadParam(f"bad channel description {text!r}: {exc}") from None


# ---------------------------------------------------------------- provenance

def config_digest(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def channel_fingerprint(W: Channel) -> str:
    return hashlib.sha256(format_channel_text(W).encode()).hexdigest()[:16]


# ---------------------------------------------------------------- simulation

@dataclass(frozen=True)
class SimReport:
    trials: int
    block_errors: int
    symbol_errors: int
    bler: float
    ser: float
    wilson_95_halfwidth: float
    seed: int
    config_digest: str

    def to_dict(self) -> dict:
        return asdict(self)


def transmit(W: Channel, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Sample one output index per codeword symbol."""
    cdf = np.cumsum(W.matrix, axis=1)[x]
    r = rng.random(x.shape[0])
    return np.minimum((r[:, None] >= cdf).sum(axis=1), W.m - 1)


def simulate_bler(spec: PolarCodeSpec, W: Channel, trials: int, seed: int) -> SimReport:
    """Encode uniform messages, send them through ``W``, SC-decode and count errors.

    Trial ``t`` draws from its own stream derived from ``(seed, t)``.
    """
    if trials < 1:
        raise BadParam("trials must be at least 1")
    block_errors = symbol_errors = 0
    for t in range(trials):
        rng = trial_rng(seed, t)
        msg = rng.integers(0, spec.q, size=spec.K)
        y = transmit(W, encode(spec, msg), rng)
        try:
            est, _ = sc_decode(spec, W, W.matrix[:, y].T)
        except DegenerateLikelihood:
            block_errors += 1
            symbol_errors += spec.K
            continue
        wrong = int(np.sum(est != msg))
        symbol_errors += wrong
        block_errors += wrong > 0
    digest = config_digest({
        "spec": dump_spec(spec),
        "channel": channel_fingerprint(W),
        "trials": trials,
        "seed": int(seed),
    })
    ser = symbol_errors / (trials * spec.K) if spec.K else 0.0
    return SimReport(trials, block_errors, symbol_errors, block_errors / trials, ser,
                     wilson_halfwidth(block_errors, trials), int(seed), digest)
