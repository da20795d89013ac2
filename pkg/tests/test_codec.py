import numpy as np
import pytest

from qpolar.channel import make_channel, noiseless_channel, random_channel
from qpolar.codec import (
    MultilevelCode,
    dump_spec,
    encode,
    format_symbols,
    load_spec,
    multilevel_codec,
    parse_symbols,
    polar_transform,
    received_likelihoods,
    sc_decode,
)
from qpolar.construction import PolarCodeSpec, construct_code
from qpolar.errors import (
    BadFactorization,
    DegenerateLikelihood,
    FileParseError,
    IncompleteSchedule,
    LengthMismatch,
    SpecMismatch,
)
from qpolar.harness import qsc, transmit
from qpolar.kernels import make_kernel


def _full_schedule(q, n, sigma=None):
    sigma = tuple(range(q)) if sigma is None else sigma
    paths = [""]
    for _ in range(n - 1):
        paths += [p + s for p in paths if len(p) == len(paths[-1]) for s in "-+"]
    return {p: sigma for p in paths}


def _spec(q, n, info, sigma=None, frozen=None):
    N = 1 << n
    frozen = frozen if frozen is not None else (0,) * (N - len(info))
    return PolarCodeSpec(q, n, "group", "cyclic", _full_schedule(q, n, sigma), tuple(info), tuple(frozen))


def test_schedule_helper_covers_tree():
    assert set(_full_schedule(2, 3)) == {"", "-", "+", "--", "-+", "+-", "++"}


def test_length_two_transform():
    # x1 = u1 + u2, x2 = sigma(u2)
    spec = _spec(3, 1, (0, 1), sigma=(1, 2, 0))
    for u1 in range(3):
        for u2 in range(3):
            assert list(encode(spec, [u1, u2])) == [(u1 + u2) % 3, (u2 + 1) % 3]


def test_binary_transform_matches_kronecker():
    # identity maps: x = u G with G the n-fold Kronecker power of [[1, 1], [0, 1]]
    # (block [[A, 0], [A, A]] transposed to this "first half = v + w" layout)
    F = np.array([[1, 0], [1, 1]])
    G8 = np.kron(np.kron(F, F), F).T
    spec = _spec(2, 3, range(8))
    rng = np.random.default_rng(0)
    for _ in range(10):
        u = rng.integers(0, 2, 8)
        assert list(encode(spec, u)) == list((G8 @ u) % 2)


def test_noiseless_roundtrip():
    spec = _spec(5, 3, (1, 4, 6, 7), sigma=(0, 3, 1, 4, 2), frozen=(1, 2, 3, 4))
    W = noiseless_channel(5)
    rng = np.random.default_rng(1)
    for _ in range(20):
        msg = rng.integers(0, 5, 4)
        x = encode(spec, msg)
        est, u = sc_decode(spec, W, [int(v) for v in x])
        assert list(est) == list(msg)
        assert list(u[[0, 2, 3, 5]]) == [1, 2, 3, 4]


def test_constructed_code_decodes_noisy_channel():
    W = qsc(3, 0.05)
    spec, _ = construct_code(W, 6, make_kernel("perm", 3), rate=0.25, merge_budget=16)
    rng = np.random.default_rng(2)
    errors = 0
    for _ in range(50):
        msg = rng.integers(0, 3, spec.K)
        y = transmit(W, encode(spec, msg), rng)
        est, _ = sc_decode(spec, W, W.matrix[:, y].T)
        errors += int(np.any(est != msg))
    assert errors <= 5


def test_field_algebra_code_roundtrip():
    W = noiseless_channel(4)
    spec, _ = construct_code(qsc(4, 0.1), 3, make_kernel("mult", 4), K=4, merge_budget=16)
    assert spec.algebra == "field"
    msg = [3, 1, 2, 0]
    est, _ = sc_decode(spec, W, list(encode(spec, msg)))
    assert list(est) == msg


def test_spec_serialization_roundtrip():
    spec, _ = construct_code(qsc(3, 0.1), 4, make_kernel("perm", 3), rate=0.5, merge_budget=16)
    text = dump_spec(spec)
    back = load_spec("# comment\n" + text)
    assert dump_spec(back) == text
    assert back.info_set == spec.info_set
    with pytest.raises(FileParseError):
        load_spec("not a spec")
    with pytest.raises(FileParseError):
        load_spec(text.replace("info", "infox"))


def test_codec_errors():
    spec = _spec(2, 2, (3,))
    with pytest.raises(LengthMismatch):
        encode(spec, [1, 0])
    with pytest.raises(LengthMismatch):
        encode(spec, [2])
    with pytest.raises(SpecMismatch):
        sc_decode(spec, noiseless_channel(3), [0, 0, 0, 0])
    with pytest.raises(LengthMismatch):
        sc_decode(spec, noiseless_channel(2), [0, 0])
    with pytest.raises(LengthMismatch):
        received_likelihoods(noiseless_channel(2), ["z"])
    broken = PolarCodeSpec(2, 2, "group", "cyclic", {"": (0, 1)}, (3,), (0, 0, 0))
    with pytest.raises(IncompleteSchedule):
        encode(broken, [1])
    # an impossible received word (erasure-free channel, contradicting outputs) has no consistent input
    W = make_channel([[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(DegenerateLikelihood):
        sc_decode(_spec(2, 1, (1,)), W, np.array([[1.0, 0.0], [0.0, 0.0]]))


def test_symbols_format():
    assert parse_symbols(format_symbols([1, 2, 0])) == [1, 2, 0]
    with pytest.raises(FileParseError):
        parse_symbols("1 x")


def test_multilevel_noiseless_roundtrip():
    W = noiseless_channel(6)
    specs = [_spec(2, 3, (2, 5, 6, 7)), _spec(3, 3, (4, 6, 7))]
    msgs = [[1, 0, 1, 1], [2, 0, 1]]
    x, decode = multilevel_codec(W, [2, 3], specs, msgs)
    assert set(x) <= set(range(6))
    got = decode(list(x))
    assert [list(m) for m in got] == msgs
    code = MultilevelCode(W, [2, 3], specs)
    assert code.rate == pytest.approx((4 * np.log(2) + 3 * np.log(3)) / (8 * np.log(6)))
    with pytest.raises(BadFactorization):
        MultilevelCode(W, [6], specs[:1])
    with pytest.raises(SpecMismatch):
        MultilevelCode(W, [3, 2], specs)


def test_multilevel_noisy_channel():
    from qpolar.kernels import decompose_composite

    W = random_channel(6, 6, np.random.default_rng(3))
    W = make_channel(0.2 * W.matrix + 0.8 * np.eye(6))
    levels = decompose_composite(W, [2, 3])
    specs = [construct_code(ch, 5, make_kernel("group", ch.q), rate=0.3, merge_budget=16)[0] for ch in levels]
    code = MultilevelCode(W, [2, 3], specs)
    rng = np.random.default_rng(4)
    errors = 0
    for _ in range(30):
        msgs = [rng.integers(0, s.q, s.K) for s in specs]
        y = transmit(W, code.encode(msgs), rng)
        got = code.decode([W.outputs[i] for i in y])
        errors += any(np.any(a != b) for a, b in zip(got, msgs))
    assert errors <= 6
