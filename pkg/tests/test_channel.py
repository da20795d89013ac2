import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import entropy

from qpolar import algebra
from qpolar.channel import (
    average_z,
    capacity_bounds_from_z,
    erasure_probability,
    format_channel_text,
    is_equidistant,
    make_channel,
    merge_outputs_lossless,
    metrics,
    ml_error_probability,
    mutual_information,
    noiseless_channel,
    pairwise_z,
    pairwise_z_matrix,
    parse_channel_text,
    quantize_outputs,
    random_channel,
    read_channel_file,
    symmetric_capacity,
    useless_channel,
    write_channel_file,
    z_profile,
)
from qpolar.errors import (
    BudgetTooSmall,
    DuplicateLabel,
    EmptyAlphabet,
    EqualInputs,
    FileParseError,
    GroupSizeMismatch,
    IndexOutOfRange,
    NegativeEntry,
    NonStochasticRow,
)
from qpolar.harness import counterexample4, qec, qsc


def _h(p):
    return entropy([p, 1 - p])


def test_qsc_capacity_closed_form():
    for q, p in [(2, 0.11), (3, 0.1), (5, 0.3)]:
        expected = math.log(q) - _h(p) - p * math.log(q - 1)
        cap = symmetric_capacity(qsc(q, p))
        assert cap.nats == pytest.approx(expected, abs=1e-12)
        assert cap.normalized == pytest.approx(expected / math.log(q), abs=1e-12)


def test_qsc_z_and_ml_error():
    q, p = 3, 0.1
    expected = 2 * math.sqrt((1 - p) * p / (q - 1)) + (q - 2) * p / (q - 1)
    W = qsc(q, p)
    assert pairwise_z(W, 0, 2) == pytest.approx(expected, abs=1e-14)
    assert average_z(W) == pytest.approx(expected, abs=1e-14)
    assert ml_error_probability(W) == pytest.approx(p, abs=1e-14)
    assert is_equidistant(W)


def test_erasure_channel():
    W = qec(3, 0.25)
    assert symmetric_capacity(W).normalized == pytest.approx(0.75, abs=1e-12)
    assert average_z(W) == pytest.approx(0.25, abs=1e-12)
    assert erasure_probability(W) == pytest.approx(0.25)
    assert erasure_probability(qsc(3, 0.1)) is None


def test_trivial_channels():
    mt = metrics(noiseless_channel(4))
    assert mt.capacity_normalized == pytest.approx(1.0)
    assert mt.z_avg == 0 and mt.ml_error == pytest.approx(0.0)
    mt = metrics(useless_channel(3, 2))
    assert mt.capacity_nats == pytest.approx(0.0, abs=1e-15)
    assert mt.z_avg == pytest.approx(1.0)


def test_counterexample_metrics():
    W = counterexample4()
    prof, zmax = z_profile(W, algebra.cyclic_group(4))
    assert np.allclose(prof, [0, 1, 0])
    assert zmax == 1.0
    assert average_z(W) == pytest.approx(1 / 3)
    assert symmetric_capacity(W).normalized == pytest.approx(0.5)
    assert ml_error_probability(W) == pytest.approx(0.5)
    lower, _ = capacity_bounds_from_z(1 / 3, 4)
    assert lower == pytest.approx(0.5)
    assert not is_equidistant(W)


def test_mutual_information_matches_scipy(rng):
    for _ in range(20):
        W = random_channel(4, 5, rng, sparsity=0.3)
        px = rng.dirichlet(np.ones(4))
        joint = px[:, None] * W.matrix
        py = joint.sum(axis=0)
        ref = entropy(py) - sum(px[x] * entropy(W.matrix[x]) for x in range(4))
        assert mutual_information(W, px) == pytest.approx(ref, abs=1e-12)


def test_profile_mean_equals_average(rng):
    for q in (3, 4, 5, 8):
        W = random_channel(q, 4, rng)
        for G in (algebra.cyclic_group(q), ) + ((algebra.finite_field(q).additive_group(),) if q != 6 else ()):
            prof, _ = z_profile(W, G)
            assert prof.mean() == pytest.approx(average_z(W), abs=1e-12)


def test_validation_errors():
    with pytest.raises(NonStochasticRow):
        make_channel([[0.5, 0.4], [0.5, 0.5]])
    with pytest.raises(NegativeEntry):
        make_channel([[1.2, -0.2], [0.5, 0.5]])
    with pytest.raises(EmptyAlphabet):
        make_channel(np.zeros((0, 2)))
    with pytest.raises(DuplicateLabel):
        make_channel(np.eye(2), ["a", "a"])
    W = qsc(3, 0.1)
    with pytest.raises(EqualInputs):
        pairwise_z(W, 1, 1)
    with pytest.raises(IndexOutOfRange):
        pairwise_z(W, 0, 3)
    with pytest.raises(GroupSizeMismatch):
        z_profile(W, algebra.cyclic_group(4))


def test_zero_entries_finite():
    W = make_channel([[1, 0, 0], [0, 0.5, 0.5]])
    assert math.isfinite(symmetric_capacity(W).nats)


def test_lossless_merge_preserves_everything(rng):
    # duplicate and scaled columns: outputs (a, a/2, a/2, b) merge to (a, b)
    base = random_channel(3, 3, rng).matrix
    mat = np.column_stack([base[:, 0] / 2, base[:, 1], base[:, 0] / 2, base[:, 2] * 0.3, base[:, 2] * 0.7])
    W = make_channel(mat)
    M = merge_outputs_lossless(W)
    assert M.m == 3
    for f in (lambda c: symmetric_capacity(c).nats, average_z, ml_error_probability):
        assert f(M) == pytest.approx(f(W), abs=1e-12)
    assert np.allclose(pairwise_z_matrix(M), pairwise_z_matrix(W), atol=1e-12)


def test_quantize_degrades_and_respects_budget(rng):
    W = random_channel(3, 40, rng)
    Q, loss = quantize_outputs(W, 8)
    assert Q.m <= 8
    assert loss >= 0
    assert loss == pytest.approx(symmetric_capacity(W).nats - symmetric_capacity(Q).nats, abs=1e-12)
    # merging can only make inputs harder to tell apart
    assert average_z(Q) >= average_z(W) - 1e-12
    assert np.allclose(Q.matrix.sum(axis=1), 1.0, atol=1e-12)
    same, zero = quantize_outputs(W, 64)
    assert same is W and zero == 0.0
    with pytest.raises(BudgetTooSmall):
        quantize_outputs(W, 2)


def test_file_roundtrip(tmp_path, rng):
    W = random_channel(4, 3, rng)
    path = tmp_path / "w.txt"
    write_channel_file(W, path)
    R = read_channel_file(path)
    assert np.array_equal(R.matrix, W.matrix)
    text = "# comment\n2 2\n  # rows follow\n0.9 0.1\n0.1 0.9\n"
    assert parse_channel_text(text).matrix[0, 0] == 0.9
    assert format_channel_text(parse_channel_text(format_channel_text(W))) == format_channel_text(W)
    with pytest.raises(FileParseError):
        parse_channel_text("2 2\n0.5 0.5\n")
    with pytest.raises(FileParseError):
        parse_channel_text("two 2\n")


@settings(max_examples=60, deadline=None)
@given(q=st.integers(2, 6), m=st.integers(1, 6), seed=st.integers(0, 2**32 - 1))
def test_bounds_property(q, m, seed):
    W = random_channel(q, m, np.random.default_rng(seed), sparsity=0.25)
    z = average_z(W)
    lower, upper = capacity_bounds_from_z(z, q)
    cap = symmetric_capacity(W).normalized
    assert lower - 1e-9 <= cap <= upper + 1e-9
    assert ml_error_probability(W) <= (q - 1) * z + 1e-12
    assert 0 <= z <= 1
