import math

import numpy as np
import pytest
from statsmodels.stats.proportion import proportion_confint

from qpolar.channel import symmetric_capacity
from qpolar.construction import (
    construct_code,
    erasure_log2_z,
    evolve_tree,
    index_of,
    leaves_to_csv,
    path_of,
    polarization_fraction,
    rate_experiment,
    sample_paths,
    select_information_set,
    track_path,
    trial_rng,
    wilson_halfwidth,
)
from qpolar.errors import BadBeta, BadDelta, BudgetTooSmall, KOutOfRange
from qpolar.harness import counterexample4, qec, qsc
from qpolar.kernels import make_kernel


def _scalar_erasure(eps, path):
    z = eps
    for s in path:
        z = z * z if s == "+" else 2 * z - z * z
    return z


def test_paths():
    assert path_of(5, 4) == "-+-+"
    assert all(index_of(path_of(i, 5)) == i for i in range(32))
    assert index_of("") == 0


def test_erasure_tree_matches_scalar_recursion():
    tree = evolve_tree(qec(2, 0.4), 5, make_kernel("group", 2))
    assert [l.path for l in tree.leaves] == [path_of(i, 5) for i in range(32)]
    for leaf in tree.leaves:
        assert leaf.metrics.z_avg == pytest.approx(_scalar_erasure(0.4, leaf.path), abs=1e-12)
        assert leaf.merge_loss == 0


def test_tree_conserves_with_merging():
    W = qsc(3, 0.15)
    tree = evolve_tree(W, 5, make_kernel("group", 3), merge_budget=12)
    total = sum(l.metrics.capacity_nats + l.merge_loss for l in tree.leaves)
    assert total == pytest.approx(32 * symmetric_capacity(W).nats, abs=1e-9)
    assert any(l.merge_loss > 0 for l in tree.leaves)
    with pytest.raises(BudgetTooSmall):
        evolve_tree(W, 2, make_kernel("group", 3), merge_budget=2)


def test_polarization_fraction():
    tree = evolve_tree(counterexample4(), 3, make_kernel("group", 4))
    assert polarization_fraction(tree.leaves, 0.1) == 1.0
    tree = evolve_tree(qec(2, 0.5), 8, make_kernel("group", 2))
    assert polarization_fraction(tree.leaves, 0.1) < 0.5
    with pytest.raises(BadDelta):
        polarization_fraction(tree.leaves, 0.5)


def test_information_set_picks_reliable_leaves():
    tree = evolve_tree(qec(2, 0.5), 3, make_kernel("group", 2))
    # exact Bhattacharyya values of the 8 erasure leaves, ordered by reliability
    z = [_scalar_erasure(0.5, path_of(i, 3)) for i in range(8)]
    expected = tuple(sorted(sorted(range(8), key=lambda i: (z[i], i))[:4]))
    assert select_information_set(tree.leaves, 4) == expected == (3, 5, 6, 7)
    with pytest.raises(KOutOfRange):
        select_information_set(tree.leaves, 9)


def test_csv_has_digest_and_header():
    tree = evolve_tree(qec(2, 0.5), 1, make_kernel("group", 2))
    lines = leaves_to_csv(tree.leaves, "abc").splitlines()
    assert lines[0] == "# config_digest=abc"
    assert lines[1] == "path,I_normalized,z_avg,z_max,merge_loss"
    assert len(lines) == 4


def test_wilson_against_statsmodels():
    for k, n in [(0, 50), (7, 100), (500, 1000), (100, 100)]:
        lo, hi = proportion_confint(k, n, alpha=0.05, method="wilson")
        assert wilson_halfwidth(k, n) == pytest.approx((hi - lo) / 2, rel=1e-6)


def test_trial_streams_are_reproducible_and_distinct():
    a = trial_rng(7, 3).random(4)
    assert np.array_equal(a, trial_rng(7, 3).random(4))
    assert not np.array_equal(a, trial_rng(7, 4).random(4))
    assert np.array_equal(sample_paths(6, 10, 1)[4], trial_rng(1, 4).random(6) < 0.5)


def test_erasure_log_recursion():
    signs = np.array([[True, False, True], [False, False, False]])
    lz = erasure_log2_z(0.5, signs)
    for row, val in zip(signs, lz):
        path = "".join("+" if s else "-" for s in row)
        assert val == pytest.approx(math.log2(_scalar_erasure(0.5, path)), abs=1e-12)
    # deep plus paths underflow ordinary floats but stay exact in the log domain
    assert erasure_log2_z(0.5, np.ones((1, 40), dtype=bool))[0] == pytest.approx(-(2.0 ** 40))


def test_rate_experiment_methods_agree_on_erasure_channel():
    W = qec(2, 0.5)
    exact = rate_experiment(W, 8, 0.4, 300, seed=11)
    evolved = rate_experiment(W, 8, 0.4, 300, seed=11, method="channel")
    assert exact.method == "erasure" and evolved.method == "channel"
    assert exact.successes == evolved.successes
    with pytest.raises(BadBeta):
        rate_experiment(W, 8, 1.5, 10, seed=0)


def test_track_path():
    vals = track_path(qec(2, 0.5), "+-", make_kernel("group", 2))
    assert vals == pytest.approx([0.5, 0.25, 0.4375])


def test_construct_code_rate_and_schedule():
    spec, tree = construct_code(qsc(3, 0.1), 4, make_kernel("perm", 3), rate=0.3, merge_budget=16)
    assert spec.K == 5 and spec.N == 16
    assert len(spec.schedule) == 15
    assert spec.info_set == select_information_set(tree.leaves, 5)
    assert len(spec.frozen_values) == 11
    with pytest.raises(KOutOfRange):
        construct_code(qsc(3, 0.1), 2, make_kernel("group", 3))
