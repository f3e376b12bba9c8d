"""Chi-square decomposition, standardization, and coincidence scores."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chi2_regimes.dist import make_custom, make_power_law, make_uniform
from chi2_regimes.errors import DataFormatError, InvalidInputError, InvalidParameterError
from chi2_regimes.stat import (
    CLASSICAL,
    THEOREM,
    SampleCounts,
    SampleSequence,
    chi_square,
    coincidence_scores,
    collision_pairs,
    decompose,
    draw_counts,
    draw_sequence,
    make_counts,
    read_counts_csv,
    read_sequence_file,
    s_statistic,
    sample_cells,
    standardize,
    to_counts,
    u_statistic,
)

from helpers import brute_chi2, brute_u_s, random_counts


def test_two_cell_example_values():
    d = make_uniform(2)
    c = make_counts({1: 3, 2: 1}, 2)
    b = decompose(d, c)
    assert b.chi2 == pytest.approx(1.0, abs=1e-12)
    assert b.u_stat == pytest.approx(12.0, abs=1e-12)
    assert b.s_stat == pytest.approx(8.0, abs=1e-12)
    assert chi_square(d, c) == pytest.approx(1.0, abs=1e-12)
    assert collision_pairs(c) == 3


def test_make_counts_drops_zero_cells():
    c = make_counts({1: 2, 3: 0, 2: 1}, 5)
    assert c.n == 3
    assert 3 not in c.counts


def test_sample_counts_validation():
    with pytest.raises(InvalidInputError):
        SampleCounts(3, {0: 3}, 4)  # index below range
    with pytest.raises(InvalidInputError):
        SampleCounts(3, {5: 3}, 4)  # index above range
    with pytest.raises(InvalidInputError):
        SampleCounts(3, {1: -3}, 4)  # negative count
    with pytest.raises(InvalidInputError):
        SampleCounts(4, {1: 3}, 4)  # n mismatch


def test_chi_square_matches_dense_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(50):
        m = int(rng.integers(2, 30))
        family = rng.integers(0, 3)
        if family == 0:
            d = make_uniform(m)
        elif family == 1:
            d = make_power_law(float(rng.uniform(0.0, 0.95)), m)
        else:
            w = rng.uniform(0.05, 1.0, size=m)
            d = make_custom(w / w.sum())
        c = make_counts(random_counts(rng, m), m)
        expect = brute_chi2(d, c)
        assert chi_square(d, c) == pytest.approx(expect, rel=1e-10, abs=1e-9)
        u, s = brute_u_s(d, c)
        assert u_statistic(d, c) == pytest.approx(u, rel=1e-12)
        assert s_statistic(d, c) == pytest.approx(s, rel=1e-12)


def test_decompose_identity_holds():
    rng = np.random.default_rng(5)
    for _ in range(50):
        m = int(rng.integers(2, 40))
        d = make_power_law(float(rng.uniform(0, 0.9)), m)
        c = make_counts(random_counts(rng, m), m)
        b = decompose(d, c)
        recomposed = (b.u_stat + b.s_stat) / c.n - c.n
        assert abs(b.chi2 - recomposed) <= 1e-9 * (1.0 + abs(b.chi2))


def test_standardize_conventions():
    d = make_uniform(2)
    b = decompose(d, make_counts({1: 3, 2: 1}, 2))
    assert standardize(b) == pytest.approx((1.0 - 2.0) / np.sqrt(4.0))
    assert standardize(b, THEOREM) == pytest.approx(-0.5)
    assert standardize(b, CLASSICAL) == pytest.approx((1.0 - 1.0) / np.sqrt(2.0))


def test_standardize_classical_needs_two_cells():
    d = make_uniform(1)
    b = decompose(d, make_counts({1: 4}, 1))
    standardize(b, THEOREM)  # fine
    with pytest.raises(InvalidParameterError):
        standardize(b, CLASSICAL)


def test_standardize_rejects_unknown_convention():
    d = make_uniform(2)
    b = decompose(d, make_counts({1: 1, 2: 1}, 2))
    with pytest.raises(InvalidParameterError):
        standardize(b, "other")


def test_uniform_collision_identity():
    # for equal cells the whole statistic is a linear function of the
    # number of colliding pairs
    rng = np.random.default_rng(3)
    for _ in range(25):
        m = int(rng.integers(2, 50))
        d = make_uniform(m)
        c = make_counts(random_counts(rng, m), m)
        cp = collision_pairs(c)
        expect = 2.0 * m * cp / c.n + m - c.n
        assert chi_square(d, c) == pytest.approx(expect, rel=1e-12)


def test_coincidence_scores_small_example():
    d = make_uniform(2)
    s = SampleSequence(4, np.array([1, 1, 2, 1]))
    scores = coincidence_scores(d, s)
    np.testing.assert_allclose(scores, [0.0, 1.0, 0.0, 2.0], rtol=0)


def test_coincidence_scores_sum_is_pair_term():
    rng = np.random.default_rng(8)
    for _ in range(25):
        m = int(rng.integers(2, 60))
        d = make_power_law(float(rng.uniform(0, 0.9)), m)
        n = int(rng.integers(1, 300))
        seq = draw_sequence(d, n, np.random.default_rng(rng.integers(1 << 32)))
        scores = coincidence_scores(d, seq)
        u = u_statistic(d, to_counts(seq, m))
        assert float(scores.sum()) == pytest.approx(u / (2.0 * m), abs=1e-9)


def test_coincidence_scores_rejects_out_of_range():
    d = make_uniform(3)
    with pytest.raises(InvalidInputError):
        coincidence_scores(d, SampleSequence(2, np.array([1, 4])))


def test_sample_cells_bounds_and_determinism():
    d = make_power_law(0.5, 100)
    a = sample_cells(d, 500, np.random.default_rng(42))
    b = sample_cells(d, 500, np.random.default_rng(42))
    np.testing.assert_array_equal(a, b)
    assert a.min() >= 1 and a.max() <= 100
    # heavier head than tail
    assert np.mean(a <= 10) > np.mean(a > 90)


def test_draw_counts_round_trip():
    d = make_uniform(50)
    seq = draw_sequence(d, 200, np.random.default_rng(1))
    c = to_counts(seq, 50)
    assert c.n == 200
    assert sum(c.counts.values()) == 200
    c2 = draw_counts(d, 200, np.random.default_rng(1))
    assert c2.counts == c.counts


def test_read_counts_csv(tmp_path):
    path = tmp_path / "counts.csv"
    path.write_text("cell,count\n3,2\n1,5\n")
    assert read_counts_csv(path) == {3: 2, 1: 5}


def test_read_counts_csv_rejects_duplicates(tmp_path):
    path = tmp_path / "counts.csv"
    path.write_text("1,2\n1,3\n")
    with pytest.raises(DataFormatError):
        read_counts_csv(path)


def test_read_counts_csv_rejects_negative(tmp_path):
    path = tmp_path / "counts.csv"
    path.write_text("1,-2\n")
    with pytest.raises(DataFormatError):
        read_counts_csv(path)


def test_read_sequence_file(tmp_path):
    path = tmp_path / "seq.txt"
    path.write_text("3\n1\n3\n")
    s = read_sequence_file(path)
    assert s.n == 3
    np.testing.assert_array_equal(np.asarray(s.values), [3, 1, 3])


@given(
    st.integers(min_value=2, max_value=20),
    st.lists(st.integers(min_value=1, max_value=20), min_size=1, max_size=60),
    st.floats(min_value=0.0, max_value=0.9),
)
@settings(max_examples=150, deadline=None)
def test_identity_property(m, raw_values, alpha):
    values = np.array([1 + (v - 1) % m for v in raw_values])
    d = make_power_law(alpha, m)
    seq = SampleSequence(len(values), values)
    c = to_counts(seq, m)
    b = decompose(d, c)
    # decomposition identity
    assert abs(b.chi2 - ((b.u_stat + b.s_stat) / c.n - c.n)) <= 1e-9 * (1 + abs(b.chi2))
    # score sums reproduce the pair term
    scores = coincidence_scores(d, seq)
    assert float(scores.sum()) == pytest.approx(b.u_stat / (2.0 * m), abs=1e-9)
    # nonnegativity / floor built into the breakdown
    assert b.u_stat >= -1e-12
    assert b.s_stat >= c.n - 1e-9
