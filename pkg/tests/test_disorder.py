import numpy as np
import pytest

from rfic.disorder import (DisorderLaw, FieldSource, FieldWindow, LawError, ModelParams, WalkPath,
                           anchored_walk, replica_seed, reverse_walk, sample_field, walk_from_field)


def test_twopoint_values_in_support():
    f = sample_field(DisorderLaw.parse("twopoint:2"), 1, 4, seed=11)
    assert set(f.values.tolist()) <= {-2.0, 2.0}


def test_prefix_stability_across_ranges():
    law = DisorderLaw.parse("gauss:1")
    a = sample_field(law, 1, 10, 5).values
    b = sample_field(law, 1, 20, 5).values
    assert np.array_equal(a, b[:10])


def test_values_depend_only_on_site():
    law = DisorderLaw.parse("uniform:1")
    wide = sample_field(law, -5000, 5000, 3)
    narrow = sample_field(law, -17, 4100, 3)
    assert np.array_equal(wide.sub(-17, 4100).values, narrow.values)


def test_gaussian_moments():
    f = sample_field(DisorderLaw.parse("gauss:1"), 1, 10**6, 2024)
    assert abs(f.values.mean()) < 5e-3
    assert abs(f.values.var() - 1.0) < 1e-2


def test_distinct_seeds_differ():
    law = DisorderLaw.parse("gauss:1")
    assert not np.array_equal(sample_field(law, 1, 50, 1).values, sample_field(law, 1, 50, 2).values)


@pytest.mark.parametrize("text", ["cauchy:1", "gauss:0", "gauss:-1", "uniform:nan", "table:1:1,2:1", "fig2mix:3"])
def test_bad_laws_rejected(text):
    with pytest.raises(LawError):
        DisorderLaw.parse(text)


def test_law_variances():
    assert DisorderLaw.parse("twopoint:2").variance == 4.0
    assert DisorderLaw.parse("uniform:3").variance == pytest.approx(3.0)
    assert DisorderLaw.parse("table:-1:1,1/2:2").variance == pytest.approx(0.5)
    mix = DisorderLaw.parse("fig2mix")
    assert mix.is_atomic and not DisorderLaw.parse("gauss:1").is_atomic
    vals = sample_field(mix, 1, 400_000, 1).values
    assert abs(vals.mean()) < 0.02
    assert vals.var() == pytest.approx(mix.variance, rel=0.02)


def test_walk_positive_window():
    w = walk_from_field(FieldWindow(1, np.array([1.0, -1.0, 2.0])))
    assert w.start == 0
    assert [w.at(n) for n in (0, 1, 2, 3)] == [0.0, 1.0, 0.0, 2.0]


def test_walk_negative_branch():
    w = walk_from_field(FieldWindow(-1, np.array([3.0, -1.0])))
    assert (w.at(-2), w.at(-1), w.at(0)) == (-2.0, 1.0, 0.0)


def test_zero_field_zero_walk():
    w = walk_from_field(FieldWindow(-3, np.zeros(7)))
    assert not np.any(w.values)


def test_walk_keeps_exact_increments():
    law = DisorderLaw.parse("gauss:1")
    w = FieldSource(law, 9).walk(-100, 100)
    assert np.array_equal(w.field().values, sample_field(law, -99, 100, 9).values)
    assert w.at(0) == 0.0


def test_reverse_walk():
    w = anchored_walk(FieldWindow(1, np.array([1.0, -1.0, 2.0, 0.5])))
    rv = reverse_walk(w)
    assert rv.at(-1) == w.at(1) == 1.0
    assert np.array_equal(reverse_walk(rv).values, w.values)
    assert reverse_walk(rv).start == w.start
    # increment into time n of the reversal is -h_{-n+1}
    for n in range(rv.start + 1, rv.stop + 1):
        assert rv.increment(n) == -w.increment(-n + 1)


def test_walk_shape_checked():
    with pytest.raises(ValueError):
        WalkPath(0, np.zeros(3), np.zeros(3))


def test_params():
    p = ModelParams.from_gamma(6.0)
    assert p.J == 3.0 and p.gamma == 6.0
    assert p.eps == pytest.approx(np.exp(-6.0))
    with pytest.raises(ValueError):
        ModelParams(0.0)


def test_replica_seed_mixing():
    assert replica_seed(1, 2) == replica_seed(1, 2)
    assert len({replica_seed(1, i) for i in range(100)}) == 100
    assert replica_seed(1, 2) != replica_seed(2, 1)
