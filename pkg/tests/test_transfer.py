import math

import numpy as np
import pytest

from rfic.disorder import DisorderLaw, FieldSource, FieldWindow, ModelParams
from rfic.oracle import enumerate_window
from rfic.transfer import (b_gamma, contraction_bound, gibbs_marginal, gibbs_sample, log_partition,
                           m_and_sm, mismatch_probability, run_l, run_r, sandwich_l, sandwich_r,
                           site_marginals, step_l)

BOUNDARIES = [(1, 1), (1, -1), (-1, 1), (-1, -1)]


def test_empty_window_is_boundary_weight():
    assert math.exp(log_partition(np.array([]), ModelParams(1.0), 1, 1)) == pytest.approx(math.e)


def test_single_free_spin():
    # J -> 0 limit of one spin in zero field
    assert log_partition(np.array([0.0]), ModelParams(1e-12), 1, -1) == pytest.approx(math.log(2.0))


def test_single_spin_two_terms():
    J, h = 0.7, 0.3
    for a, b in BOUNDARIES:
        ref = math.log(sum(math.exp(J * a * s + J * s * b + h * s) for s in (1, -1)))
        assert log_partition(np.array([h]), ModelParams(J), a, b) == pytest.approx(ref, abs=1e-13)


@pytest.mark.parametrize("a,b", BOUNDARIES)
def test_log_partition_matches_enumeration(a, b):
    h = np.random.default_rng(4).normal(size=12)
    ref = enumerate_window(h, 1.5, a, b).log_z
    assert abs(log_partition(h, ModelParams(1.5), a, b) - ref) <= 1e-10 * max(1.0, abs(ref))


def test_large_coupling_no_overflow():
    h = np.random.default_rng(1).normal(size=1000) * 50
    val = log_partition(h, ModelParams(400.0), 1, 1)
    assert math.isfinite(val)


def test_b_gamma_values():
    assert b_gamma(0.0, 3.0) == 0.0
    assert b_gamma(4.0, 4.0) == pytest.approx(4 + math.log((1 + math.exp(-8)) / 2), abs=1e-14)
    xs = np.linspace(-50, 50, 1001)
    assert np.array_equal(b_gamma(-xs, 7.0), -b_gamma(xs, 7.0))
    assert np.all(np.abs(b_gamma(xs, 7.0)) <= 7.0)
    assert np.all(np.abs(b_gamma(np.linspace(-5, 5, 101), 7.0)) < 7.0)


def test_step_strictly_increasing():
    p = ModelParams(2.0)
    ys = np.linspace(-3.99, 3.99, 1000)
    for h in np.random.default_rng(0).normal(size=20):
        assert np.all(np.diff(step_l(ys, h, p)) > 0)


def test_zero_field_chain_stays_zero():
    path = run_l(FieldWindow(1, np.zeros(50)), 0.0, ModelParams(1.0))
    assert not np.any(path.values)


@pytest.mark.parametrize("a", [1, -1])
def test_chain_is_log_ratio(a):
    h = np.random.default_rng(7).normal(size=10)
    p = ModelParams(0.8)
    path = run_l(FieldWindow(1, h), a * p.gamma, p)
    for m in range(1, 11):
        ratio = enumerate_window(h[:m], p.J, a, 1).log_z - enumerate_window(h[:m], p.J, a, -1).log_z
        assert path.at(m) == pytest.approx(ratio, abs=1e-9)


def test_r_chain_is_log_ratio():
    h = np.random.default_rng(8).normal(size=9)
    p = ModelParams(1.1)
    path = run_r(FieldWindow(1, h), -p.gamma, p)
    for n in range(1, 10):
        ratio = enumerate_window(h[n - 1:], p.J, 1, -1).log_z - enumerate_window(h[n - 1:], p.J, -1, -1).log_z
        assert path.at(n) == pytest.approx(ratio, abs=1e-9)


def test_contraction_bound_holds():
    p = ModelParams(1.5)
    h = FieldSource(DisorderLaw.parse("gauss:1"), 3).field(1, 200)
    hi = run_l(h, p.gamma, p).values
    lo = run_l(h, -p.gamma, p).values
    steps = np.arange(1, 201)
    assert np.all(hi - lo <= contraction_bound(p.gamma, steps) + 1e-12)


def test_gibbs_marginal_and_mismatch():
    assert gibbs_marginal(0.0, 0.0, 0.0) == 0.5
    assert mismatch_probability(0, 0.0) == 1.0
    assert mismatch_probability(0, 5.0) == 1.0
    assert mismatch_probability(1, 3.0) == pytest.approx(1 / (1 + math.exp(3.0)))
    assert m_and_sm(0.0, 0.0, 0.0) == (0.0, 1)
    assert m_and_sm(-4.0, 0.0, -4.0)[1] == -1
    for m in np.linspace(-3, 3, 13):
        _, s = m_and_sm(m, 0.0, 0.0)
        assert (gibbs_marginal(m, 0.0, 0.0) >= 0.5) == (s == 1)


@pytest.mark.parametrize("a,b", BOUNDARIES)
def test_site_marginals_match_enumeration(a, b):
    h = np.random.default_rng(5).normal(size=10)
    got = site_marginals(FieldWindow(1, h), ModelParams(0.9), a, b)
    assert np.max(np.abs(got - enumerate_window(h, 0.9, a, b).marginals)) <= 1e-10


def test_sampler_zero_field_domains():
    J = 1.0
    spins = gibbs_sample(FieldWindow(1, np.zeros(100_000)), ModelParams(J), 1, 1, seed=3, count=4)
    lengths = []
    for row in spins:
        walls = np.flatnonzero(row[1:] != row[:-1])
        lengths.extend(np.diff(walls).tolist())
    lengths = np.array(lengths)
    se = lengths.std(ddof=1) / math.sqrt(lengths.size)
    assert abs(lengths.mean() - (math.exp(2 * J) + 1)) < 3 * se


def test_sampler_matches_weights_small():
    h = np.array([0.3, -0.8, 0.1])
    J, n = 0.6, 200_000
    spins = gibbs_sample(FieldWindow(1, h), ModelParams(J), 1, -1, seed=5, count=n)
    ref = enumerate_window(h, J, 1, -1)
    codes = ((spins > 0).astype(int) * np.array([4, 2, 1])).sum(axis=1)
    counts = np.bincount(codes, minlength=8)
    configs = [tuple(1 if (c >> (2 - k)) & 1 else -1 for k in range(3)) for c in range(8)]
    for c, cfg in enumerate(configs):
        energy = J * (1 * cfg[0] + cfg[0] * cfg[1] + cfg[1] * cfg[2] + cfg[2] * -1) + float(np.dot(h, cfg))
        p = math.exp(energy - ref.log_z)
        se = math.sqrt(p * (1 - p) / n)
        assert abs(counts[c] / n - p) < 4 * se + 1e-12


def test_sampler_decoupled_limit():
    h = np.array([0.5, -1.0, 2.0])
    spins = gibbs_sample(FieldWindow(1, h), ModelParams(1e-9), 1, 1, seed=1, count=200_000)
    expect = np.exp(h) / (np.exp(h) + np.exp(-h))
    assert np.all(np.abs((spins > 0).mean(axis=0) - expect) < 0.005)


def test_sampler_reproducible():
    f = FieldWindow(1, np.random.default_rng(0).normal(size=50))
    a = gibbs_sample(f, ModelParams(1.0), 1, 1, seed=42, count=3)
    b = gibbs_sample(f, ModelParams(1.0), 1, 1, seed=42, count=3)
    assert np.array_equal(a, b)


def test_sandwich_orders_and_converges():
    p = ModelParams(5.0)
    # walk falls 15 and climbs back 15, both beyond gamma = 10
    down = [-1.0] * 15 + [1.0] * 15
    sw = sandwich_l(FieldWindow(-len(down) + 1, np.array(down)), p)
    assert sw.lower <= sw.upper
    assert sw.gap <= 1e-6 * p.gamma
    flat = sandwich_l(FieldWindow(1, np.zeros(30)), p)
    gaps = []
    lo, hi = -p.gamma, p.gamma
    for _ in range(30):
        lo, hi = b_gamma(lo, p.gamma), b_gamma(hi, p.gamma)
        gaps.append(hi - lo)
    assert flat.gap == pytest.approx(gaps[-1])
    assert np.all(np.diff(gaps) < 0)


def test_sandwich_r_brackets():
    p = ModelParams(2.0)
    f = FieldSource(DisorderLaw.parse("gauss:1"), 8).field(1, 2000)
    sw = sandwich_r(f, p)
    assert sw.site == 1 and sw.lower <= sw.upper and sw.converged
