"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (printed in the terminal summary) and then
asserts the same condition, so a failure shows up in both places.
"""

import time

import numpy as np

from rfic.cli import main
from rfic.disorder import DisorderLaw, FieldSource, ModelParams, replica_seed
from rfic.experiments import (ExperimentConfig, dn_trajectory, estimate_D_Gamma, free_energy, scaling_sweep,
                              zero_field_free_energy)
from rfic.extrema import fisher_z, gamma_extrema_two_sided
from rfic.oracle import groundstate_check, oracle_check
from rfic.reflected import (NoSwingError, hat_l_explicit, hat_l_from_coalescence, hat_r_explicit,
                            hat_r_from_coalescence, hat_window)
from rfic.rg import rg_vs_extrema, rg_vs_extrema_sampled, sample_rg_field
from rfic.transfer import log_partition

GAUSS = DisorderLaw.parse("gauss:1")
SEED = 2024


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def test_oracle_equivalence(record_criterion):
    with Timer() as t:
        s = oracle_check(16, 200, SEED)
    ok = s.max_rel_err <= 1e-10 and s.max_marginal_err <= 1e-10 and t.elapsed <= 60
    detail = f"max_rel_err={s.max_rel_err:.2e} max_marginal_err={s.max_marginal_err:.2e} time={t.elapsed:.1f}s"
    assert record_criterion(1, "transfer matrices match enumeration", ok, detail), detail


def _closed_vs_iterated(src, gamma):
    w = 64 * int(gamma**2)
    while True:
        try:
            walk = src.walk(-w, w)
            dl = abs(hat_l_explicit(walk, gamma, 0).value - hat_l_from_coalescence(src.field(-w + 1, 0), gamma).value)
            dr = abs(hat_r_explicit(walk, gamma, 1).value - hat_r_from_coalescence(src.field(1, w), gamma).value)
            return max(dl, dr)
        except NoSwingError:
            w *= 2


def test_closed_form_wall_chains(record_criterion):
    worst = 0.0
    with Timer() as t:
        for gamma in (4.0, 8.0, 16.0):
            for i in range(1000):
                src = FieldSource(GAUSS, replica_seed(SEED, 2, i))
                worst = max(worst, _closed_vs_iterated(src, gamma))
    ok = worst <= 1e-12 and t.elapsed <= 60
    detail = f"max |closed - iterated| = {worst:.2e} over 3000 fields, time={t.elapsed:.1f}s"
    assert record_criterion(2, "closed-form l_hat_0 / r_hat_1 equal iterated values", ok, detail), detail


def test_hat_sign_equals_fisher(record_criterion):
    bad = near_bad = near = 0
    lo, hi = 1, 10_000
    with Timer() as t:
        for gamma in (4.0, 8.0, 16.0):
            for i in range(100):
                src = FieldSource(GAUSS, replica_seed(SEED, 3, i))
                m = hat_window(src, gamma, lo, hi).m_hat
                fz = fisher_z(gamma_extrema_two_sided(src, gamma, (lo, hi)), (lo, hi)).values
                small = np.abs(m) <= 1e-9
                near += int(small.sum())
                near_bad += int(np.count_nonzero(fz[small]))
                bad += int(np.count_nonzero(np.sign(m[~small]).astype(int) != fz[~small]))
    ok = bad == 0 and near_bad == 0 and t.elapsed <= 120
    detail = (f"mismatches={bad} near-zero sites={near} (nonzero Fisher there: {near_bad}) "
              f"over 300 windows of 1e4 sites, time={t.elapsed:.1f}s")
    assert record_criterion(3, "sign of m_hat equals two-sided Fisher configuration", ok, detail), detail


def test_ground_state_structure(record_criterion):
    with Timer() as t:
        s = groundstate_check(14, 200, SEED, crafted=True)
    ok = s.ok and t.elapsed <= 120
    detail = (f"cases={s.cases} structure_failures={s.structure_failures} sign_failures={s.sign_failures} "
              f"time={t.elapsed:.1f}s")
    assert record_criterion(4, "maximizer sets and site signs from the extrema family", ok, detail), detail


def test_decimation_contains_extrema(record_criterion):
    contain = bracket = contain_fl = bracket_fl = 0
    with Timer() as t:
        for i in range(1000):
            rep = rg_vs_extrema_sampled(FieldSource(GAUSS, replica_seed(SEED, 5, i)), 5.0, 10_000)
            contain += rep.containment
            bracket += rep.bracket
            contain_fl += rep.containment_flanked
            bracket_fl += rep.bracket_flanked
        crafted = rg_vs_extrema(sample_rg_field(), 2.5)
    crafted_ok = {12, 14, 23, 38} <= set(crafted.breakpoints) and len(crafted.spurious) == 3
    ok = contain == 1000 and bracket == 1000 and crafted_ok and t.elapsed <= 60
    detail = (f"containment {contain}/1000, bracket {bracket}/1000; without edge records: "
              f"containment {contain_fl}/1000, bracket {bracket_fl}/1000; crafted instance "
              f"breakpoints={crafted.breakpoints} spurious={len(crafted.spurious)}; time={t.elapsed:.1f}s")
    assert record_criterion(5, "decimation breakpoints contain the extrema", ok, detail), detail


def test_gap_excess_scaling(record_criterion):
    with Timer() as t:
        row = scaling_sweep(ExperimentConfig(GAUSS, (30.0,), replicas=10_000, seed=SEED))[0]
    ok = 0.9 <= row.mean_gap_excess <= 1.1 and abs(row.corr_even) <= row.corr_band and t.elapsed <= 180
    detail = (f"mean excess={row.mean_gap_excess:.4f} corr_even={row.corr_even:+.4f} "
              f"(band {row.corr_band:.4f}) ks={row.ks_exp1:.4f} time={t.elapsed:.1f}s")
    assert record_criterion(6, "gap excess mean near 1 and even gaps uncorrelated", ok, detail), detail


def test_discrepancy_scaling(record_criterion):
    gammas = (5.0, 10.0, 20.0, 40.0)
    with Timer() as t:
        rows = estimate_D_Gamma(ExperimentConfig(GAUSS, gammas, replicas=10_000, seed=SEED))
    est = [r.estimate for r in rows]
    scaled = [r.extra["gamma_scaled"] for r in rows]
    decreasing = all(a > b for a, b in zip(est, est[1:]))
    bounded = all(s <= 1.5 * scaled[0] for s in scaled)
    lower = gammas[-1] * est[-1] >= 0.4
    drops = all(r.kept + r.dropped == 10_000 and not r.flagged for r in rows)
    ok = decreasing and bounded and lower and drops and t.elapsed <= 600
    detail = ("D=" + ",".join(f"{e:.4f}" for e in est) + " scaled=" + ",".join(f"{s:.3f}" for s in scaled)
              + f" Gamma*D(40)={gammas[-1] * est[-1]:.3f} dropped={sum(r.dropped for r in rows)}"
              + f" time={t.elapsed:.1f}s")
    assert record_criterion(7, "discrepancy density decreasing with bounded scaled column", ok, detail), detail


def test_free_energy(record_criterion):
    J, n = 4.0, 10**6
    with Timer() as t:
        zero = abs(log_partition(np.zeros(n), ModelParams(J), 1, 1) / n - zero_field_free_energy(J, n))
        row = free_energy(ExperimentConfig(GAUSS, (J,), replicas=32, n=n, seed=SEED))[0]
    excess = row.extra["two_j_excess"]
    ok = zero <= 1e-8 and abs(excess - 1.0) <= 0.15 and t.elapsed <= 300
    detail = f"zero-field error={zero:.1e} 2J(f-J)={excess:.4f} (stderr {2 * J * row.stderr:.4f}) time={t.elapsed:.1f}s"
    assert record_criterion(8, "free energy closed form and weak-disorder correction", ok, detail), detail


def test_ergodic_variance(record_criterion):
    sizes = (1_000, 10_000, 100_000)
    with Timer() as t:
        rows = dn_trajectory(ExperimentConfig(GAUSS, (6.0,), seed=SEED, samples=200), sizes)
    vn = [r.var_times_n for r in rows]
    ratio = max(vn) / min(vn)
    ok = ratio <= 3.0 and t.elapsed <= 300
    detail = ("Var*N=" + ",".join(f"{v:.3f}" for v in vn) + f" ratio={ratio:.2f} mean D_N="
              + ",".join(f"{r.mean:.4f}" for r in rows) + f" time={t.elapsed:.1f}s")
    assert record_criterion(9, "Var(D_N) scales like 1/N", ok, detail), detail


EXPERIMENT_RUNS = [
    ("discrepancy", "--gamma", "5,10", "--replicas", "60"),
    ("discrepancy", "--kind", "sign", "--gamma", "5", "--replicas", "60"),
    ("dn", "--gamma", "6", "--n", "1000,4000", "--samples", "20"),
    ("invhist", "--gamma", "5", "--n", "200000"),
    ("scaling", "--gamma", "8,16", "--replicas", "500"),
    ("free-energy", "--J", "1,4", "--n", "20000", "--replicas", "6"),
    ("proximity", "--gamma", "6", "--replicas", "60"),
]


def test_determinism(record_criterion, tmp_path):
    same = []
    with Timer() as t:
        for k, argv in enumerate(EXPERIMENT_RUNS):
            outs = []
            for threads in ("1", "3"):
                path = tmp_path / f"{k}_{threads}.csv"
                assert main([*argv, "--seed", "77", "--threads", threads, "--out", str(path)]) == 0
                outs.append(path.read_bytes())
            same.append(outs[0] == outs[1])
    ok = all(same)
    detail = f"{sum(same)}/{len(same)} experiments bitwise identical across --threads 1 and 3, time={t.elapsed:.1f}s"
    assert record_criterion(10, "reruns identical regardless of thread count", ok, detail), detail
