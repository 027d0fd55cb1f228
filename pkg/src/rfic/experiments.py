"""Monte Carlo estimators over quenched fields, with deterministic replica
execution and CSV/JSON output."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numba import njit
from scipy import stats

from .disorder import DisorderLaw, FieldSource, FieldWindow, ModelParams, anchored_walk, replica_seed
from .extrema import ExtremaError, fisher_at, fisher_plus, gamma_extrema_two_sided, neveu_pitman_stats
from .replicas import replica_map
from .transfer import _bgamma, gibbs_sample, log_partition, mismatch_probability, sandwich_l, sandwich_r

log = logging.getLogger(__name__)

DISCREPANCY_HEADER = ("gamma", "estimate", "stderr", "kept", "dropped", "gamma_scaled")
SCALING_HEADER = ("gamma", "mean_gap_excess", "ks_exp1", "mean_scaled_spacing", "corr_even")
FREE_ENERGY_HEADER = ("J", "f_hat", "stderr", "two_j_excess")
HISTOGRAM_HEADER = ("bin_left", "bin_right", "count")
DN_HEADER = ("n", "mean", "variance", "var_times_n", "samples")
PROXIMITY_HEADER = ("gamma", "kept", "dropped", "threshold", "exceedance", "median_gap", "max_gap")

MAX_DROP_RATE = 0.10


@dataclass(frozen=True)
class ExperimentConfig:
    law: DisorderLaw
    sweep: tuple[float, ...]
    replicas: int = 1000
    n: int = 10_000
    seed: int = 0
    threads: int = 1
    start_factor: float = 4.0
    cap_factor: float = 2.0**10
    bin_width: float | None = None
    samples: int = 200

    def __post_init__(self):
        if self.replicas < 1:
            raise ValueError("replicas must be at least 1")
        if self.n < 1:
            raise ValueError("window length must be positive")
        if not self.sweep or any(not (v > 0 and math.isfinite(v)) for v in self.sweep):
            raise ValueError(f"sweep values must be positive and finite, got {self.sweep}")


@dataclass
class EstimateRow:
    value: float
    estimate: float
    stderr: float
    kept: int
    dropped: int
    extra: dict = field(default_factory=dict)

    @property
    def flagged(self) -> bool:
        total = self.kept + self.dropped
        return total > 0 and self.dropped / total > MAX_DROP_RATE


def mean_and_stderr(values: Sequence[float]) -> tuple[float, float]:
    """Order-fixed mean and standard error of replica-level values."""
    x = list(values)
    n = len(x)
    if n == 0:
        return float("nan"), float("nan")
    mean = math.fsum(x) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in x) / (n - 1)
    return mean, math.sqrt(var / n)


def loglog(gamma: float) -> float:
    return math.log(math.log(gamma))


# ---------------------------------------------------------------- discrepancy

def _bracket(source: FieldSource, params: ModelParams, side: str, start: int, cap: int):
    w = start
    while True:
        if side == "l":
            sw = sandwich_l(source.field(-w, -1), params)
        else:
            sw = sandwich_r(source.field(1, w), params)
        if sw.converged:
            return sw
        if w >= cap:
            return None
        w *= 2


def discrepancy_replica(source: FieldSource, gamma: float, start_factor: float = 4.0,
                        cap_factor: float = 2.0**10):
    """One field's contribution at site 0.

    Returns ``(mismatch probability against the Fisher sign, 1{s_m != s_F})``,
    or ``None`` when the bracket or the extrema did not settle within the cap.
    """
    params = ModelParams.from_gamma(gamma)
    unit = gamma**2 / source.law.variance
    start = max(2, math.ceil(start_factor * unit))
    cap = max(start, math.ceil(cap_factor * unit))
    left = _bracket(source, params, "l", start, cap)
    right = _bracket(source, params, "r", start, cap) if left is not None else None
    if right is None:
        return None
    try:
        two = gamma_extrema_two_sided(source, gamma, (0, 0), start_factor, cap_factor)
    except ExtremaError:
        return None
    s_f = fisher_at(two.sequence, 0)
    m = left.mid + 2.0 * source.field(0, 0).at(0) + right.mid
    s_m = 1 if m >= 0 else -1
    return float(mismatch_probability(s_f, m)), float(s_m != s_f)


def _discrepancy_sweep(cfg: ExperimentConfig, which: int) -> list[EstimateRow]:
    rows = []
    for gamma in cfg.sweep:
        def one(i, gamma=gamma):
            return discrepancy_replica(FieldSource(cfg.law, replica_seed(cfg.seed, i)), gamma,
                                       cfg.start_factor, cfg.cap_factor)

        results = replica_map(one, cfg.replicas, cfg.threads)
        vals = [r[which] for r in results if r is not None]
        est, se = mean_and_stderr(vals)
        row = EstimateRow(gamma, est, se, len(vals), cfg.replicas - len(vals),
                          {"gamma_scaled": gamma * est / loglog(gamma)})
        if row.flagged:
            log.warning("gamma=%g: %d of %d replicas dropped", gamma, row.dropped, cfg.replicas)
        rows.append(row)
    return rows


def estimate_D_Gamma(cfg: ExperimentConfig) -> list[EstimateRow]:
    """Average over fields of ``P(sigma_0 != s_F_0)`` under the infinite-volume
    Gibbs measure, computed from bracketed ``l_{-1}``, ``r_1`` and the two-sided
    Fisher sign at 0."""
    return _discrepancy_sweep(cfg, 0)


def sm_vs_sf_density(cfg: ExperimentConfig) -> list[EstimateRow]:
    """Fraction of fields where the sign of ``m_0`` disagrees with the Fisher sign."""
    return _discrepancy_sweep(cfg, 1)


def discrepancy_rows(rows: Iterable[EstimateRow]):
    for r in rows:
        yield (r.value, r.estimate, r.stderr, r.kept, r.dropped, r.extra["gamma_scaled"])


# ---------------------------------------------------------------- D_N

@dataclass
class DNRow:
    n: int
    mean: float
    variance: float
    samples: int

    @property
    def var_times_n(self) -> float:
        return self.variance * self.n


def discrepancy_path(field_window: FieldWindow, reference: np.ndarray, gamma: float, samples: int,
                     seed: int, batch: int = 20) -> np.ndarray:
    """``D_N`` of ``samples`` exact Gibbs configurations (boundary spins +, +)
    against ``reference``; sites where the reference is 0 always count."""
    params = ModelParams.from_gamma(gamma)
    out = []
    for k, lo in enumerate(range(0, samples, batch)):
        cnt = min(batch, samples - lo)
        spins = gibbs_sample(field_window, params, 1, 1, replica_seed(seed, k), cnt)
        out.append(np.mean(spins != reference[None, :], axis=1))
    return np.concatenate(out)


def dn_trajectory(cfg: ExperimentConfig, sizes: Sequence[int] = (1_000, 10_000, 100_000)) -> list[DNRow]:
    """For one fixed field, the mean and variance of ``D_N`` over Gibbs samples,
    against the one-sided Fisher configuration, for each ``N``."""
    gamma = cfg.sweep[0]
    source = FieldSource(cfg.law, replica_seed(cfg.seed, 0))
    rows = []
    for n in sizes:
        fw = source.field(1, n)
        ref = fisher_plus(anchored_walk(fw), gamma).values
        d = discrepancy_path(fw, ref, gamma, cfg.samples, replica_seed(cfg.seed, 1, n))
        rows.append(DNRow(n, math.fsum(d) / d.size, float(np.var(d, ddof=1)), int(d.size)))
    return rows


def dn_rows(rows: Iterable[DNRow]):
    for r in rows:
        yield (r.n, r.mean, r.variance, r.var_times_n, r.samples)


# ---------------------------------------------------------------- invariant histogram

@njit(cache=True, nogil=True)
def _pair_until_close(h, gamma, tol):
    lo = -gamma
    hi = gamma
    for i in range(h.size):
        lo = _bgamma(lo + 2.0 * h[i], gamma)
        hi = _bgamma(hi + 2.0 * h[i], gamma)
        if hi - lo <= tol:
            return i, lo, hi
    return -1, lo, hi


@njit(cache=True, nogil=True)
def _bin_chain(h, gamma, y0, edges_lo, width, counts):
    y = y0
    nb = counts.size
    for i in range(h.size):
        y = _bgamma(y + 2.0 * h[i], gamma)
        k = int((y - edges_lo) / width)
        if k < 0:
            k = 0
        elif k >= nb:
            k = nb - 1
        counts[k] += 1
    return y


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    gamma: float
    burn_in: int

    def rows(self):
        for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts):
            yield (float(lo), float(hi), int(c))

    def interval_ratio(self, min_length: float) -> tuple[float, float]:
        """Max and min over bin-aligned intervals ``I`` with ``|I| >= min_length``
        of ``P(l in I) * gamma / |I|``."""
        width = self.edges[1] - self.edges[0]
        k = max(1, math.ceil(min_length / width - 1e-9))
        p = np.concatenate(([0.0], np.cumsum(self.counts) / self.counts.sum()))
        best, worst = 0.0, float("inf")
        nb = self.counts.size
        for span in range(k, nb + 1):
            mass = p[span:] - p[:-span]
            ratio = mass * self.gamma / (span * width)
            best = max(best, float(ratio.max()))
            worst = min(worst, float(ratio.min()))
        return best, worst

    def lag_autocorrelation(self, lag_bins: int) -> float:
        c = self.counts.astype(float)
        c = c - c.mean()
        denom = float(np.dot(c, c))
        return float(np.dot(c[:-lag_bins], c[lag_bins:]) / denom) if denom > 0 else 0.0


def invariant_histogram(law: DisorderLaw, gamma: float, steps: int, seed: int,
                        bin_width: float | None = None, chunk: int = 1 << 20) -> Histogram:
    """Histogram of a long stationary run of the l-chain.

    Burn-in ends once the chains from the two walls are within ``1e-8 gamma``,
    which certifies that the run is started from the invariant law.
    """
    width = gamma / 500.0 if bin_width is None else bin_width
    nb = max(1, int(round(2.0 * gamma / width)))
    width = 2.0 * gamma / nb
    counts = np.zeros(nb, dtype=np.int64)
    source = FieldSource(law, seed)
    pos = 0
    burn = -1
    y = 0.0
    while burn < 0:
        h = source.field(pos + 1, pos + chunk).values
        idx, lo, hi = _pair_until_close(h, float(gamma), 1e-8 * gamma)
        if idx >= 0:
            burn = pos + idx + 1
            y = 0.5 * (lo + hi)
        pos += chunk
    pos = burn
    done = 0
    while done < steps:
        take = min(chunk, steps - done)
        h = source.field(pos + 1, pos + take).values
        y = _bin_chain(h, float(gamma), y, -float(gamma), width, counts)
        pos += take
        done += take
    edges = -gamma + width * np.arange(nb + 1)
    return Histogram(edges, counts, float(gamma), burn)


# ---------------------------------------------------------------- scaling

@dataclass
class ScalingRow:
    gamma: float
    mean_gap_excess: float
    var_gap_excess: float
    ks_exp1: float
    mean_scaled_spacing: float
    corr_even: float
    count: int

    @property
    def corr_band(self) -> float:
        pairs = max(1, (self.count - 1) // 2 - 1)
        return 3.0 / math.sqrt(pairs)


def even_gap_correlation(heights: np.ndarray) -> float:
    """Pearson correlation of ``|gap_{2k}|`` with ``|gap_{2k+2}|``."""
    even = heights[1::2]
    if even.size < 3:
        return float("nan")
    return float(np.corrcoef(even[:-1], even[1:])[0, 1])


def scaling_sweep(cfg: ExperimentConfig, count: int | None = None) -> list[ScalingRow]:
    count = cfg.replicas if count is None else count
    rows = []
    for gamma in cfg.sweep:
        s = neveu_pitman_stats(cfg.law, gamma, count, replica_seed(cfg.seed, 0))
        ex = s.excess
        ks = stats.kstest(ex, "expon").statistic
        rows.append(ScalingRow(float(gamma), math.fsum(ex) / ex.size, float(np.var(ex, ddof=1)), float(ks),
                               math.fsum(s.scaled_spacing) / ex.size, even_gap_correlation(s.height), count))
    return rows


def scaling_rows(rows: Iterable[ScalingRow]):
    for r in rows:
        yield (r.gamma, r.mean_gap_excess, r.ks_exp1, r.mean_scaled_spacing, r.corr_even)


# ---------------------------------------------------------------- free energy

def zero_field_free_energy(J: float, n: int) -> float:
    """``(1/N) log Z^{++}`` for ``h = 0``: ``((2 cosh J)^{N+1} + (2 sinh J)^{N+1}) / 2``."""
    lead = (n + 1) * math.log(2.0 * math.cosh(J))
    return (lead + math.log1p(math.tanh(J) ** (n + 1)) - math.log(2.0)) / n


def free_energy(cfg: ExperimentConfig) -> list[EstimateRow]:
    """``(1/N) log Z^{++}_{1,N}`` averaged over fields, per coupling in the sweep."""
    rows = []
    for J in cfg.sweep:
        params = ModelParams(J)

        def one(i, params=params):
            fw = FieldSource(cfg.law, replica_seed(cfg.seed, i)).field(1, cfg.n)
            return log_partition(fw, params, 1, 1) / cfg.n

        vals = replica_map(one, cfg.replicas, cfg.threads)
        est, se = mean_and_stderr(vals)
        rows.append(EstimateRow(J, est, se, len(vals), 0, {"two_j_excess": 2.0 * J * (est - J)}))
    return rows


def free_energy_rows(rows: Iterable[EstimateRow]):
    for r in rows:
        yield (r.value, r.estimate, r.stderr, r.extra["two_j_excess"])


# ---------------------------------------------------------------- output

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def render(header: Sequence[str], rows: Iterable[Sequence], fmt: str = "csv") -> str:
    """CSV text (floats written with ``repr``, so reruns compare bitwise) or a
    JSON list of objects."""
    rows = [tuple(r) for r in rows]
    if fmt == "json":
        out = [dict(zip(header, (float(v) if isinstance(v, np.floating) else
                                  int(v) if isinstance(v, np.integer) else v for v in r))) for r in rows]
        return json.dumps(out, indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()
