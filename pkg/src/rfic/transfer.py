"""Transfer matrices, boundary-field chains and exact Gibbs sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, vectorize
from scipy.special import expit

from .disorder import FieldWindow, ModelParams


@dataclass(frozen=True)
class TransferPair:
    """Log-domain entries of ``T(h) = diag(e^h, e^-h)`` and the coupling matrix ``Q``."""

    logT: np.ndarray
    logQ: np.ndarray

    @classmethod
    def build(cls, h: float, J: float) -> "TransferPair":
        return cls(np.array([h, -h]), np.array([[J, -J], [-J, J]]))


@dataclass(frozen=True)
class ChainState:
    value: float
    site: int


@dataclass(frozen=True)
class ChainPath:
    """Chain values at consecutive sites starting at ``origin``."""

    origin: int
    values: np.ndarray

    def at(self, n: int) -> float:
        return float(self.values[n - self.origin])

    @property
    def stop(self) -> int:
        return self.origin + self.values.size - 1


@dataclass(frozen=True)
class SandwichValue:
    lower: float
    upper: float
    site: int
    burn_in: int
    tolerance: float

    @property
    def gap(self) -> float:
        return self.upper - self.lower

    @property
    def converged(self) -> bool:
        return self.gap <= self.tolerance

    @property
    def mid(self) -> float:
        return 0.5 * (self.lower + self.upper)


@njit(cache=True, inline="always")
def _softplus(z):
    if z > 0.0:
        return z + math.log1p(math.exp(-z))
    return math.log1p(math.exp(z))


@njit(cache=True, inline="always")
def _bgamma(x, gamma):
    # odd symmetry is enforced by evaluating at |x|, so negating inputs negates outputs exactly
    ax = abs(x)
    v = gamma + _softplus(-gamma - ax) - _softplus(gamma - ax)
    return v if x >= 0.0 else -v


@vectorize(["float64(float64, float64, float64)"], cache=True)
def _step_ufunc(y, h, gamma):
    return _bgamma(y + 2.0 * h, gamma)


@njit(cache=True, nogil=True)
def _run_chain(h, gamma, y0):
    out = np.empty(h.size)
    y = y0
    for i in range(h.size):
        y = _bgamma(y + 2.0 * h[i], gamma)
        out[i] = y
    return out


@njit(cache=True, nogil=True)
def _run_pair(h, gamma):
    lo = -gamma
    hi = gamma
    for i in range(h.size):
        lo = _bgamma(lo + 2.0 * h[i], gamma)
        hi = _bgamma(hi + 2.0 * h[i], gamma)
    return lo, hi


@njit(cache=True, nogil=True)
def _log_partition(h, J, a, b):
    # x_plus / x_minus: log of the partial sums ending with the last spin fixed
    if h.size == 0:
        return J * a * b
    xp = J * a + h[0]
    xm = -J * a - h[0]
    for i in range(1, h.size):
        up = max(xp + J, xm - J)
        dn = max(xp - J, xm + J)
        np_ = up + math.log(math.exp(xp + J - up) + math.exp(xm - J - up)) + h[i]
        nm = dn + math.log(math.exp(xp - J - dn) + math.exp(xm + J - dn)) - h[i]
        xp = np_
        xm = nm
    fp = xp + J * b
    fm = xm - J * b
    top = max(fp, fm)
    return top + math.log(math.exp(fp - top) + math.exp(fm - top))


@njit(cache=True, nogil=True)
def _sample_spins(h, gamma, a, r_next, uniforms):
    count, n = uniforms.shape
    out = np.empty((count, n), dtype=np.int8)
    for k in range(count):
        prev = a
        for i in range(n):
            m = gamma * prev + 2.0 * h[i] + r_next[i]
            p = 1.0 / (1.0 + math.exp(-m)) if m >= 0 else math.exp(m) / (1.0 + math.exp(m))
            s = 1 if uniforms[k, i] < p else -1
            out[k, i] = s
            prev = s
    return out


def step_l(y, h, params: ModelParams):
    """One step ``f_h(y) = b_Gamma(y + 2h)`` of the boundary-field chain."""
    return _step_ufunc(y, h, params.gamma)


def b_gamma(x, gamma: float):
    """The contraction ``x -> x + log((1 + e^{-Gamma-x}) / (1 + e^{-Gamma+x}))``."""
    return _step_ufunc(x, 0.0, gamma)


def log_partition(field: FieldWindow | np.ndarray, params: ModelParams, a: int, b: int) -> float:
    """``log Z^{ab}`` over the window; an empty array gives ``J a b``."""
    h = field.values if isinstance(field, FieldWindow) else np.asarray(field, dtype=float)
    return float(_log_partition(h, params.J, a, b))


def run_l(field: FieldWindow, init: float, params: ModelParams) -> ChainPath:
    """Values ``l_{start, m}`` for ``m`` over the window, started from ``init``
    at site ``start - 1``."""
    return ChainPath(field.start, _run_chain(field.values, params.gamma, float(init)))


def run_r(field: FieldWindow, init: float, params: ModelParams) -> ChainPath:
    """Values ``r_{n, stop}`` for ``n`` over the window, started from ``init``
    at site ``stop + 1``.

    Runs the l-recursion on the time-reversed sequence of field values.
    """
    rev = _run_chain(field.values[::-1].copy(), params.gamma, float(init))
    return ChainPath(field.start, rev[::-1].copy())


def gibbs_marginal(l_value, h, r_value):
    """``P(sigma_n = +1)`` from the neighbouring chain values."""
    return expit(np.add(np.add(l_value, 2.0 * np.asarray(h)), r_value))


def mismatch_probability(s, m):
    """Probability that the spin differs from ``s`` in {-1, 0, +1}."""
    s = np.asarray(s)
    return expit(-s * np.asarray(m)) + 0.5 * (s == 0)


def m_and_sm(l_value: float, h: float, r_value: float) -> tuple[float, int]:
    m = l_value + 2.0 * h + r_value
    return m, (1 if m >= 0 else -1)


def site_marginals(field: FieldWindow, params: ModelParams, a: int, b: int) -> np.ndarray:
    """``P(sigma_n = +1)`` at every site of the window with boundary spins ``a, b``."""
    gamma = params.gamma
    l_prev = np.concatenate(([a * gamma], run_l(field, a * gamma, params).values[:-1]))
    r_next = np.concatenate((run_r(field, b * gamma, params).values[1:], [b * gamma]))
    return gibbs_marginal(l_prev, field.values, r_next)


def gibbs_sample(field: FieldWindow, params: ModelParams, a: int, b: int, seed, count: int | None = None):
    """Exact samples from the finite-volume Gibbs measure.

    The r-chain is computed once right to left; spins are then drawn left to
    right from ``P(sigma_n | sigma_{n-1})``. Returns one configuration, or a
    ``(count, N)`` array when ``count`` is given.
    """
    gamma = params.gamma
    r_next = np.concatenate((run_r(field, b * gamma, params).values[1:], [b * gamma]))
    rng = np.random.default_rng(seed)
    uniforms = rng.random((1 if count is None else count, len(field)))
    spins = _sample_spins(field.values, gamma, a, r_next, uniforms)
    return spins[0] if count is None else spins


def sandwich_l(field: FieldWindow, params: ModelParams, tolerance: float | None = None) -> SandwichValue:
    """Bracket the infinite-volume ``l`` at the last site of the window.

    Two chains started at ``-Gamma`` and ``+Gamma`` before the window bound
    every chain started earlier, because ``f_h`` is increasing.
    """
    tol = 1e-8 * params.gamma if tolerance is None else tolerance
    lo, hi = _run_pair(field.values, params.gamma)
    return SandwichValue(float(lo), float(hi), field.stop, len(field), tol)


def sandwich_r(field: FieldWindow, params: ModelParams, tolerance: float | None = None) -> SandwichValue:
    """Bracket the infinite-volume ``r`` at the first site of the window."""
    tol = 1e-8 * params.gamma if tolerance is None else tolerance
    lo, hi = _run_pair(field.values[::-1].copy(), params.gamma)
    return SandwichValue(float(lo), float(hi), field.start, len(field), tol)


def contraction_bound(gamma: float, steps: int) -> float:
    """A-priori gap bound ``2 Gamma exp(-eps k)`` between the extreme chains."""
    return 2.0 * gamma * np.exp(-math.exp(-gamma) * np.asarray(steps, dtype=float))
