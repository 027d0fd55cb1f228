"""Hard-wall boundary-field chains: clamp dynamics, closed forms and the sign field."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .disorder import DisorderLaw, FieldSource, FieldWindow, ModelParams, WalkPath, replica_seed
from .extrema import ExtremaError
from .replicas import replica_map
from .transfer import sandwich_l

ITERATED = "iterated"
CLOSED_FORM = "closed-form"

HAT_HEADER = ("site", "l_hat", "r_hat", "m_hat", "sign")


class NoSwingError(ExtremaError):
    """The window holds no swing of size Gamma, so the wall chains have not met."""


@dataclass(frozen=True)
class HatState:
    value: float
    site: int
    provenance: str


def step_hat(value, h, gamma: float):
    """Clamp ``value + 2h`` to ``[-gamma, gamma]``."""
    return np.clip(np.add(value, 2.0 * np.asarray(h)), -gamma, gamma)


@njit(cache=True, nogil=True)
def _clamp_run(h, gamma, y0):
    out = np.empty(h.size)
    y = y0
    for i in range(h.size):
        y = min(gamma, max(-gamma, y + 2.0 * h[i]))
        out[i] = y
    return out


@njit(cache=True, nogil=True)
def _clamp_meet(h, gamma):
    # first index after which the chains started at -gamma and +gamma agree; -1 if never
    lo = -gamma
    hi = gamma
    for i in range(h.size):
        lo = min(gamma, max(-gamma, lo + 2.0 * h[i]))
        hi = min(gamma, max(-gamma, hi + 2.0 * h[i]))
        if lo == hi:
            return i
    return -1


def run_hat_l(field: FieldWindow, init: float, gamma: float) -> np.ndarray:
    """``l_hat`` at every site of the window, started from ``init`` before it."""
    return _clamp_run(field.values, float(gamma), float(init))


def run_hat_r(field: FieldWindow, init: float, gamma: float) -> np.ndarray:
    """``r_hat`` at every site of the window, started from ``init`` after it."""
    return _clamp_run(field.values[::-1].copy(), float(gamma), float(init))[::-1].copy()


def hat_l_from_coalescence(field: FieldWindow, gamma: float, n: int | None = None) -> HatState:
    """Stationary ``l_hat_n`` from two wall-started chains run across the window.

    Both chains clamp onto the same wall at the first swing of size Gamma and
    agree bitwise from then on.
    """
    n = field.stop if n is None else n
    h = field.values[: n - field.start + 1]
    meet = _clamp_meet(h, float(gamma))
    if meet < 0:
        raise NoSwingError(f"no swing of size {gamma} in sites [{field.start}, {n}]; extend the window left")
    lo = run_hat_l(FieldWindow(field.start, h), -gamma, gamma)[-1]
    hi = run_hat_l(FieldWindow(field.start, h), gamma, gamma)[-1]
    if lo != hi:
        raise AssertionError(f"wall chains met at site {field.start + meet} but differ at {n}: {lo} vs {hi}")
    return HatState(float(lo), n, ITERATED)


def hat_r_from_coalescence(field: FieldWindow, gamma: float, n: int | None = None) -> HatState:
    """Stationary ``r_hat_n`` from wall-started chains run right to left."""
    n = field.start if n is None else n
    h = field.values[n - field.start :][::-1].copy()
    meet = _clamp_meet(h, float(gamma))
    if meet < 0:
        raise NoSwingError(f"no swing of size {gamma} in sites [{n}, {field.stop}]; extend the window right")
    lo = _clamp_run(h, float(gamma), -float(gamma))[-1]
    hi = _clamp_run(h, float(gamma), float(gamma))[-1]
    if lo != hi:
        raise AssertionError(f"wall chains met but differ at {n}: {lo} vs {hi}")
    return HatState(float(lo), n, ITERATED)


def _first_swing(steps: np.ndarray, gamma: float):
    """Scan the walk ``0, cumsum(steps)`` for its first drop or rise of size gamma.

    Returns ``(went_down, extreme)`` where ``extreme`` is the running max before
    the drop (or the running min before the rise).
    """
    s = np.concatenate(([0.0], np.cumsum(steps)))
    top = np.maximum.accumulate(s)
    bot = np.minimum.accumulate(s)
    down = np.flatnonzero(top - s >= gamma)
    up = np.flatnonzero(s - bot >= gamma)
    if down.size == 0 and up.size == 0:
        return None
    td = down[0] if down.size else np.iinfo(np.int64).max
    tu = up[0] if up.size else np.iinfo(np.int64).max
    if td == tu:
        raise AssertionError("a drop and a rise of size gamma cannot complete at the same step")
    if td < tu:
        return True, float(top[td])
    return False, float(bot[tu])


def hat_l_explicit(walk: WalkPath, gamma: float, n: int = 0) -> HatState:
    """Closed-form ``l_hat_n`` from the walk looked at backwards from ``n``.

    With ``R_k = S_{n-k} - S_n``: if ``R`` first drops by gamma below its
    running max, the value is ``gamma - 2 max R``; if it first rises by gamma,
    it is ``-gamma - 2 min R``.
    """
    k = n - walk.start
    if k < 1 or n > walk.stop:
        raise NoSwingError(f"site {n} has no walk to its left")
    steps = -walk.increments[:k][::-1]
    hit = _first_swing(steps, gamma)
    if hit is None:
        raise NoSwingError(f"no swing of size {gamma} left of site {n}; extend the window left")
    went_down, ext = hit
    value = gamma - 2.0 * ext if went_down else -gamma - 2.0 * ext
    return HatState(value, n, CLOSED_FORM)


def hat_r_explicit(walk: WalkPath, gamma: float, n: int = 1) -> HatState:
    """Closed-form ``r_hat_n`` from the walk looked at forwards from ``n - 1``.

    With ``E_k = S_{n-1+k} - S_{n-1}``: ``-gamma + 2 max E`` if ``E`` first
    drops by gamma, ``gamma + 2 min E`` if it first rises by gamma.
    """
    k = n - 1 - walk.start
    if k < 0 or n > walk.stop:
        raise NoSwingError(f"site {n} is outside the walk")
    steps = walk.increments[k:]
    hit = _first_swing(steps, gamma)
    if hit is None:
        raise NoSwingError(f"no swing of size {gamma} right of site {n}; extend the window right")
    went_down, ext = hit
    value = -gamma + 2.0 * ext if went_down else gamma + 2.0 * ext
    return HatState(value, n, CLOSED_FORM)


def hat_m_and_sign(l_prev: float, h: float, r_next: float) -> tuple[float, int]:
    """``m_hat = l_hat_{n-1} + 2 h_n + r_hat_{n+1}`` and its sign, with sign(0) = 0."""
    m = l_prev + 2.0 * h + r_next
    return m, (m > 0) - (m < 0)


@dataclass(frozen=True)
class HatWindow:
    """Stationary wall chains on a target window ``lo..hi``.

    ``l_hat[i]`` is ``l_hat`` at site ``lo - 1 + i`` and ``r_hat[i]`` is
    ``r_hat`` at site ``lo + i``, so both cover the neighbours of every site.
    """

    lo: int
    h: np.ndarray
    l_hat: np.ndarray
    r_hat: np.ndarray
    gamma: float
    margins: tuple[int, int]

    @property
    def hi(self) -> int:
        return self.lo + self.h.size - 1

    @property
    def m_hat(self) -> np.ndarray:
        return self.l_hat[:-1] + 2.0 * self.h + self.r_hat[1:]

    @property
    def sign(self) -> np.ndarray:
        return np.sign(self.m_hat).astype(np.int8)

    def csv_rows(self):
        m = self.m_hat
        for i in range(self.h.size):
            yield (self.lo + i, float(self.l_hat[i + 1]), float(self.r_hat[i]), float(m[i]),
                   int(np.sign(m[i])))


def hat_window(source: FieldSource, gamma: float, lo: int, hi: int,
               start_factor: float = 4.0, cap_factor: float = 2.0**10) -> HatWindow:
    """Iterate the wall chains across ``lo..hi`` from far enough out that they
    have coalesced, doubling each margin until they do."""
    unit = gamma**2 / source.law.variance
    cap = max(2, math.ceil(cap_factor * unit))
    left = right = max(2, math.ceil(start_factor * unit))
    while _clamp_meet(source.field(lo - left, lo - 1).values, float(gamma)) < 0:
        if left >= cap:
            raise NoSwingError(f"wall chains did not meet within {left} sites left of {lo}")
        left *= 2
    while _clamp_meet(source.field(hi + 1, hi + right).values[::-1].copy(), float(gamma)) < 0:
        if right >= cap:
            raise NoSwingError(f"wall chains did not meet within {right} sites right of {hi}")
        right *= 2
    full = source.field(lo - left, hi + right)
    l_all = _clamp_run(full.values, float(gamma), float(gamma))
    r_all = _clamp_run(full.values[::-1].copy(), float(gamma), float(gamma))[::-1]
    a = left
    b = left + hi - lo + 1
    return HatWindow(lo, full.values[a:b].copy(), l_all[a - 1 : b].copy(), r_all[a : b + 1].copy(),
                     float(gamma), (left, right))


@dataclass(frozen=True)
class ProximityReport:
    gaps: np.ndarray
    dropped: int
    threshold: float
    gamma: float

    @property
    def kept(self) -> int:
        return int(self.gaps.size)

    @property
    def exceedance(self) -> float:
        return float(np.mean(self.gaps > self.threshold)) if self.gaps.size else float("nan")


def proximity_one(source: FieldSource, gamma: float, window: int):
    """``(l_0, l_hat_0, sandwich gap)`` for one field, or ``None`` if the
    smooth-wall bracket did not close within ``window`` sites."""
    params = ModelParams.from_gamma(gamma)
    field = source.field(-window + 1, 0)
    sw = sandwich_l(field, params)
    if not sw.converged:
        return None
    walk = source.walk(-window, 0)
    try:
        lh = hat_l_explicit(walk, gamma, 0).value
    except NoSwingError:
        return None
    return sw.mid, lh, sw.gap


def proximity_sample(law: DisorderLaw, gamma: float, replicas: int, seed: int,
                     constant: float = 10.0, window: int | None = None, threads: int = 1) -> ProximityReport:
    """``|l_0 - l_hat_0|`` over independent fields, with the fraction above
    ``log log gamma + constant``."""
    w = window or max(64, math.ceil(64 * gamma**2 / law.variance))

    def one(i):
        return proximity_one(FieldSource(law, replica_seed(seed, i)), gamma, w)

    results = replica_map(one, replicas, threads)
    gaps = np.array([abs(r[0] - r[1]) for r in results if r is not None])
    dropped = sum(r is None for r in results)
    return ProximityReport(gaps, dropped, math.log(math.log(gamma)) + constant, float(gamma))
