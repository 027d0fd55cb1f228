"""Gamma-extrema of a walk, Fisher configurations, ladder epochs and renewal statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .disorder import DisorderLaw, FieldSource, WalkPath

MAX, MIN = 1, -1
DECREASE_FIRST = "decrease-first"
INCREASE_FIRST = "increase-first"


class ExtremaError(RuntimeError):
    """A window was too short to decide the requested extrema."""


@dataclass(frozen=True)
class ExtremumRecord:
    kind: int
    u: int
    u_plus: int
    level: float
    t_before: int
    t_confirm: int

    @property
    def kind_name(self) -> str:
        return "max" if self.kind == MAX else "min"


@dataclass(frozen=True)
class ExtremaSequence:
    """Alternating extrema as parallel arrays, in walk time.

    ``t_before`` is the time the search for the record started (0 or the
    previous confirmation) and ``t_confirm`` the time its swing of size
    Gamma completed. ``first_label`` is the label of the first record.
    """

    kind: np.ndarray
    u: np.ndarray
    u_plus: np.ndarray
    level: np.ndarray
    t_before: np.ndarray
    t_confirm: np.ndarray
    gamma: float
    convention: str = DECREASE_FIRST
    first_label: int = 1
    window: tuple[int, int] = (0, 0)

    def __len__(self) -> int:
        return int(self.u.size)

    @property
    def no_swing(self) -> bool:
        return self.u.size == 0

    @property
    def labels(self) -> np.ndarray:
        return np.arange(self.first_label, self.first_label + len(self))

    def record(self, i: int) -> ExtremumRecord:
        return ExtremumRecord(int(self.kind[i]), int(self.u[i]), int(self.u_plus[i]),
                              float(self.level[i]), int(self.t_before[i]), int(self.t_confirm[i]))

    @property
    def records(self) -> list[ExtremumRecord]:
        return [self.record(i) for i in range(len(self))]

    def take(self, lo: int, hi: int, first_label: int | None = None) -> "ExtremaSequence":
        label = self.first_label + lo if first_label is None else first_label
        return ExtremaSequence(self.kind[lo:hi], self.u[lo:hi], self.u_plus[lo:hi], self.level[lo:hi],
                               self.t_before[lo:hi], self.t_confirm[lo:hi], self.gamma,
                               self.convention, label, self.window)

    def csv_rows(self):
        for lab, r in zip(self.labels, self.records):
            yield (int(lab), r.kind_name, r.u, r.u_plus, r.level, r.t_before)


EXTREMA_HEADER = ("index", "kind", "u", "u_plus", "level", "t")
FISHER_HEADER = ("n", "s_F")


@njit(cache=True, nogil=True)
def _scan(s, gamma, first_kind):
    n = s.size
    kinds = np.empty(n, dtype=np.int8)
    us = np.empty(n, dtype=np.int64)
    ups = np.empty(n, dtype=np.int64)
    levels = np.empty(n)
    tb = np.empty(n, dtype=np.int64)
    tc = np.empty(n, dtype=np.int64)
    count = 0
    kind = first_kind
    p = 0
    best = s[0]
    i1 = 0
    i2 = 0
    for t in range(1, n):
        v = s[t]
        if kind == 1:
            if v > best:
                best = v
                i1 = t
                i2 = t
            elif v == best:
                i2 = t
            elif best - v >= gamma:
                kinds[count] = 1
                us[count] = i1
                ups[count] = i2
                levels[count] = best
                tb[count] = p
                tc[count] = t
                count += 1
                kind = -1
                p = t
                best = v
                i1 = t
                i2 = t
        else:
            if v < best:
                best = v
                i1 = t
                i2 = t
            elif v == best:
                i2 = t
            elif v - best >= gamma:
                kinds[count] = -1
                us[count] = i1
                ups[count] = i2
                levels[count] = best
                tb[count] = p
                tc[count] = t
                count += 1
                kind = 1
                p = t
                best = v
                i1 = t
                i2 = t
    return kinds[:count], us[:count], ups[:count], levels[:count], tb[:count], tc[:count]


def _from_scan(values: np.ndarray, offset: int, gamma: float, first_kind: int, convention: str,
               window: tuple[int, int]) -> ExtremaSequence:
    k, u, up, lev, tb, tc = _scan(np.ascontiguousarray(values, dtype=float), float(gamma), first_kind)
    return ExtremaSequence(k.astype(int), u + offset, up + offset, lev, tb + offset, tc + offset,
                           float(gamma), convention, 1, window)


def gamma_extrema_one_sided(walk: WalkPath, gamma: float, convention: str = DECREASE_FIRST) -> ExtremaSequence:
    """Extrema found by scanning forward from the first time of the walk.

    Only records whose confirming swing lies inside the window are emitted;
    an empty result means the window holds no swing of size ``gamma``.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    first = MAX if convention == DECREASE_FIRST else MIN
    return _from_scan(walk.values, walk.start, gamma, first, convention, (walk.start, walk.stop))


def reference_extrema(walk: WalkPath, gamma: float, convention: str = DECREASE_FIRST) -> ExtremaSequence:
    """Quadratic-time scanner written directly from the interval definitions."""
    s = list(walk.values)
    n = len(s)
    kind = MAX if convention == DECREASE_FIRST else MIN
    p = 0
    rows = []
    while True:
        t_hit = None
        for t in range(p + 1, n):
            # largest swing against `kind` inside [p, t]
            swing = max((s[i] - s[j]) * kind for i in range(p, t + 1) for j in range(i, t + 1))
            if swing >= gamma:
                t_hit = t
                break
        if t_hit is None:
            break
        seg = [kind * v for v in s[p : t_hit + 1]]
        top = max(seg)
        hits = [i for i, v in enumerate(seg) if v == top]
        rows.append((kind, p + hits[0], p + hits[-1], s[p + hits[0]], p, t_hit))
        p = t_hit
        kind = -kind
    cols = list(zip(*rows)) if rows else [[]] * 6
    off = walk.start
    return ExtremaSequence(np.array(cols[0], dtype=int), np.array(cols[1], dtype=int) + off,
                           np.array(cols[2], dtype=int) + off, np.array(cols[3], dtype=float),
                           np.array(cols[4], dtype=int) + off, np.array(cols[5], dtype=int) + off,
                           float(gamma), convention, 1, (walk.start, walk.stop))


def _fisher_fill(seq: ExtremaSequence, lo: int, hi: int) -> np.ndarray:
    out = np.zeros(hi - lo + 1, dtype=np.int8)
    for k in range(len(seq) - 1):
        a = seq.u_plus[k] + 1
        b = seq.u[k + 1]
        if b < lo or a > hi:
            continue
        if abs(seq.level[k + 1] - seq.level[k]) > seq.gamma:
            out[max(a, lo) - lo : min(b, hi) - lo + 1] = -seq.kind[k]
    return out


@dataclass(frozen=True)
class SpinConfig:
    origin: int
    values: np.ndarray

    def at(self, n: int) -> int:
        return int(self.values[n - self.origin])

    @property
    def stop(self) -> int:
        return self.origin + self.values.size - 1

    def csv_rows(self):
        for i, v in enumerate(self.values):
            yield (self.origin + i, int(v))


def fisher_plus(walk: WalkPath, gamma: float, extrema: ExtremaSequence | None = None) -> SpinConfig:
    """One-sided Fisher configuration on sites ``start+1 .. stop`` of the walk.

    +1 on ascending slopes of height strictly above ``gamma``, -1 on descending
    ones, 0 on plateaus, on slopes of height exactly ``gamma`` and wherever the
    window does not confirm the classification.
    """
    seq = gamma_extrema_one_sided(walk, gamma) if extrema is None else extrema
    return SpinConfig(walk.start + 1, _fisher_fill(seq, walk.start + 1, walk.stop))


@dataclass(frozen=True)
class TwoSidedExtrema:
    sequence: ExtremaSequence
    rounds: int
    left_margin: int
    right_margin: int


def gamma_extrema_two_sided(source: FieldSource, gamma: float, target: tuple[int, int] = (0, 0),
                            start_factor: float = 4.0, cap_factor: float = 2.0**10) -> TwoSidedExtrema:
    """Bilateral extrema covering the sites of ``target``.

    The walk is scanned from ``-N`` to the right; ``N`` doubles until two
    successive rounds agree on every record needed by the target sites and
    those records are not the first of the scan (which may be an artifact of
    the starting point). Labels put 0 at the largest negative location.
    """
    lo_t, hi_t = min(target[0], 0), max(target[1], 0)
    unit = gamma**2 / source.law.variance
    left = right = max(2, math.ceil(start_factor * unit))
    cap = max(left, math.ceil(cap_factor * unit))
    history: list[tuple[int, tuple]] = []
    rounds = 0
    while True:
        rounds += 1
        walk = source.walk(lo_t - left, hi_t + right)
        seq = gamma_extrema_one_sided(walk, gamma)
        i1 = int(np.searchsorted(seq.u, hi_t, side="left"))
        if i1 >= len(seq):
            if right >= cap:
                raise ExtremaError(f"no confirmed extremum right of site {hi_t} within {right} sites")
            right *= 2
            continue
        i0 = int(np.searchsorted(seq.u, lo_t, side="left")) - 1
        key = tuple(zip(seq.kind[max(i0, 0) : i1 + 1].tolist(), seq.u[max(i0, 0) : i1 + 1].tolist(),
                        seq.u_plus[max(i0, 0) : i1 + 1].tolist()))
        if i0 >= 1 and history and history[-1][1] == key:
            break
        history.append((left, key))
        if left >= cap:
            last = history[-2:] if len(history) > 1 else history
            raise ExtremaError(
                f"two-sided extrema not stable within {left} sites; last rounds: "
                + "; ".join(f"N={n}: {k[:3]}..." for n, k in last))
        left *= 2
    exact = seq.take(1, len(seq))
    n_neg = int(np.searchsorted(exact.u, 0, side="left"))
    labelled = exact.take(0, len(exact), first_label=1 - n_neg)
    return TwoSidedExtrema(labelled, rounds, left, right)


def fisher_z(two_sided: TwoSidedExtrema | ExtremaSequence, target: tuple[int, int]) -> SpinConfig:
    """Two-sided Fisher configuration on the sites of ``target``."""
    seq = two_sided.sequence if isinstance(two_sided, TwoSidedExtrema) else two_sided
    lo, hi = target
    if len(seq) == 0 or seq.u[0] >= lo or seq.u[-1] < hi:
        raise ExtremaError(f"extrema do not cover the target window {target}")
    return SpinConfig(lo, _fisher_fill(seq, lo, hi))


def fisher_at(seq: ExtremaSequence, n: int) -> int:
    """Fisher value at a single site covered by the sequence."""
    k = int(np.searchsorted(seq.u, n, side="left")) - 1
    if k < 0 or k + 1 >= len(seq):
        raise ExtremaError(f"site {n} not covered by the extrema")
    if n <= seq.u_plus[k] or abs(seq.level[k + 1] - seq.level[k]) <= seq.gamma:
        return 0
    return int(-seq.kind[k])


@dataclass(frozen=True)
class LadderEpochs:
    epochs: np.ndarray
    K: int
    u_down: int


def ladder_epochs(walk: WalkPath, gamma: float) -> LadderEpochs:
    """Strict ascending ladder epochs over the window, with ``K`` the first
    epoch whose excursion drops by ``gamma`` or more."""
    s = walk.values
    epochs = [0]
    level = s[0]
    low = s[0]
    K = None
    for i in range(1, s.size):
        if s[i] > level:
            epochs.append(i)
            level = low = s[i]
            continue
        low = min(low, s[i])
        if K is None and level - low >= gamma:
            K = len(epochs) - 1
    if K is None:
        raise ExtremaError("window exhausted before an excursion dropped by gamma")
    u_down = walk.start + epochs[K]
    seq = gamma_extrema_one_sided(walk, gamma)
    if len(seq) == 0 or seq.u[0] != u_down:
        raise AssertionError(f"ladder epoch {u_down} disagrees with the first maximum")
    return LadderEpochs(np.array(epochs) + walk.start, K, u_down)


@dataclass(frozen=True)
class GapSample:
    """Consecutive extrema spacings and absolute height gaps.

    ``index[i]`` is the label of the first record of gap ``i`` (1-based),
    so even and odd subsequences are ``index % 2``.
    """

    spacing: np.ndarray
    height: np.ndarray
    index: np.ndarray
    gamma: float
    variance: float

    @property
    def excess(self) -> np.ndarray:
        return self.height / self.gamma - 1.0

    @property
    def scaled_spacing(self) -> np.ndarray:
        return self.variance * self.spacing / self.gamma**2


def neveu_pitman_stats(law: DisorderLaw, gamma: float, count: int, seed: int) -> GapSample:
    """Harvest ``count`` consecutive gaps from a one-sided walk, streamed in chunks."""
    if count < 1:
        raise ValueError("count must be at least 1")
    source = FieldSource(law, seed)
    chunk = max(1 << 14, math.ceil(16 * gamma**2 / law.variance))
    pos, base, kind = 0, 0.0, MAX
    us: list[np.ndarray] = []
    levels: list[np.ndarray] = []
    found = 0
    while found < count + 1:
        h = source.field(pos + 1, pos + chunk).values
        s = np.empty(h.size + 1)
        s[0] = base
        np.cumsum(h, out=s[1:])
        s[1:] += base
        k, u, _, lev, _, tc = _scan(s, float(gamma), kind)
        if u.size == 0:
            chunk *= 2
            continue
        us.append(u + pos)
        levels.append(lev)
        found += u.size
        last = int(tc[-1])
        pos, base, kind = pos + last, float(s[last]), -int(k[-1])
    u = np.concatenate(us)[: count + 1]
    lev = np.concatenate(levels)[: count + 1]
    return GapSample(np.diff(u), np.abs(np.diff(lev)), np.arange(1, count + 1),
                             float(gamma), law.variance)
