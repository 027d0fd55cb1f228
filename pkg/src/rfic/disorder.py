"""Disorder laws, reproducible per-site field sampling and the two-sided walk."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

BLOCK = 4096
_MASK64 = (1 << 64) - 1

KINDS = ("twopoint", "gauss", "uniform", "fig2mix", "table")


class LawError(ValueError):
    """Raised for malformed or non-centered disorder laws."""


@dataclass(frozen=True)
class DisorderLaw:
    """A centered, finite-variance law for the field values.

    ``params`` holds the scale (``a`` or ``sigma``) for the parametric kinds.
    A ``table`` law stores its ``(atom, weight)`` pairs in ``atoms``; weights
    are normalized to sum to one.
    """

    kind: str
    params: tuple[float, ...] = ()
    atoms: tuple[tuple[float, float], ...] = ()
    exact_atoms: tuple[Fraction, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise LawError(f"unknown law kind {self.kind!r}; expected one of {KINDS}")
        if self.kind in ("twopoint", "gauss", "uniform"):
            if len(self.params) != 1 or not math.isfinite(self.params[0]) or self.params[0] <= 0:
                raise LawError(f"{self.kind} needs one positive finite parameter, got {self.params}")
        if self.kind == "table":
            if not self.atoms:
                raise LawError("table law needs at least one (atom, weight) pair")
            for x, w in self.atoms:
                if not (math.isfinite(x) and math.isfinite(w)) or w <= 0:
                    raise LawError(f"table entries need finite atoms and positive weights, got ({x}, {w})")
            mean = self.mean
            if abs(mean) > 1e-12:
                raise LawError(f"table law is not centered: computed mean {mean!r}")
        if not self.variance > 0:
            raise LawError(f"law {self.describe()} has zero variance")

    @classmethod
    def parse(cls, text: str) -> "DisorderLaw":
        """Parse ``twopoint:a``, ``gauss:sigma``, ``uniform:a``, ``fig2mix`` or
        ``table:x1:w1,x2:w2,...``."""
        kind, _, rest = text.strip().partition(":")
        try:
            if kind == "fig2mix":
                if rest:
                    raise LawError("fig2mix takes no parameters")
                return cls("fig2mix")
            if kind == "table":
                pairs = []
                exact = []
                for item in rest.split(","):
                    x, w = item.split(":")
                    exact.append(Fraction(x))
                    pairs.append((float(Fraction(x)), float(Fraction(w))))
                return cls("table", atoms=tuple(pairs), exact_atoms=tuple(exact))
            return cls(kind, params=(float(rest),))
        except (ValueError, ZeroDivisionError) as exc:
            if isinstance(exc, LawError):
                raise
            raise LawError(f"cannot parse law {text!r}: {exc}") from None

    def describe(self) -> str:
        if self.kind == "fig2mix":
            return "fig2mix"
        if self.kind == "table":
            return "table:" + ",".join(f"{x!r}:{w!r}" for x, w in self.atoms)
        return f"{self.kind}:{self.params[0]!r}"

    @property
    def _weights(self) -> np.ndarray:
        w = np.array([w for _, w in self.atoms])
        return w / w.sum()

    @property
    def mean(self) -> float:
        if self.kind == "table":
            w = self._weights
            return math.fsum(x * p for (x, _), p in zip(self.atoms, w))
        return 0.0

    @property
    def variance(self) -> float:
        if self.kind == "twopoint":
            return self.params[0] ** 2
        if self.kind == "gauss":
            return self.params[0] ** 2
        if self.kind == "uniform":
            return self.params[0] ** 2 / 3.0
        if self.kind == "fig2mix":
            # half mass at -2, half N(2, 1/sqrt 2)
            return 0.5 * 4.0 + 0.5 * (4.0 + _MIX_SD**2)
        w = self._weights
        return math.fsum(x * x * p for (x, _), p in zip(self.atoms, w)) - self.mean**2

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance)

    @property
    def is_atomic(self) -> bool:
        return self.kind in ("twopoint", "table", "fig2mix")

    def draw_block(self, gen: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` values; the draw pattern is fixed per kind."""
        if self.kind == "twopoint":
            return np.where(gen.integers(0, 2, size) == 1, self.params[0], -self.params[0]).astype(float)
        if self.kind == "gauss":
            return self.params[0] * gen.standard_normal(size)
        if self.kind == "uniform":
            a = self.params[0]
            return gen.uniform(-a, a, size)
        if self.kind == "fig2mix":
            coin = gen.random(size) < 0.5
            bulk = 2.0 + _MIX_SD * gen.standard_normal(size)
            return np.where(coin, -2.0, bulk)
        cum = np.cumsum(self._weights)
        cum[-1] = 1.0
        idx = np.searchsorted(cum, gen.random(size), side="right")
        return np.array([x for x, _ in self.atoms])[idx]


_MIX_SD = 2.0 ** -0.25


@dataclass(frozen=True)
class FieldWindow:
    """Field values ``h_n`` for consecutive sites starting at ``origin``."""

    origin: int
    values: np.ndarray
    provenance: tuple = ()

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 1:
            raise ValueError("a field window needs at least one site")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_values(cls, values, origin: int = 1) -> "FieldWindow":
        return cls(origin, np.asarray(values, dtype=float), ("explicit",))

    def __len__(self) -> int:
        return self.values.size

    @property
    def start(self) -> int:
        return self.origin

    @property
    def stop(self) -> int:
        """Last site index (inclusive)."""
        return self.origin + self.values.size - 1

    def at(self, n: int) -> float:
        return float(self.values[n - self.origin])

    def sub(self, lo: int, hi: int) -> "FieldWindow":
        if lo < self.start or hi > self.stop or hi < lo:
            raise IndexError(f"[{lo}, {hi}] not inside [{self.start}, {self.stop}]")
        return FieldWindow(lo, self.values[lo - self.origin : hi - self.origin + 1], self.provenance)

    def negated(self) -> "FieldWindow":
        return FieldWindow(self.origin, -self.values, self.provenance + ("negated",))


@dataclass(frozen=True)
class WalkPath:
    """Partial sums ``S_n`` at consecutive times starting at ``origin``.

    ``increments[i]`` is the field value driving the step into
    ``values[i + 1]``; it is kept so the increments are recoverable exactly.
    """

    origin: int
    values: np.ndarray
    increments: np.ndarray

    def __post_init__(self):
        for name in ("values", "increments"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.increments.size != self.values.size - 1:
            raise ValueError("a walk of k+1 points needs k increments")

    def __len__(self) -> int:
        return self.values.size

    @property
    def start(self) -> int:
        return self.origin

    @property
    def stop(self) -> int:
        return self.origin + self.values.size - 1

    def at(self, n: int) -> float:
        return float(self.values[n - self.origin])

    def __getitem__(self, n: int) -> float:
        return self.at(n)

    def increment(self, n: int) -> float:
        """The stored step ``h_n`` between times ``n - 1`` and ``n``."""
        return float(self.increments[n - self.origin - 1])

    def field(self) -> FieldWindow:
        return FieldWindow(self.origin + 1, self.increments, ("walk",))


@dataclass(frozen=True)
class ModelParams:
    J: float

    def __post_init__(self):
        if not (self.J > 0 and math.isfinite(self.J)):
            raise ValueError(f"coupling must be positive and finite, got {self.J}")

    @classmethod
    def from_gamma(cls, gamma: float) -> "ModelParams":
        return cls(gamma / 2.0)

    @property
    def gamma(self) -> float:
        return 2.0 * self.J

    @property
    def eps(self) -> float:
        return math.exp(-self.gamma)


@lru_cache(maxsize=512)
def _block_values(law: DisorderLaw, seed: int, block: int) -> np.ndarray:
    bitgen = np.random.Philox(key=seed & _MASK64, counter=np.array([0, 0, block & _MASK64, 0], dtype=np.uint64))
    vals = law.draw_block(np.random.Generator(bitgen), BLOCK)
    vals.setflags(write=False)
    return vals


def sample_field(law: DisorderLaw, lo: int, hi: int, seed: int) -> FieldWindow:
    """Field on sites ``lo..hi`` (inclusive); each value depends only on
    ``(law, seed, site)``."""
    if hi < lo:
        raise ValueError(f"empty site range [{lo}, {hi}]")
    first, last = lo // BLOCK, hi // BLOCK
    chunks = [_block_values(law, seed, b) for b in range(first, last + 1)]
    vals = np.concatenate(chunks)[lo - first * BLOCK : hi - first * BLOCK + 1]
    return FieldWindow(lo, vals, ("sampled", law.describe(), seed))


@dataclass(frozen=True)
class FieldSource:
    """An unbounded field: any window can be materialized on demand."""

    law: DisorderLaw
    seed: int

    def field(self, lo: int, hi: int) -> FieldWindow:
        return sample_field(self.law, lo, hi, self.seed)

    def walk(self, lo: int, hi: int) -> WalkPath:
        """Walk on times ``lo..hi``, anchored at ``S_0 = 0`` when 0 is in range."""
        return walk_from_field(self.field(lo + 1, hi))


def walk_from_field(field: FieldWindow) -> WalkPath:
    """Walk on times ``start - 1 .. stop``.

    When time 0 lies in that range the walk is anchored there with
    ``S_0 = 0``; otherwise it starts from 0 at its left end.
    """
    h = field.values
    left = field.start - 1
    s = np.empty(h.size + 1)
    s[0] = 0.0
    np.cumsum(h, out=s[1:])
    if left <= 0 <= field.stop:
        # sum the positive and negative branches separately so both start at 0
        k = -left
        s[k] = 0.0
        np.cumsum(h[k:], out=s[k + 1 :])
        s[:k] = -np.cumsum(h[:k][::-1])[::-1]
    return WalkPath(left, s, h)


def anchored_walk(field: FieldWindow) -> WalkPath:
    """Walk on times ``start - 1 .. stop`` with ``S_{start-1} = 0``."""
    s = np.empty(len(field) + 1)
    s[0] = 0.0
    np.cumsum(field.values, out=s[1:])
    return WalkPath(field.start - 1, s, field.values)


def reverse_walk(walk: WalkPath) -> WalkPath:
    """``S^rv_n = S_{-n}`` on the mirrored time range."""
    return WalkPath(-walk.stop, walk.values[::-1].copy(), -walk.increments[::-1])


def replica_seed(master: int, *keys: int) -> int:
    """Deterministic 64-bit seed for a replica, mixed from the master seed."""
    entropy = [master & _MASK64] + [k & _MASK64 for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])
