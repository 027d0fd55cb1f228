"""Brute-force ground truth on short windows: partition sums, marginals,
maximizers of the Hamiltonian and the zero-temperature limit."""

from __future__ import annotations

import builtins
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .disorder import FieldWindow, ModelParams
from .reflected import run_hat_l, run_hat_r
from .transfer import log_partition, site_marginals

MAX_SITES = 20
BAND = 1e-9


class OracleError(ValueError):
    """The window is too long to enumerate."""


class StructureMismatch(AssertionError):
    """Enumeration disagrees with a structural prediction."""


@dataclass(frozen=True)
class EnumerationResult:
    log_z: float
    marginals: np.ndarray
    maximizers: np.ndarray
    max_h: float
    a: int
    b: int

    def maximizer_set(self) -> set[tuple[int, ...]]:
        return {tuple(int(s) for s in row) for row in self.maximizers}


def _configs(n: int) -> np.ndarray:
    idx = np.arange(1 << n, dtype=np.int64)[:, None]
    return (((idx >> np.arange(n)) & 1) * 2 - 1).astype(np.int8)


def _bond_sum(sig: np.ndarray, a: int, b: int) -> np.ndarray:
    inner = (sig[:, 1:].astype(np.int64) * sig[:, :-1]).sum(axis=1)
    return inner + a * sig[:, 0].astype(np.int64) + b * sig[:, -1].astype(np.int64)


def enumerate_window(h: FieldWindow | Sequence, J, a: int, b: int,
                     exact: Sequence[Fraction] | None = None) -> EnumerationResult:
    """Sum over all ``2^N`` configurations with boundary spins ``a`` and ``b``.

    With ``exact`` rational field values (and a rational ``J``) the maximizers
    are decided on integer-scaled Hamiltonians; otherwise configurations
    within ``1e-9`` of the maximum count as maximizers.
    """
    values = np.asarray(h.values if isinstance(h, FieldWindow) else h, dtype=float)
    n = values.size
    if n > MAX_SITES:
        raise OracleError(f"enumeration is limited to {MAX_SITES} sites, got {n}")
    if n < 1:
        raise OracleError("enumeration needs at least one site")
    sig = _configs(n)
    bonds = _bond_sum(sig, a, b)
    ham = float(J) * bonds + sig @ values
    log_z = float(logsumexp(ham))
    w = np.exp(ham - log_z)
    marg = (w[:, None] * (sig > 0)).sum(axis=0)
    if exact is not None:
        fr = [Fraction(x) for x in exact] + [Fraction(J)]
        scale = math.lcm(*(x.denominator for x in fr))
        hi = np.array([int(x * scale) for x in fr[:-1]], dtype=np.int64)
        ham_int = int(fr[-1] * scale) * bonds + sig.astype(np.int64) @ hi
        top = ham_int.max()
        keep = ham_int == top
        max_h = float(Fraction(int(top), scale))
    else:
        top = ham.max()
        keep = ham >= top - BAND
        max_h = float(top)
    return EnumerationResult(log_z, marg, sig[keep].copy(), max_h, a, b)


# ``enumerate`` is the public name; the builtin stays reachable as ``builtins.enumerate``.
enumerate = enumerate_window  # noqa: A001


def max_hamiltonian(h: Sequence, J, a: int, b: int, exact: Sequence[Fraction] | None = None) -> float:
    return enumerate_window(h, J, a, b, exact).max_h


@dataclass(frozen=True)
class BoundaryExtremum:
    kind: int
    positions: tuple[int, ...]
    level: object


def boundary_extrema(field_values: Sequence, gamma, a: int, b: int, origin: int = 1) -> list[BoundaryExtremum]:
    """Gamma-extrema of the walk over the window with boundary spins ``(a, b)``.

    The walk on times ``origin - 1 .. origin + N - 1`` is flanked by a virtual
    point at ``-a * inf`` on the left and ``+b * inf`` on the right, and the
    alternating extrema of that augmented path are read off by a single scan
    (the virtual left point is itself an exact extremum, so the scan is exact).
    Each record carries every time at which its level is attained.
    Works with floats or Fractions.
    """
    inf = float("inf")
    s = [field_values[0] * 0]
    for v in field_values:
        s.append(s[-1] + v)
    times = [origin - 2] + list(range(origin - 1, origin + len(field_values))) + [origin + len(field_values)]
    vals = [-a * inf] + s + [b * inf]
    kind = -1 if a == 1 else 1
    best, pos = vals[0], [times[0]]
    out: list[BoundaryExtremum] = []
    for t, v in zip(times[1:], vals[1:]):
        if (v - best) * kind > 0:
            best, pos = v, [t]
        elif v == best:
            pos.append(t)
        elif (best - v) * kind >= gamma:
            out.append(BoundaryExtremum(kind, tuple(pos), best))
            kind = -kind
            best, pos = v, [t]
    virtual = {times[0], times[-1]}
    return [e for e in out if not (set(e.positions) & virtual)]


def _is_exactly_gamma(x, gamma, exact: bool) -> bool:
    return x == gamma if exact else abs(x - gamma) <= BAND


def maximizer_family(field_values: Sequence, gamma, a: int, b: int, origin: int = 1,
                     exact: bool = False) -> set[tuple[int, ...]]:
    """Configurations built from the boundary-condition extrema: one wall per
    class of equal-level extrema, plus every choice of non-adjacent stretches
    of height exactly ``gamma`` flipped away."""
    ext = boundary_extrema(field_values, gamma, a, b, origin)
    n = len(field_values)
    removable = [i for i in range(len(ext) - 1)
                 if _is_exactly_gamma(abs(ext[i + 1].level - ext[i].level), gamma, exact)]
    drops = []
    for k in range(len(removable) + 1):
        for combo in itertools.combinations(removable, k):
            if all(y - x >= 2 for x, y in zip(combo, combo[1:])):
                drops.append({j for i in combo for j in (i, i + 1)})
    family = set()
    for picks in itertools.product(*(e.positions for e in ext)):
        for gone in drops:
            walls = [w for i, w in builtins.enumerate(picks) if i not in gone]
            spins = []
            for site in range(origin, origin + n):
                flips = sum(1 for w in walls if w < site)
                spins.append(a * (-1) ** flips)
            family.add(tuple(spins))
    return family


@dataclass
class StructureReport:
    a: int
    b: int
    gamma: float
    enumerated: set
    predicted: set
    extrema: list

    @property
    def match(self) -> bool:
        return self.enumerated == self.predicted

    def witness(self):
        extra = self.enumerated - self.predicted
        missing = self.predicted - self.enumerated
        return (sorted(extra)[:1], sorted(missing)[:1])


def check_maximizer_structure(h: Sequence, gamma, a: int, b: int, exact: Sequence[Fraction] | None = None,
                              strict: bool = True) -> StructureReport:
    """Compare the enumerated maximizer set with the extrema-built family."""
    vals = list(exact) if exact is not None else [float(x) for x in h]
    J = Fraction(gamma) / 2 if exact is not None else float(gamma) / 2.0
    if exact is not None:
        gamma = Fraction(gamma)
    res = enumerate_window(np.array([float(x) for x in vals]), J, a, b, exact)
    fam = maximizer_family(vals, gamma, a, b, exact=exact is not None)
    rep = StructureReport(a, b, float(gamma), res.maximizer_set(), fam, boundary_extrema(vals, gamma, a, b))
    if strict and not rep.match:
        raise StructureMismatch(f"maximizer set differs from the extrema family for (a,b)=({a},{b}); "
                                f"witness (enumerated-only, predicted-only): {rep.witness()}")
    return rep


def _hat_chain_exact(vals, gamma, init, reverse=False):
    seq = list(reversed(vals)) if reverse else list(vals)
    y = init
    out = []
    for v in seq:
        y = min(gamma, max(-gamma, y + 2 * v))
        out.append(y)
    return out[::-1] if reverse else out


def finite_hat_values(h: Sequence, gamma, a: int, b: int, exact: bool = False):
    """Finite-volume wall chains: ``l_hat^{(a)}_{1, n}`` and ``r_hat^{(b)}_{n, N}``
    for ``n = 0..N+1`` (boundary values included)."""
    if exact:
        ls = [a * gamma] + _hat_chain_exact(h, gamma, a * gamma)
        rs = _hat_chain_exact(h, gamma, b * gamma, reverse=True) + [b * gamma]
        return ls, rs
    fw = FieldWindow(1, np.asarray(h, dtype=float))
    g = float(gamma)
    ls = np.concatenate(([a * g], run_hat_l(fw, a * g, g)))
    rs = np.concatenate((run_hat_r(fw, b * g, g), [b * g]))
    return list(ls), list(rs)


def hat_sign_pattern(h: Sequence, gamma, a: int, b: int, exact: bool = False) -> list[int]:
    """``sign(l_hat_{n-1} + 2 h_n + r_hat_{n+1})`` at every site, sign(0) = 0."""
    ls, rs = finite_hat_values(h, gamma, a, b, exact)
    out = []
    for i, v in builtins.enumerate(h):
        m = ls[i] + 2 * v + rs[i + 1]
        if not exact and abs(m) <= BAND:
            m = 0
        out.append(int(m > 0) - int(m < 0))
    return out


def maximizer_sign_site(h: Sequence, gamma, a: int, b: int, site: int,
                        exact: Sequence[Fraction] | None = None) -> int:
    """Tri-state sign at ``site`` (1-based) from the wall chains, checked against
    the spins carried by all enumerated maximizers."""
    vals = list(exact) if exact is not None else [float(x) for x in h]
    g = Fraction(gamma) if exact is not None else float(gamma)
    sign = hat_sign_pattern(vals, g, a, b, exact is not None)[site - 1]
    res = enumerate_window(np.array([float(x) for x in vals]), g / 2, a, b, exact)
    col = res.maximizers[:, site - 1]
    expected = 1 if np.all(col > 0) else (-1 if np.all(col < 0) else 0)
    if sign != expected:
        raise StructureMismatch(f"site {site}: wall-chain sign {sign} but maximizers give {expected}")
    return sign


@dataclass
class BetaLimitReport:
    betas: list[float]
    gaps: list[float]
    target: float
    hat_value: float
    identity_holds: bool

    @property
    def monotone(self) -> bool:
        return all(y <= x + 1e-12 for x, y in zip(self.gaps, self.gaps[1:]))

    @property
    def final_gap(self) -> float:
        return self.gaps[-1]


def beta_limit_check(h: Sequence, J: float, a: int, site: int,
                     betas: Sequence[float] = tuple(2.0**k for k in range(9))) -> BetaLimitReport:
    """``(1/beta) log(Z^{a+}/Z^{a-})`` on sites ``1..site`` at inverse temperature
    ``beta`` against the difference of maximal Hamiltonians, which is also the
    finite-volume wall chain ``l_hat^{(a)}_{1, site}``."""
    vals = np.asarray(h, dtype=float)[:site]
    target = max_hamiltonian(vals, J, a, 1) - max_hamiltonian(vals, J, a, -1)
    hat = float(run_hat_l(FieldWindow(1, vals), a * 2.0 * J, 2.0 * J)[-1])
    gaps = []
    for beta in betas:
        p = ModelParams(beta * J)
        ratio = (log_partition(beta * vals, p, a, 1) - log_partition(beta * vals, p, a, -1)) / beta
        gaps.append(abs(ratio - target))
    return BetaLimitReport(list(betas), gaps, target, hat, abs(hat - target) <= 1e-9)


def explicit_identity_gap(h: Sequence, J: float, a: int) -> float:
    """Largest ``|l_hat^{(a)}_{1,n} - (max H^{a+} - max H^{a-})|`` over ``n``."""
    vals = np.asarray(h, dtype=float)
    hat = run_hat_l(FieldWindow(1, vals), a * 2.0 * J, 2.0 * J)
    worst = 0.0
    for n in range(1, vals.size + 1):
        diff = max_hamiltonian(vals[:n], J, a, 1) - max_hamiltonian(vals[:n], J, a, -1)
        worst = max(worst, abs(hat[n - 1] - diff))
    return worst


@dataclass
class OracleSummary:
    trials: int
    max_rel_err: float
    max_marginal_err: float
    details: list = field(default_factory=list)


def oracle_check(n: int, trials: int, seed: int) -> OracleSummary:
    """Random fields, couplings and boundary spins: transfer-matrix log
    partition functions and marginals against enumeration."""
    rng = np.random.default_rng(seed)
    worst_rel = worst_marg = 0.0
    for _ in range(trials):
        size = int(rng.integers(1, n + 1))
        vals = rng.normal(0.0, 1.0, size) * rng.uniform(0.2, 2.0)
        J = float(rng.uniform(0.1, 3.0))
        a, b = (int(x) for x in rng.choice([-1, 1], 2))
        ref = enumerate_window(vals, J, a, b)
        got = log_partition(vals, ModelParams(J), a, b)
        worst_rel = max(worst_rel, abs(got - ref.log_z) / max(1.0, abs(ref.log_z)))
        marg = site_marginals(FieldWindow(1, vals), ModelParams(J), a, b)
        worst_marg = max(worst_marg, float(np.max(np.abs(marg - ref.marginals))))
    return OracleSummary(trials, worst_rel, worst_marg)


@dataclass
class GroundStateSummary:
    cases: int
    structure_failures: int
    sign_failures: int
    first_failure: str | None = None

    @property
    def ok(self) -> bool:
        return self.structure_failures == 0 and self.sign_failures == 0


def _enumerated_signs(maximizers: set) -> list[int]:
    cols = np.array(sorted(maximizers)).T
    return [1 if np.all(c > 0) else (-1 if np.all(c < 0) else 0) for c in cols]


def _check_case(vals, gamma, exact, summary: GroundStateSummary, label: str):
    for a, b in itertools.product((1, -1), repeat=2):
        summary.cases += 1
        rep = check_maximizer_structure(None if exact else vals, gamma, a, b,
                                        exact=vals if exact else None, strict=False)
        if not rep.match:
            summary.structure_failures += 1
            summary.first_failure = summary.first_failure or f"{label} (a,b)=({a},{b}): {rep.witness()}"
        if hat_sign_pattern(vals, gamma, a, b, exact) != _enumerated_signs(rep.enumerated):
            summary.sign_failures += 1
            summary.first_failure = summary.first_failure or f"{label} (a,b)=({a},{b}): site signs differ"


# Short rational fields with slopes of height exactly Gamma, where the
# maximizer is not unique.
CRAFTED_EXACT_CASES = (
    (Fraction(2), (1, 1, -1, -1, 1, 1)),
    (Fraction(3), (Fraction(3, 2), Fraction(3, 2), -3, 1, 2, Fraction(-1, 2), Fraction(-5, 2))),
    (Fraction(1), (Fraction(1, 2), Fraction(1, 2), Fraction(-1, 4), Fraction(-3, 4), 1, -1, 1)),
    (Fraction(5, 2), (Fraction(5, 2), 0, Fraction(-5, 2), 0, Fraction(5, 2), Fraction(-1, 2))),
    (Fraction(2), (1, -3, 2, 1, -1, -1, 2, 1, -3)),
)


def groundstate_check(n: int, trials: int, seed: int, crafted: bool = True) -> GroundStateSummary:
    """Enumerated maximizer sets and tri-state site signs against the extrema
    construction, for random Gaussian windows with all four boundary pairs and
    (optionally) the crafted exact cases in rational arithmetic."""
    rng = np.random.default_rng(seed)
    summary = GroundStateSummary(0, 0, 0)
    for t in range(trials):
        size = int(rng.integers(1, n + 1))
        vals = [float(x) for x in rng.normal(0.0, 1.0, size)]
        gamma = float(rng.uniform(0.5, 5.0))
        _check_case(vals, gamma, False, summary, f"trial {t}")
    if crafted:
        for k, (gamma, vals) in builtins.enumerate(CRAFTED_EXACT_CASES):
            _check_case([Fraction(v) for v in vals], gamma, True, summary, f"crafted {k}")
    return summary
