"""Decimation of the alternating bond chain and its comparison with Gamma-extrema."""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field

import numpy as np

from .disorder import FieldSource, FieldWindow, anchored_walk
from .extrema import gamma_extrema_one_sided

log = logging.getLogger(__name__)

CHAIN_HEADER = ("j", "tau", "eta", "delta")


@dataclass(frozen=True)
class Bond:
    eta: int
    delta: float


@dataclass(frozen=True)
class BondChain:
    """Bonds between consecutive breakpoints, starting from ``tau_0 = 0``."""

    eta: np.ndarray
    delta: np.ndarray
    gamma: float = 0.0

    def __post_init__(self):
        if self.eta.size != self.delta.size:
            raise ValueError("eta and delta must have equal length")
        if np.any(self.eta < 1):
            raise ValueError("bond lengths must be positive")
        if np.any(np.sign(self.delta[1:]) == np.sign(self.delta[:-1])):
            raise ValueError("bond heights must alternate in sign")

    def __len__(self) -> int:
        return int(self.eta.size)

    @property
    def bonds(self) -> list[Bond]:
        return [Bond(int(e), float(d)) for e, d in zip(self.eta, self.delta)]

    @property
    def tau(self) -> np.ndarray:
        """Breakpoints ``tau_1 .. tau_N``."""
        return np.cumsum(self.eta)

    @property
    def interior_min(self) -> float:
        return float(np.min(np.abs(self.delta[1:-1]))) if len(self) >= 3 else float("inf")

    def csv_rows(self):
        for j, (t, e, d) in enumerate(zip(self.tau, self.eta, self.delta), start=1):
            yield (j, int(t), int(e), float(d))


def _sign(x: np.ndarray) -> np.ndarray:
    return np.where(x >= 0, 1, -1)


def coarse_grain(field: FieldWindow) -> BondChain:
    """Maximal same-sign runs of the field (zero counts as positive); the last
    run is cut at the window edge."""
    if field.start != 1:
        raise ValueError(f"coarse-graining expects a window starting at site 1, got {field.start}")
    h = field.values
    sg = _sign(h)
    cuts = np.flatnonzero(sg[1:] != sg[:-1]) + 1
    starts = np.concatenate(([0], cuts))
    ends = np.concatenate((cuts, [h.size]))
    walk = anchored_walk(field).values
    return BondChain((ends - starts).astype(np.int64), walk[ends] - walk[starts])


def rg_step(chain: BondChain) -> BondChain:
    """Merge the interior bond of smallest ``|delta|`` (leftmost on ties) with
    both neighbours."""
    if len(chain) < 3:
        raise ValueError(f"decimation needs at least 3 bonds, chain has {len(chain)}")
    j = 1 + int(np.argmin(np.abs(chain.delta[1:-1])))
    eta = np.concatenate((chain.eta[: j - 1], [chain.eta[j - 1 : j + 2].sum()], chain.eta[j + 2 :]))
    delta = np.concatenate((chain.delta[: j - 1], [chain.delta[j - 1 : j + 2].sum()], chain.delta[j + 2 :]))
    return BondChain(eta, delta, chain.gamma)


def rg_run(chain_or_field: BondChain | FieldWindow, gamma: float) -> tuple[BondChain, int]:
    """Decimate while at least 3 bonds remain and some interior ``|delta| < gamma``.

    Uses a heap keyed by ``(|delta|, leftmost original index)`` over interior
    bonds with lazy invalidation; merged bonds inherit the index of their left
    part, which keeps the heap order equal to the chain order on ties.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    chain = coarse_grain(chain_or_field) if isinstance(chain_or_field, FieldWindow) else chain_or_field
    n = len(chain)
    eta = chain.eta.astype(np.int64).tolist()
    delta = chain.delta.astype(float).tolist()
    prev = list(range(-1, n - 1))
    nxt = list(range(1, n + 1))
    nxt[-1] = -1
    version = [0] * n
    heap = [(abs(delta[i]), i, 0) for i in range(1, n - 1)]
    heapq.heapify(heap)
    size = n
    while size >= 3 and heap:
        d, j, ver = heap[0]
        if ver != version[j] or prev[j] < 0 or nxt[j] < 0:
            heapq.heappop(heap)
            continue
        if d >= gamma:
            break
        heapq.heappop(heap)
        a, b = prev[j], nxt[j]
        eta[a] += eta[j] + eta[b]
        delta[a] += delta[j] + delta[b]
        for dead in (j, b):
            version[dead] = -1
        after = nxt[b]
        nxt[a] = after
        if after >= 0:
            prev[after] = a
        version[a] += 1
        if prev[a] >= 0 and after >= 0:
            heapq.heappush(heap, (abs(delta[a]), a, version[a]))
        size -= 2
    order = []
    i = 0
    while i >= 0:
        order.append(i)
        i = nxt[i]
    out = BondChain(np.array([eta[i] for i in order], dtype=np.int64),
                    np.array([delta[i] for i in order]), float(gamma))
    return out, len(out)


@dataclass
class RGReport:
    gamma: float
    n: int
    n_gamma: int
    j_n: int
    extrema: list[int]
    breakpoints: list[int]
    spurious: list[int]
    containment: bool
    bracket: bool
    atomic: bool
    flanked: list[int] = field(default_factory=list)
    containment_flanked: bool = True
    notes: list[str] = field(default_factory=list)

    @property
    def bracket_flanked(self) -> bool:
        return len(self.flanked) <= self.n_gamma <= self.j_n + 3

    def as_dict(self) -> dict:
        return {
            "gamma": self.gamma, "n": self.n, "n_gamma": self.n_gamma, "j_n": self.j_n,
            "containment": self.containment, "bracket": self.bracket,
            "spurious_count": len(self.spurious), "spurious": self.spurious,
            "containment_flanked": self.containment_flanked, "bracket_flanked": self.bracket_flanked,
            "extrema": self.extrema, "breakpoints": self.breakpoints,
            "atomic_law": self.atomic, "notes": self.notes,
        }


def _extrema_up_to(field: FieldWindow, gamma: float, lookahead: FieldWindow | None):
    """Locations ``1 <= u <= N`` of the one-sided extrema, using the lookahead
    sites (if any) to confirm records near the right edge; also the subset whose
    swings on both sides lie inside the window (not the first record, and
    confirmed by time ``N``)."""
    n = len(field)
    vals = field.values if lookahead is None else np.concatenate((field.values, lookahead.values))
    seq = gamma_extrema_one_sided(anchored_walk(FieldWindow(1, vals)), gamma)
    every = [int(u) for u in seq.u if 1 <= u <= n]
    flanked = [int(u) for i, (u, tc) in enumerate(zip(seq.u, seq.t_confirm)) if i >= 1 and tc <= n]
    return every, flanked


def rg_vs_extrema(field: FieldWindow, gamma: float, lookahead: FieldWindow | None = None,
                  atomic: bool = False) -> RGReport:
    """Compare the decimated chain's breakpoints with the Gamma-extrema locations.

    ``lookahead`` supplies field values beyond the window so that extrema near
    its right end are decided as for the unbounded walk. Extrema at time 0 are
    not breakpoints by construction and are left out.

    ``containment`` tests every extremum up to ``N``. The first record has no
    swing on its left, and records confirmed past ``N`` have none on their
    right inside the window; decimation can expel either, so
    ``containment_flanked`` repeats the test without them, and
    ``bracket_flanked`` counts only those records in the lower bound.
    """
    final, n_gamma = rg_run(field, gamma)
    tau = [int(t) for t in final.tau]
    ext, flanked = _extrema_up_to(field, gamma, lookahead)
    points = set(tau)
    contained = all(u in points for u in ext)
    spurious = [t for t in tau if t not in set(ext)]
    notes = []
    if atomic:
        notes.append("atomic law: outside the atomless hypothesis, containment not guaranteed")
        log.warning("rg comparison run on an atomic law; containment is not guaranteed")
    return RGReport(float(gamma), len(field), n_gamma, len(ext), ext, tau, spurious, contained,
                    len(ext) <= n_gamma <= len(ext) + 3, atomic, flanked,
                    all(u in points for u in flanked), notes)


def rg_vs_extrema_sampled(source: FieldSource, gamma: float, n: int) -> RGReport:
    """Comparison on sites ``1..n`` of a sampled field, with enough
    lookahead that every extremum up to ``n`` is confirmed."""
    field = source.field(1, n)
    extra = max(64, n // 4)
    while True:
        ahead = source.field(n + 1, n + extra)
        vals = np.concatenate((field.values, ahead.values))
        seq = gamma_extrema_one_sided(anchored_walk(FieldWindow(1, vals)), gamma)
        if len(seq) and seq.u[-1] > n:
            break
        extra *= 2
    return rg_vs_extrema(field, gamma, ahead, source.law.is_atomic)


# A 50-site field whose Gamma = 2.5 extrema sit at 12, 14, 23 and 38, with
# small wiggles between them so the decimation has work to do.
_SAMPLE_LEVELS = (
    0.0, -0.5, -0.3, -1.2, -0.4, 0.3, 0.1, 0.9, 1.4, 1.1, 1.9, 2.2, 2.6, 0.9, -0.235,
    0.6, 0.35, 1.5, 2.3, 2.05, 3.1, 3.8, 3.52, 4.963, 4.2, 4.5, 3.7, 3.1, 3.4, 2.9,
    2.4, 2.75, 2.2, 1.9, 2.1, 1.6, 1.45, 1.8, 1.195, 1.6, 1.4, 2.3, 2.9, 2.7, 3.5,
    4.1, 4.4, 3.9, 4.05, 3.3, 3.0,
)


def sample_rg_field() -> FieldWindow:
    """The crafted 50-site instance used to illustrate decimation at Gamma = 2.5."""
    return FieldWindow(1, np.diff(np.array(_SAMPLE_LEVELS)), ("crafted",))
