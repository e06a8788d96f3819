"""Recursive Cantor-type block construction on ``{1..A}``.

At depth ``j`` every interval of length ``n_j`` loses a middle gap of ``d_j``
integers and splits into two children of length ``n_{j+1}``.  Intervals are
kept as inclusive ``(start, end)`` pairs, so ``A`` may be very large.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import DomainError, InvalidParameterError
from .mixing import MixingProfile
from .tail_models import TailModel, h_inverse

# relative slack when flooring c0 * 2^-e * A, which is often an exact integer
_FLOOR_SLACK = 1e-9


def _floor_tol(x: float) -> int:
    return math.floor(x + _FLOOR_SLACK * max(1.0, abs(x)))


def _level_exponent(ell: int, j: int, gamma: float) -> float:
    return min(float(ell), j / gamma)


def gap_budget(A: int, ell: int, j: int, gamma: float, c0: float) -> float:
    """``c0 * 2^{-(ell ^ j/gamma)} * A``, the largest admissible gap at depth ``j``."""
    return c0 * 2.0 ** (-_level_exponent(ell, j, gamma)) * A


class IntervalSet:
    """Sorted disjoint union of inclusive integer intervals."""

    __slots__ = ("starts", "ends")

    def __init__(self, starts, ends):
        s = np.asarray(starts, dtype=np.int64).reshape(-1)
        e = np.asarray(ends, dtype=np.int64).reshape(-1)
        if s.shape != e.shape or np.any(e < s):
            raise InvalidParameterError("malformed interval list")
        if s.size > 1 and np.any(s[1:] <= e[:-1]):
            raise InvalidParameterError("intervals must be sorted and disjoint")
        self.starts, self.ends = s, e

    @classmethod
    def from_pairs(cls, pairs) -> "IntervalSet":
        arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])

    @classmethod
    def range(cls, a: int, b: int) -> "IntervalSet":
        return cls([a], [b]) if b >= a else cls([], [])

    @property
    def card(self) -> int:
        return int(np.sum(self.ends - self.starts + 1))

    def __len__(self) -> int:
        return self.card

    def pairs(self) -> list[tuple[int, int]]:
        return [(int(a), int(b)) for a, b in zip(self.starts, self.ends)]

    def __iter__(self) -> Iterator[int]:
        for a, b in zip(self.starts, self.ends):
            yield from range(int(a), int(b) + 1)

    def to_array(self) -> np.ndarray:
        if self.starts.size == 0:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate([np.arange(a, b + 1) for a, b in zip(self.starts, self.ends)])

    def __contains__(self, x) -> bool:
        i = np.searchsorted(self.starts, x, side="right") - 1
        return bool(i >= 0 and x <= self.ends[i])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, IntervalSet)
            and np.array_equal(self.starts, other.starts)
            and np.array_equal(self.ends, other.ends)
        )

    def __repr__(self) -> str:
        return f"IntervalSet({self.pairs()})"

    def select(self, rel: "IntervalSet") -> "IntervalSet":
        """Map relative positions ``1..card`` (as intervals) to the underlying integers."""
        lengths = self.ends - self.starts + 1
        offs = np.concatenate([[0], np.cumsum(lengths)])  # positions before each piece
        out_s, out_e = [], []
        for p, q in zip(rel.starts, rel.ends):
            if p < 1 or q > offs[-1]:
                raise InvalidParameterError("relative interval out of range")
            i = int(np.searchsorted(offs, p, side="left")) - 1
            while p <= q:
                piece_end = offs[i + 1]
                hi = min(q, piece_end)
                out_s.append(self.starts[i] + (p - offs[i] - 1))
                out_e.append(self.starts[i] + (hi - offs[i] - 1))
                p = hi + 1
                i += 1
        return _merge(out_s, out_e)

    def complement_in(self, n: int) -> "IntervalSet":
        """``{1..n}`` minus this set."""
        s, e = [], []
        cur = 1
        for a, b in zip(self.starts, self.ends):
            if a > cur:
                s.append(cur)
                e.append(a - 1)
            cur = max(cur, b + 1)
        if cur <= n:
            s.append(cur)
            e.append(n)
        return IntervalSet(s, e)

    def union(self, other: "IntervalSet") -> "IntervalSet":
        s = np.concatenate([self.starts, other.starts])
        e = np.concatenate([self.ends, other.ends])
        order = np.argsort(s, kind="stable")
        return _merge(s[order], e[order])


def _merge(starts, ends) -> IntervalSet:
    """Merge touching intervals; overlapping input is an error."""
    s_out, e_out = [], []
    for a, b in zip(starts, ends):
        if s_out and a <= e_out[-1]:
            raise InvalidParameterError("overlapping intervals")
        if s_out and a == e_out[-1] + 1:
            e_out[-1] = b
        else:
            s_out.append(int(a))
            e_out.append(int(b))
    return IntervalSet(s_out, e_out)


@dataclass(frozen=True)
class Level:
    n: int
    d: int | None  # gap at this depth; None at depth ell when no admissible value exists


@dataclass(frozen=True)
class CantorBlocks:
    A: int
    ell: int
    c0: float
    gamma: float
    levels: tuple[Level, ...]
    intervals: np.ndarray = field(repr=False)  # shape (2^ell, 2), inclusive, 1-based
    k_ell: int

    @property
    def n(self) -> list[int]:
        return [lv.n for lv in self.levels]

    @property
    def d(self) -> list[int | None]:
        return [lv.d for lv in self.levels]

    @property
    def card(self) -> int:
        return (1 << self.ell) * self.levels[-1].n

    def as_set(self) -> IntervalSet:
        return IntervalSet(self.intervals[:, 0], self.intervals[:, 1])

    def elements(self) -> Iterator[int]:
        return iter(self.as_set())

    def to_dict(self) -> dict:
        return {
            "A": self.A,
            "ell": self.ell,
            "c0": self.c0,
            "gamma": self.gamma,
            "k_ell": self.k_ell,
            "card": self.card,
            "levels": [{"n": lv.n, "d": lv.d} for lv in self.levels],
            "intervals": self.intervals.tolist(),
        }


def _largest_same_parity(bound: float, parity: int) -> int | None:
    d = _floor_tol(bound)
    if (d - parity) % 2:
        d -= 1
    return d if d >= 0 else None


def k_ell_of(ell: int, gamma: float) -> int:
    """``sup{j in N : j/gamma < ell}``."""
    return max(0, math.ceil(ell * gamma - _FLOOR_SLACK) - 1)


def build_cantor_set(A: int, ell: int, gamma: float, c0: float) -> CantorBlocks:
    if not isinstance(A, (int, np.integer)) or isinstance(A, bool):
        raise InvalidParameterError("A must be an integer")
    A, ell = int(A), int(ell)
    if ell < 1:
        raise InvalidParameterError("depth ell must be >= 1")
    if not (0 < gamma and math.isfinite(gamma)):
        raise InvalidParameterError("gamma must be positive and finite")
    if not (0 < c0 < 1):
        raise InvalidParameterError("c0 must lie in (0, 1)")
    if ell > 40:
        raise InvalidParameterError("depth ell > 40 would need more than 2^40 intervals")
    scaled = A * 2.0 ** (-ell)
    need = max(1.0, 2.0 / c0)
    if scaled < need * (1 - _FLOOR_SLACK):
        raise DomainError(
            f"A*2^-ell = {scaled:g} < max(1, 2/c0) = {need:g}; the construction needs A*2^-ell >= max(1, 2/c0)"
        )

    ns = [A]
    ds: list[int | None] = []
    for j in range(ell + 1):
        bound = gap_budget(A, ell, j, gamma, c0)
        d = _largest_same_parity(bound, ns[j] % 2)
        if j == ell:
            ds.append(d)
            break
        if d is None or ns[j] - d < 2:
            raise DomainError(
                f"level {j}: no gap d_{j} with the parity of n_{j}={ns[j]} satisfies "
                f"d_{j} <= {bound:g} and n_{j} - d_{j} >= 2"
            )
        ds.append(d)
        ns.append((ns[j] - d) // 2)

    starts = np.array([1], dtype=np.int64)
    ends = np.array([A], dtype=np.int64)
    for j in range(1, ell + 1):
        nj = ns[j]
        left_s, right_e = starts, ends
        new_s = np.empty(2 * starts.size, dtype=np.int64)
        new_e = np.empty_like(new_s)
        new_s[0::2] = left_s
        new_e[0::2] = left_s + nj - 1
        new_s[1::2] = right_e - nj + 1
        new_e[1::2] = right_e
        starts, ends = new_s, new_e
    intervals = np.stack([starts, ends], axis=1)
    levels = tuple(Level(ns[j], ds[j]) for j in range(ell + 1))
    return CantorBlocks(A, ell, float(c0), float(gamma), levels, intervals, k_ell_of(ell, gamma))


def sub_blocks(blocks: CantorBlocks, k: int, j: int) -> IntervalSet:
    """Union of the final intervals descending from ``I_{k,j}``."""
    if not (0 <= k <= blocks.ell) or not (1 <= j <= (1 << k)):
        raise InvalidParameterError(f"need 0 <= k <= {blocks.ell} and 1 <= j <= 2^k, got k={k}, j={j}")
    width = 1 << (blocks.ell - k)
    part = blocks.intervals[(j - 1) * width : j * width]
    return IntervalSet(part[:, 0], part[:, 1])


@dataclass(frozen=True)
class Stage:
    A_i: int
    ell_i: int
    blocks: CantorBlocks
    indices: IntervalSet  # stage set in original coordinates
    leftover: IntervalSet  # what remains of {1..A} after this stage


@dataclass(frozen=True)
class ExhaustionTrace:
    A: int
    ell: int
    stages: tuple[Stage, ...]
    m_A: int
    remainder: IntervalSet

    @property
    def A_seq(self) -> list[int]:
        return [s.A_i for s in self.stages] + [self.remainder.card]

    def to_dict(self) -> dict:
        return {
            "A": self.A,
            "ell": self.ell,
            "m_A": self.m_A,
            "stages": [
                {"A_i": s.A_i, "ell_i": s.ell_i, "card": s.blocks.card, "indices": [list(p) for p in s.indices.pairs()]}
                for s in self.stages
            ],
            "remainder": [list(p) for p in self.remainder.pairs()],
        }


def _depth_for(A_i: int, threshold: float) -> int:
    """``inf{j : A_i 2^-j <= threshold}``."""
    j = 0
    while A_i * 2.0 ** (-j) > threshold * (1 + _FLOOR_SLACK):
        j += 1
    return j


def exhaust_interval(A: int, ell: int, gamma: float, c0: float) -> ExhaustionTrace:
    """Peel Cantor sets off ``{1..A}`` until at most ``A 2^-ell`` points remain."""
    threshold = A * 2.0 ** (-ell)
    remaining = IntervalSet.range(1, int(A))
    stages: list[Stage] = []
    A_i = int(A)
    while A_i > threshold * (1 + _FLOOR_SLACK):
        ell_i = _depth_for(A_i, threshold)
        if ell_i == 0:
            break
        try:
            blocks = build_cantor_set(A_i, ell_i, gamma, c0)
        except DomainError as exc:
            raise DomainError(f"exhaustion stage {len(stages)} (A_i={A_i}, ell_i={ell_i}): {exc}") from exc
        chosen = remaining.select(blocks.as_set())
        rest = remaining.select(blocks.as_set().complement_in(A_i))
        stages.append(Stage(A_i, ell_i, blocks, chosen, rest))
        remaining = rest
        A_i = rest.card
    return ExhaustionTrace(int(A), int(ell), tuple(stages), len(stages), remaining)


@dataclass(frozen=True)
class TruncationSchedule:
    M: list[float]
    T: list[float] | None
    flags: dict

    @property
    def levels(self) -> list[float]:
        return self.M if self.T is None else self.T

    def to_dict(self) -> dict:
        return {"M": self.M, "T": self.T, "flags": self.flags}


def _level_of(profile: MixingProfile, model: TailModel, x: float) -> float:
    z = profile.c ** (-1.0 / profile.gamma1) * x
    # the envelope only constrains integer lags >= 1; below that tau <= 1
    if model.bounded:
        return float(h_inverse(model, 1.0))
    # H^{-1}(tau) = (1 - log tau)^{1/gamma2}, kept in log space so tiny tau cannot underflow
    log_tau = -profile.c * math.floor(z) ** profile.gamma1 if z >= 1.0 else 0.0
    return float((1.0 - log_tau) ** (1.0 / model.gamma2))


def truncation_schedule(obj, profile: MixingProfile, model: TailModel) -> TruncationSchedule:
    """Levels ``M_j`` for a Cantor set, or ``T_j`` for an exhaustion trace.

    Two bounds are recorded per level.  ``safe`` is the always-valid
    ``(1 + x^gamma1)^(1/gamma2)``; ``doubling`` is the sharper
    ``(2x)^(gamma1/gamma2)``, which holds for ``gamma1 >= 1`` or large
    enough ``x`` but can fail otherwise, so it is reported, not enforced.
    """
    g1 = profile.gamma1
    inv_g2 = 0.0 if model.bounded else 1.0 / model.gamma2

    def check(xs, vals):
        safe = [v <= (1.0 + x**g1) ** inv_g2 * (1 + 1e-12) for x, v in zip(xs, vals)]
        dbl = [v <= (2.0 * x) ** (g1 * inv_g2) * (1 + 1e-12) for x, v in zip(xs, vals)]
        if not all(safe):
            raise AssertionError("truncation level exceeds (1 + x^gamma1)^(1/gamma2)")
        return safe, dbl

    if isinstance(obj, CantorBlocks):
        xs = [obj.A * 2.0 ** (-_level_exponent(obj.ell, j, obj.gamma)) for j in range(obj.ell + 1)]
        M = [_level_of(profile, model, x) for x in xs]
        safe, dbl = check(xs, M)
        return TruncationSchedule(M, None, {"safe_bound": safe, "doubling_bound": dbl})
    if isinstance(obj, ExhaustionTrace):
        xs = [float(a) for a in obj.A_seq]
        T = [_level_of(profile, model, x) for x in xs if x > 0]
        xs = xs[: len(T)]
        safe, dbl = check(xs, T)
        return TruncationSchedule([], T, {"safe_bound": safe, "doubling_bound": dbl})
    raise InvalidParameterError("expected CantorBlocks or ExhaustionTrace")


def second_bound_T(trace: ExhaustionTrace, sched: TruncationSchedule, c4: float, gamma1: float, gamma: float) -> list[bool]:
    """Check ``2 A_j T_{j-1} <= c4 A_j^{gamma1/gamma}`` for ``j = 1..m_A``."""
    A = trace.A_seq
    T = sched.T or []
    return [
        2.0 * A[j] * T[j - 1] <= c4 * A[j] ** (gamma1 / gamma) * (1 + 1e-12)
        for j in range(1, min(len(A), len(T)))
        if A[j] > 0
    ]
