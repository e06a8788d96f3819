"""Replicated simulation: tail estimates, dominance checks, calibration, MDP study.

Replicates are simulated in fixed-size chunks; chunk ``k`` draws from RNG
stream ``k`` of the master seed, so the output does not depend on how the
chunks are scheduled.  Aggregation is by integer counts or order-free
reductions.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import stats

from .errors import InvalidInputError, InvalidParameterError, ResourceLimitError
from .processes import Process, make_process
from .rng import chunk_sizes, stream
from .tail_models import compose_gamma

DEFAULT_CONF = 0.99
MAX_CELLS = 4_000_000  # doubles held per chunk (reps * n)
STATISTICS = ("max_abs", "abs", "upper")


def clopper_pearson_upper(hits, N: int, conf: float = DEFAULT_CONF):
    """Exact one-sided binomial upper confidence bound."""
    if not 0 < conf < 1:
        raise InvalidParameterError("conf must lie in (0, 1)")
    k = np.asarray(hits, dtype=float)
    with np.errstate(invalid="ignore"):
        out = np.where(k >= N, 1.0, stats.beta.ppf(conf, k + 1, np.maximum(N - k, 1)))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class TailEstimate:
    x_grid: np.ndarray
    hits: np.ndarray
    N: int
    cp_upper: np.ndarray
    conf: float = DEFAULT_CONF
    n: int | None = None
    statistic: str = "max_abs"

    @property
    def p_hat(self) -> np.ndarray:
        return self.hits / self.N

    @classmethod
    def from_statistics(cls, values: np.ndarray, x_grid, conf: float = DEFAULT_CONF, n=None, statistic="max_abs"):
        x = np.asarray(x_grid, dtype=float)
        if np.any(np.diff(x) < 0):
            raise InvalidParameterError("x_grid must be sorted")
        v = np.sort(np.asarray(values, dtype=float))
        N = v.size
        hits = N - np.searchsorted(v, x, side="left")  # count of v >= x
        return cls(x, hits.astype(np.int64), N, np.asarray(clopper_pearson_upper(hits, N, conf)), conf, n, statistic)

    def rows(self) -> list[dict]:
        return [
            {"x": float(x), "hits": int(h), "N": self.N, "p_hat": float(h) / self.N, "cp_upper": float(u)}
            for x, h, u in zip(self.x_grid, self.hits, self.cp_upper)
        ]


def _chunk_size(n: int) -> int:
    return int(max(16, min(1000, MAX_CELLS // max(n, 1))))


def _chunk_stat(process: Process, n_list: Sequence[int], size: int, seed: int, sid: int, statistic: str) -> np.ndarray:
    n_max = max(n_list)
    X = process.simulate(n_max, size, stream(seed, sid))
    S = np.cumsum(X, axis=1)
    cols = np.asarray(n_list) - 1
    if statistic == "max_abs":
        return np.maximum.accumulate(np.abs(S), axis=1)[:, cols]
    if statistic == "abs":
        return np.abs(S[:, cols])
    return S[:, cols]


def simulate_statistics(process, n_list: Sequence[int], N: int, master_seed: int, statistic: str = "max_abs",
                        workers: int = 1) -> dict[int, np.ndarray]:
    """Per-replicate statistic of the partial sums at each ``n`` in ``n_list``.

    One path of length ``max(n_list)`` serves every ``n``.
    """
    process = make_process(process)
    if statistic not in STATISTICS:
        raise InvalidParameterError(f"statistic must be one of {STATISTICS}")
    n_list = sorted({int(n) for n in n_list})
    if not n_list or n_list[0] < 1:
        raise InvalidParameterError("n values must be >= 1")
    if N < 1:
        raise InvalidParameterError("N must be >= 1")
    n_max = n_list[-1]
    if n_max > 10**8:
        raise ResourceLimitError("path length above 1e8 is not supported")
    sizes = chunk_sizes(N, _chunk_size(n_max))
    jobs = [(size, sid) for sid, size in enumerate(sizes)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda j: _chunk_stat(process, n_list, j[0], master_seed, j[1], statistic), jobs))
    else:
        parts = [_chunk_stat(process, n_list, size, master_seed, sid, statistic) for size, sid in jobs]
    allv = np.concatenate(parts, axis=0)
    return {n: allv[:, i] for i, n in enumerate(n_list)}


def estimate_max_tail(process, n: int, x_grid, N: int, master_seed: int, conf: float = DEFAULT_CONF,
                      statistic: str = "max_abs", workers: int = 1) -> TailEstimate:
    if N < 100:
        raise InvalidParameterError("N must be >= 100")
    vals = simulate_statistics(process, [n], N, master_seed, statistic, workers)[n]
    return TailEstimate.from_statistics(vals, x_grid, conf, n, statistic)


@dataclass(frozen=True)
class DominanceReport:
    passed: bool
    per_point: list
    worst_margin: float
    worst_x: float

    def to_dict(self):
        return {"passed": self.passed, "worst_margin": self.worst_margin, "worst_x": self.worst_x, "points": self.per_point}


def verify_dominance(estimate: TailEstimate, bound) -> DominanceReport:
    """Pointwise ``cp_upper <= bound`` (a bound of at least 1 always passes)."""
    b = np.asarray(bound, dtype=float)
    if b.shape != estimate.x_grid.shape:
        raise InvalidInputError("bound curve and x grid differ in length")
    ok = (estimate.cp_upper <= b) | (b >= 1.0)
    margin = np.minimum(b, 1.0) - estimate.cp_upper
    margin = np.where(b >= 1.0, np.maximum(margin, 0.0), margin)
    i = int(np.argmin(margin))
    pts = [
        {**row, "bound": float(bv), "pass": bool(p)} for row, bv, p in zip(estimate.rows(), b, ok)
    ]
    return DominanceReport(bool(ok.all()), pts, float(margin[i]), float(estimate.x_grid[i]))


# -- calibration --------------------------------------------------------------

BoundFamily = Callable[[float, Mapping[str, float]], float]


@dataclass(frozen=True)
class CalibrationCell:
    estimate: TailEstimate
    bound: BoundFamily  # (x, constants) -> clamped bound


@dataclass(frozen=True)
class CalibrationResult:
    constants: dict  # seed -> {name: value}, None if calibration failed
    spread: dict  # name -> max/min ratio across seeds
    failures: list
    search_range: tuple

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self):
        return {"constants": {str(k): v for k, v in self.constants.items()}, "spread": self.spread,
                "failures": self.failures, "search_range": list(self.search_range)}


def _dominates(cells: Sequence[CalibrationCell], consts: Mapping[str, float]) -> bool:
    for cell in cells:
        b = np.array([cell.bound(float(x), consts) for x in cell.estimate.x_grid])
        if not verify_dominance(cell.estimate, b).passed:
            return False
    return True


def _log_bisect(pred, lo: float, hi: float, rel: float) -> float:
    """Smallest value in ``[lo, hi]`` (to relative precision) where ``pred`` holds; pred is monotone."""
    a, b = math.log(lo), math.log(hi)
    while b - a > math.log1p(rel):
        m = 0.5 * (a + b)
        if pred(math.exp(m)):
            b = m
        else:
            a = m
    return math.exp(b)


def calibrate_constants(sweep: Mapping[int, Sequence[CalibrationCell]], initial: Mapping[str, float],
                        order: Sequence[str] | None = None, lo: float = 1e-3, hi: float = 1e6,
                        rel: float = 1e-3) -> CalibrationResult:
    """Smallest constants keeping dominance over every cell, separately per seed.

    A common multiplier of ``initial`` is searched first, then each constant
    is lowered on its own in ``order``.  Bounds must be nondecreasing in
    every constant.
    """
    if not sweep:
        raise InvalidInputError("empty calibration sweep")
    order = list(order or initial)
    out, failures = {}, []
    for seed, cells in sweep.items():
        if not cells:
            raise InvalidInputError(f"seed {seed} has no cells")

        def scaled(s):
            return {k: s * v for k, v in initial.items()}

        if not _dominates(cells, scaled(hi)):
            failures.append({"seed": seed, "reason": f"no dominance at multiplier {hi:g}"})
            out[seed] = None
            continue
        s = lo if _dominates(cells, scaled(lo)) else _log_bisect(lambda v: _dominates(cells, scaled(v)), lo, hi, rel)
        consts = scaled(s)
        for name in order:
            cur = consts[name]
            floor = lo * initial[name]

            def with_name(v, name=name):
                return _dominates(cells, {**consts, name: v})

            consts[name] = floor if with_name(floor) else _log_bisect(with_name, floor, cur, rel)
        out[seed] = consts
    good = [c for c in out.values() if c]
    spread = {}
    if good:
        for name in initial:
            vals = [c[name] for c in good]
            spread[name] = max(vals) / min(vals)
    return CalibrationResult(out, spread, failures, (lo, hi))


# -- MDP study -----------------------------------------------------------------


@dataclass(frozen=True)
class MdpCell:
    n: int
    t: float
    a_n: float
    hits: int
    N: int
    sigma_n: float
    value: float | None  # a_n log p_hat, None when censored
    se: float | None
    cp_upper: float
    censored: bool


@dataclass(frozen=True)
class MdpStudy:
    n_grid: list
    beta: float
    t_grid: list
    gamma: float
    admissible: bool
    cells: list = field(default_factory=list)

    @property
    def reference(self) -> dict:
        return {t: -t * t / 2.0 for t in self.t_grid}

    def values(self, t: float) -> list:
        return [c.value for c in self.cells if c.t == t]

    def to_dict(self):
        return {
            "n_grid": self.n_grid, "beta": self.beta, "t_grid": self.t_grid, "gamma": self.gamma,
            "admissible": self.admissible, "reference": {str(k): v for k, v in self.reference.items()},
            "cells": [c.__dict__ for c in self.cells],
        }


def mdp_admissible(beta: float, gamma: float) -> bool:
    """``a_n = n^-beta`` with ``a_n n^{gamma/(2-gamma)} -> inf`` and ``a_n -> 0``."""
    return 0 < beta < gamma / (2.0 - gamma)


def mdp_study(process, n_grid: Sequence[int], beta: float, t_grid: Sequence[float], N: int, master_seed: int,
              conf: float = DEFAULT_CONF, workers: int = 1) -> MdpStudy:
    process = make_process(process)
    prof = process.profile
    gamma = compose_gamma(prof.mixing.gamma1, prof.tail.gamma2).gamma
    n_grid = sorted({int(n) for n in n_grid})
    t_grid = [float(t) for t in t_grid]
    if N < 2:
        raise InvalidParameterError("N must be >= 2")
    sums = simulate_statistics(process, n_grid, N, master_seed, "upper", workers)
    cells = []
    for n in n_grid:
        S = sums[n]
        sigma = float(np.std(S, ddof=1))
        a_n = n ** (-beta)
        z = np.sqrt(a_n) * np.abs(S) / sigma if sigma > 0 else np.full(S.size, np.inf)
        for t in t_grid:
            hits = int(np.count_nonzero(z >= t))
            cp = float(clopper_pearson_upper(hits, N, conf))
            if hits == 0:
                cells.append(MdpCell(n, t, a_n, 0, N, sigma, None, None, cp, True))
                continue
            p = hits / N
            se = a_n * math.sqrt((1.0 - p) / (N * p))
            cells.append(MdpCell(n, t, a_n, hits, N, sigma, a_n * math.log(p), se, cp, False))
    if all(c.censored for c in cells):
        raise InvalidInputError("every MDP cell is censored; increase N")
    return MdpStudy(n_grid, float(beta), t_grid, gamma, mdp_admissible(beta, gamma), cells)
