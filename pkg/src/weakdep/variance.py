"""Variance functionals: the proxy ``V``, the block rate ``v^2`` and their bounds.

Estimators work on a replicate matrix of shape ``(N, n)``; covariances are
ensemble covariances across replicates, so no stationarity is assumed.
Standard errors come from splitting the replicates into groups and
recomputing the statistic per group.  Replicates are first put in a
canonical order (sorted by a hash of their bytes), so every result is
invariant to the order in which replicates are supplied.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate

from .cantor import build_cantor_set
from .errors import DomainError, InvalidInputError, InvalidParameterError
from .mixing import MixingProfile
from .tail_models import TailModel, integrated_quantile_inverse_G

N_GROUPS = 20


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class VarianceReport:
    V_hat: Estimate
    v2_hat: Estimate
    V_integral: float
    sigma_n2: Estimate
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "V_hat": self.V_hat.to_dict(),
            "v2_hat": self.v2_hat.to_dict(),
            "V_integral": self.V_integral,
            "sigma_n2": self.sigma_n2.to_dict(),
            "diagnostics": self.diagnostics,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _as_paths(paths) -> np.ndarray:
    X = np.asarray(paths, dtype=float)
    if X.ndim != 2:
        raise InvalidInputError("paths must be a 2-d array (replicates, time)")
    if X.shape[0] < 2:
        raise InvalidInputError("need at least 2 replicates")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("paths contain non-finite values")
    return _canonical_order(X)


def _canonical_order(X: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(X) + 0.0  # + 0.0 folds -0.0 into 0.0
    keys = np.fromiter(
        (int.from_bytes(hashlib.blake2b(row.tobytes(), digest_size=8).digest(), "little") for row in X),
        dtype=np.uint64, count=X.shape[0],
    )
    return X[np.argsort(keys, kind="stable")]


def _groups(N: int, n_groups: int = N_GROUPS) -> list[np.ndarray]:
    g = min(n_groups, N // 2)
    return [idx for idx in np.array_split(np.arange(N), g) if idx.size >= 2] if g >= 2 else []


def _with_se(stat, X: np.ndarray) -> Estimate:
    value = stat(X)
    parts = [stat(X[idx]) for idx in _groups(X.shape[0])]
    se = float(np.std(parts, ddof=1) / math.sqrt(len(parts))) if len(parts) >= 2 else math.nan
    return Estimate(float(value), se)


# -- analytic bounds ----------------------------------------------------------


def covariance_lag_bound(model: TailModel, profile: MixingProfile, k: int) -> float:
    """``2 int_0^{G(tau(k)/2)} Q(u)^2 du``."""
    if k < 1:
        raise InvalidParameterError("lag must be >= 1")
    return _cov_bound_at(model, float(profile.tau(k)))


def _cov_bound_at(model: TailModel, tau: float) -> float:
    if tau <= 0:
        return 0.0
    x = integrated_quantile_inverse_G(model, tau / 2.0)
    return 2.0 * model.moment_integral(x, power=2.0)


def V_integral_bound(model: TailModel, profile: MixingProfile, rtol: float = 1e-12, kmax: int = 10**7) -> float:
    """``E X^2`` bound plus ``4 sum_k int_0^{G(tau(k)/2)} Q^2``.

    The series is summed until the terms are negligible; the remainder is
    bounded by the integral of the (decreasing) continuous envelope.
    """
    ex2 = model.second_moment()
    if math.isinf(profile.c):
        return ex2
    if not profile.c > 0:
        raise DomainError("mixing rate must be positive for the series to converge")

    def term(x: float) -> float:
        return 2.0 * _cov_bound_at(model, math.exp(-profile.c * x**profile.gamma1))

    total, k = 0.0, 1
    while True:
        t = term(k)
        total += t
        if t <= rtol * max(total, 1e-300) or t == 0.0:
            break
        k += 1
        if k > kmax:
            raise DomainError("covariance series does not become negligible")
    tail, _ = integrate.quad(term, k, np.inf, limit=200)
    return float(ex2 + total + tail)


def default_M_grid(model: TailModel) -> list[float]:
    if model.bounded:
        return [1.0]
    top = float(model.quantile(1e-9))
    grid, m = [], 1.0
    while m < top:
        grid.append(m)
        m *= 2.0
    grid.append(top)
    return grid


def default_lag_window(profile: MixingProfile, tol: float = 1e-12) -> int:
    return 1 if math.isinf(profile.c) else profile.lag_window(tol)


def _tail_allowance(model: TailModel, profile: MixingProfile | None, L: int) -> float:
    if profile is None or math.isinf(profile.c):
        return 0.0
    total, k = 0.0, L + 1
    while True:
        t = 2.0 * _cov_bound_at(model, float(profile.tau(k)))
        total += t
        if t <= 1e-15 * max(total, 1e-300) or t == 0.0:
            return total
        k += 1


# -- estimators -----------------------------------------------------------------


def _local_V(Z: np.ndarray, L: int, block: int) -> float:
    """max over index blocks of ``Var + 2 sum_k |Cov(k)|``, block-averaged in ``i``."""
    N, n = Z.shape
    if n <= L:
        raise InvalidInputError(f"path length {n} must exceed the lag window {L}")
    Zc = Z - Z.mean(axis=0, keepdims=True)
    span = n - L
    nb = max(1, span // block)
    edges = np.linspace(0, span, nb + 1).astype(int)
    best = -np.inf
    for a, b in zip(edges[:-1], edges[1:]):
        head = Zc[:, a:b]
        ext = Zc[:, a : b + L]
        nfft = 1 << int(math.ceil(math.log2(head.shape[1] + ext.shape[1])))
        # sum over replicates and i in [a, b) of Zc[i] * Zc[i + k], all lags at once
        spec = (np.conj(np.fft.rfft(head, nfft, axis=1)) * np.fft.rfft(ext, nfft, axis=1)).sum(axis=0)
        cc = np.fft.irfft(spec, nfft)[: L + 1] / ((N - 1) * (b - a))
        best = max(best, cc[0] + 2.0 * np.abs(cc[1:]).sum())
    return float(best)


def estimate_V(paths, M_grid: Sequence[float] | None = None, lag_window: int | None = None, *,
               model: TailModel | None = None, profile: MixingProfile | None = None,
               i_block: int = 64) -> Estimate:
    """Estimate ``sup_M sup_i Var phi_M(X_i) + 2 sum_{j>i} |Cov(phi_M(X_i), phi_M(X_j))|``.

    Lags beyond ``lag_window`` are charged the analytic covariance bound.
    Covariances are averaged over blocks of ``i_block`` consecutive indices
    before the absolute value is taken; without this the estimator is
    dominated by the absolute noise of hundreds of near-zero covariances.
    """
    X = _as_paths(paths)
    if M_grid is None:
        M_grid = default_M_grid(model) if model is not None else [float(np.max(np.abs(X))) or 1.0]
    M_grid = [float(m) for m in M_grid]
    if not M_grid or any(m <= 0 for m in M_grid):
        raise InvalidParameterError("M_grid must be nonempty and positive")
    if lag_window is None:
        lag_window = default_lag_window(profile) if profile is not None else 1
    L = int(lag_window)
    if L < 0:
        raise InvalidParameterError("lag window must be >= 0")
    # long windows are capped at half the path; the analytic allowance covers the rest
    L = min(L, X.shape[1] // 2)
    allowance = _tail_allowance(model, profile, L) if model is not None else 0.0

    def stat(Xs: np.ndarray) -> float:
        return max(_local_V(np.clip(Xs, -m, m), L, i_block) for m in M_grid) + allowance

    return _with_se(stat, X)


def cantor_index_sets(n: int, gamma: float = 0.5, c0: float = 1.0 / 6.0) -> list[np.ndarray]:
    """Zero-based index arrays of Cantor sets fitting in ``{0..n-1}``."""
    out = []
    for ell in range(1, 8):
        if n * 2.0 ** (-ell) < max(1.0, 2.0 / c0):
            break
        out.append(build_cantor_set(n, ell, gamma, c0).as_set().to_array() - 1)
    return out


def estimate_v2(paths, block_sizes: Sequence[int] = (1, 4, 16, 64, 256), *, T_grid: Sequence[float] | None = None,
                model: TailModel | None = None, starts: int = 4, cantor: bool = True) -> Estimate:
    """Estimate ``sup_T sup_K Var(sum_{i in K} phi_T(X_i)) / Card K``.

    The candidate sets are contiguous blocks and Cantor sets.  The maximiser
    is chosen on half of the replicates and its variance estimated on the
    other half, so the max over many noisy candidates does not inflate it.
    """
    X = _as_paths(paths)
    n = X.shape[1]
    if any(int(b) < 1 for b in block_sizes):
        raise InvalidParameterError("block sizes must be >= 1")
    if T_grid is None:
        T_grid = default_M_grid(model) if model is not None else [float(np.max(np.abs(X))) or 1.0]
    sets: list[np.ndarray] = []
    for b in block_sizes:
        b = int(b)
        if b > n:
            continue
        for s in np.unique(np.linspace(0, n - b, starts).astype(int)):
            sets.append(np.arange(s, s + b))
    if cantor:
        sets.extend(cantor_index_sets(n))
    if not sets:
        raise InvalidParameterError("no index set fits in the path")

    if X.shape[0] < 4:
        raise InvalidInputError("need at least 4 replicates")
    # choose (T, K) on even replicates, evaluate on odd ones: no selection bias
    pick, evaluate = X[0::2], X[1::2]
    best, arg = -1.0, None
    for T in T_grid:
        Z = np.clip(pick, -T, T)
        for K in sets:
            v = float(np.var(Z[:, K].sum(axis=1), ddof=1)) / K.size
            if v > best:
                best, arg = v, (T, K)
    T, K = arg
    S = np.clip(evaluate, -T, T)[:, K].sum(axis=1)
    est = _sample_variance(S)
    return Estimate(est.value / K.size, est.se / K.size)


def _sample_variance(S: np.ndarray) -> Estimate:
    N = S.size
    var = float(np.var(S, ddof=1))
    # SE of a sample variance: sqrt((m4 - var^2 (N-3)/(N-1)) / N)
    m4 = float(np.mean((S - S.mean()) ** 4))
    se = math.sqrt(max(m4 - var * var * (N - 3) / (N - 1), 0.0) / N)
    return Estimate(var, se)


@dataclass(frozen=True)
class SigmaEstimate:
    n: int
    sigma_n2: Estimate
    per_n: Estimate


def estimate_sigma_n2(paths, n: int) -> SigmaEstimate:
    X = _as_paths(paths)
    if n < 1 or n > X.shape[1]:
        raise InvalidParameterError(f"n must lie in [1, {X.shape[1]}]")
    est = _sample_variance(X[:, :n].sum(axis=1))
    return SigmaEstimate(n, est, Estimate(est.value / n, est.se / n))


def variance_report(paths, model: TailModel, profile: MixingProfile, n: int | None = None, **kw) -> VarianceReport:
    X = _as_paths(paths)
    L = kw.pop("lag_window", None)
    L = default_lag_window(profile) if L is None else L
    V = estimate_V(X, lag_window=L, model=model, profile=profile)
    v2 = estimate_v2(X, model=model)
    Vi = V_integral_bound(model, profile)
    s = estimate_sigma_n2(X, n or X.shape[1])
    L_used = min(L, X.shape[1] // 2)
    return VarianceReport(V, v2, Vi, s.sigma_n2, {"M_grid": default_M_grid(model), "lag_window": L_used})
