"""Semiexponential tail law, its quantile machinery and truncation.

The tail law is ``H(t) = exp(1 - t**gamma2)``.  ``gamma2 = inf`` is the
bounded case ``|X| <= 1`` and is handled as its own state rather than a
large exponent: ``H(t) = 1`` for ``t < 1`` and ``0`` afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
from scipy import integrate, special

from .errors import InvalidInputError, InvalidParameterError

INF = math.inf

QuantileFn = Callable[[float], float]
_TINY = 1e-300


def _parse_exponent(value, name: str) -> float:
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "+inf", "infinity"):
            return INF
        value = float(value)
    value = float(value)
    if math.isnan(value) or value <= 0:
        raise InvalidParameterError(f"{name} must be positive, got {value!r}")
    return value


@dataclass(frozen=True)
class TailModel:
    """Semiexponential tail ``P(|X| > t) <= exp(1 - t**gamma2)``."""

    gamma2: float

    def __post_init__(self):
        object.__setattr__(self, "gamma2", _parse_exponent(self.gamma2, "gamma2"))

    @property
    def bounded(self) -> bool:
        return math.isinf(self.gamma2)

    def survival(self, t, clamp: bool = True):
        return h_survival(self, t, clamp=clamp)

    def inverse(self, y):
        return h_inverse(self, y)

    def quantile(self, u):
        """Vectorised ``Q(u)`` of the extremal law with survival ``min(1, H)``."""
        u = np.asarray(u, dtype=float)
        if np.any((u <= 0) | (u > 1)):
            raise InvalidParameterError("quantile level must lie in (0, 1]")
        if self.bounded:
            out = np.where(u < 1.0, 1.0, 0.0)
        else:
            with np.errstate(divide="ignore"):
                out = np.where(u < 1.0, (1.0 - np.log(u)) ** (1.0 / self.gamma2), 0.0)
        return out if out.ndim else float(out)

    def moment_integral(self, x: float, power: float = 1.0) -> float:
        """``int_0^x Q(u)**power du`` in closed form.

        With ``u = e * exp(-s)`` the integral is ``e * Gamma(1 + p/gamma2, log(e/x))``
        (upper incomplete gamma, unnormalised).
        """
        if x < 0:
            raise InvalidParameterError("upper limit must be nonnegative")
        x = min(float(x), 1.0)
        if x == 0.0:
            return 0.0
        if self.bounded:
            return x
        a = 1.0 + power / self.gamma2
        z = 1.0 - math.log(x)
        return float(math.e * special.gammaincc(a, z) * special.gamma(a))

    def second_moment(self) -> float:
        """``int_0^1 Q(u)**2 du``, the largest ``E X**2`` compatible with the tail."""
        return self.moment_integral(1.0, power=2.0)


@dataclass(frozen=True)
class GammaTriple:
    gamma1: float
    gamma2: float
    gamma: float

    @property
    def below_one(self) -> bool:
        return self.gamma < 1.0


def compose_gamma(gamma1, gamma2) -> GammaTriple:
    """Harmonic composition ``1/gamma = 1/gamma1 + 1/gamma2``."""
    g1 = _parse_exponent(gamma1, "gamma1")
    g2 = _parse_exponent(gamma2, "gamma2")
    if math.isinf(g1):
        raise InvalidParameterError("gamma1 must be finite")
    inv = 1.0 / g1 + (0.0 if math.isinf(g2) else 1.0 / g2)
    return GammaTriple(g1, g2, 1.0 / inv)


def h_survival(model: TailModel, t, clamp: bool = True):
    """``H(t)``; clamped to 1 unless ``clamp=False`` (needed for exact inversion)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise InvalidParameterError("threshold must be positive")
    if model.bounded:
        out = np.where(t_arr < 1.0, 1.0, 0.0)
    else:
        out = np.exp(1.0 - t_arr**model.gamma2)
        if clamp:
            out = np.minimum(out, 1.0)
    return out if out.ndim else float(out)


def h_inverse(model: TailModel, y):
    """``H^{-1}(y) = log(e/y)**(1/gamma2)`` for ``y <= e`` and 0 beyond."""
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr <= 0):
        raise InvalidParameterError("probability level must be positive")
    e = math.e
    if model.bounded:
        out = np.where(y_arr < e, 1.0, 0.0)
    else:
        base = np.maximum(1.0 - np.log(y_arr), 0.0)
        out = np.where(y_arr <= e, base ** (1.0 / model.gamma2), 0.0)
    return out if out.ndim else float(out)


def quantile_Q(source: Union[TailModel, Sequence[float], np.ndarray], u: float) -> float:
    """``Q(u) = inf{t > 0 : P(|Y| > t) <= u}`` for a tail model or a sample.

    For a sample the survival function is the empirical one, so the
    infimum is an order statistic of ``|Y|``.
    """
    if not 0.0 < u <= 1.0:
        raise InvalidParameterError(f"quantile level must lie in (0, 1], got {u!r}")
    if isinstance(source, TailModel):
        return float(source.quantile(u))
    a = np.sort(np.abs(np.asarray(source, dtype=float).ravel()))
    n = a.size
    if n == 0:
        raise InvalidInputError("empty sample")
    # number of sample points allowed strictly above t
    k = math.floor(u * n * (1.0 + 1e-12))
    if k >= n:
        return 0.0
    return float(max(a[n - k - 1], 0.0))


def empirical_quantile_fn(sample) -> QuantileFn:
    a = np.sort(np.abs(np.asarray(sample, dtype=float).ravel()))
    if a.size == 0:
        raise InvalidInputError("empty sample")
    return lambda u: quantile_Q(a, u)


def _as_quantile(Q) -> QuantileFn:
    if isinstance(Q, TailModel):
        return lambda u: float(Q.quantile(u))
    if callable(Q):
        return Q
    raise InvalidInputError("Q must be a TailModel or a callable")


def integrated_quantile(Q, x: float) -> float:
    """``int_0^x Q(u) du``; closed form for tail models, adaptive quadrature otherwise."""
    if x < 0:
        raise InvalidParameterError("upper limit must be nonnegative")
    x = min(float(x), 1.0)
    if isinstance(Q, TailModel):
        return Q.moment_integral(x)
    if x == 0.0:
        return 0.0
    q = _as_quantile(Q)
    val, _ = integrate.quad(q, 0.0, x, limit=200, epsabs=1e-13, epsrel=1e-12)
    return float(val)


def integrated_quantile_inverse_G(Q, y: float, tol: float = 1e-13) -> float:
    """Level ``x`` with ``int_0^x Q = y``, by bisection; clamps to 1.

    The bisection runs on ``log x`` to relative tolerance ``tol`` (levels
    near 0 matter in covariance series) and returns the upper end of the
    final bracket, so ``G`` is never underestimated.
    """
    if y < 0 or math.isnan(y):
        raise InvalidParameterError("integral value must be nonnegative")
    if y == 0:
        return 0.0
    if isinstance(Q, TailModel) and Q.bounded:
        return min(float(y), 1.0)
    total = integrated_quantile(Q, 1.0)
    if y >= total:
        return 1.0
    hi = 1.0
    lo = 0.5
    while integrated_quantile(Q, lo) >= y:
        if lo == _TINY:
            return lo
        hi, lo = lo, max(lo * lo, _TINY)
    while hi - lo > tol * hi:
        mid = math.sqrt(lo * hi)
        if integrated_quantile(Q, mid) < y:
            lo = mid
        else:
            hi = mid
    return hi


def truncate(M: float, x):
    """``phi_M(x) = (x ^ M) v (-M)``; works elementwise on arrays."""
    if not M > 0:
        raise InvalidParameterError("truncation level must be positive")
    out = np.clip(np.asarray(x, dtype=float), -M, M)
    return out if out.ndim else float(out)
