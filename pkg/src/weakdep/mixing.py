"""Mixing-coefficient envelopes and conversions.

Only analytic envelopes are handled here.  The general tau coefficient (a
supremum over all index tuples and Lipschitz test functions) is not
computable; model-specific upper bounds stand in for it:

* ``tau_from_alpha``      strong mixing -> tau
* ``tau_linear_process``  1-Lipschitz functions of a linear process
* ``tau_arch_bound``      squared ARCH(inf) observations, via a coupling recursion
* ``beta_finite_chain``   exact beta coefficients of a finite stationary chain
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, Union

import numpy as np
from scipy import special

from .errors import InvalidInputError, InvalidParameterError, NoEnvelopeError
from .tail_models import integrated_quantile

SERIES_TOL = 1e-14


@dataclass(frozen=True)
class MixingProfile:
    """Envelope ``tau(x) <= exp(-c * floor(x)**gamma1)`` for ``x >= 1``."""

    c: float
    gamma1: float

    def __post_init__(self):
        if not self.c > 0:
            raise InvalidParameterError("rate constant c must be positive")
        if not (self.gamma1 > 0 and math.isfinite(self.gamma1)):
            raise InvalidParameterError("gamma1 must be positive and finite")

    def tau(self, x):
        return tau_envelope(self, x)

    def lag_window(self, tol: float = 1e-12) -> int:
        """Smallest integer lag with envelope value below ``tol``."""
        return max(1, math.ceil((math.log(1.0 / tol) / self.c) ** (1.0 / self.gamma1)))


def tau_envelope(profile: MixingProfile, x):
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 1):
        raise InvalidParameterError("lag must be >= 1")
    out = np.exp(-profile.c * np.floor(x_arr) ** profile.gamma1)
    return out if out.ndim else float(out)


def tau_from_alpha(alpha_i: float, Q) -> float:
    """``2 * int_0^{2 alpha} Q(u) du``."""
    if alpha_i < 0:
        raise InvalidParameterError("alpha must be nonnegative")
    if alpha_i == 0:
        return 0.0
    return 2.0 * integrated_quantile(Q, 2.0 * alpha_i)


# -- linear processes -------------------------------------------------------


@dataclass(frozen=True)
class Coefficients:
    """Finite coefficient list plus a certified bound on the dropped tail."""

    values: np.ndarray
    tail: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise InvalidInputError("coefficients must be one-dimensional")
        if self.tail < 0:
            raise InvalidParameterError("tail bound must be nonnegative")
        object.__setattr__(self, "values", v)

    @property
    def abs_sum(self) -> float:
        return float(np.abs(self.values).sum() + self.tail)

    def __len__(self):
        return self.values.size


def as_coefficients(coeffs) -> Coefficients:
    if isinstance(coeffs, Coefficients):
        return coeffs
    return Coefficients(np.asarray(coeffs, dtype=float), 0.0)


def geometric_coefficients(scale: float, ratio: float, tol: float = SERIES_TOL) -> Coefficients:
    """``a_j = scale * ratio**j`` cut where the remaining mass drops below ``tol``."""
    if not 0 <= ratio < 1:
        raise InvalidParameterError("ratio must lie in [0, 1)")
    if scale == 0 or ratio == 0:
        return Coefficients(np.array([scale], dtype=float), 0.0)
    J = 1
    while abs(scale) * ratio**J / (1 - ratio) >= tol:
        J += 1
    vals = scale * ratio ** np.arange(J)
    return Coefficients(vals, abs(scale) * ratio**J / (1 - ratio))


def _subgeometric_tail(c: float, gamma1: float, J: int) -> float:
    # sum_{j>=J} exp(-c j^g) <= exp(-c J^g) + int_J^inf exp(-c x^g) dx
    z = c * J**gamma1
    s = 1.0 / gamma1
    integral = special.gammaincc(s, z) * special.gamma(s) / (gamma1 * c**s)
    return float(math.exp(-z) + integral)


def subgeometric_coefficients(
    rate: float, gamma1: float, scale: float = 1.0, tol: float = SERIES_TOL
) -> Coefficients:
    """``a_j = scale * exp(-rate * j**gamma1)`` with a certified tail."""
    if rate <= 0 or gamma1 <= 0:
        raise InvalidParameterError("rate and gamma1 must be positive")
    J = 1
    while abs(scale) * _subgeometric_tail(rate, gamma1, J) >= tol:
        J = J * 2 if J < 64 else J + 64
        if J > 10**7:
            raise NoEnvelopeError("coefficient tail does not become negligible")
    # shrink back to the first admissible cutoff
    lo = J // 2 if J <= 128 else J - 64
    while lo < J - 1:
        mid = (lo + J) // 2
        if abs(scale) * _subgeometric_tail(rate, gamma1, mid) < tol:
            J = mid
        else:
            lo = mid
    j = np.arange(J, dtype=float)
    vals = scale * np.exp(-rate * j**gamma1)
    return Coefficients(vals, abs(scale) * _subgeometric_tail(rate, gamma1, J))


BetaSpec = Union[None, Callable[[int], float], Sequence[float]]


def _beta_fn(beta: BetaSpec) -> Callable[[int], float]:
    if beta is None:
        return lambda k: 0.0
    if callable(beta):
        return beta
    arr = np.asarray(beta, dtype=float)

    # arr[k] = beta(k); lags past the table reuse the last (nonincreasing) value
    def fn(k: int) -> float:
        return float(arr[min(k, arr.size - 1)])

    return fn


def tau_linear_process(coeffs, beta: BetaSpec, l1_norm: float, l2_norm: float, i: int) -> float:
    """Upper bound on ``tau(i)`` for ``f(sum_j a_j xi_{n-j})`` with 1-Lipschitz ``f``.

    ``2 |xi|_1 sum_{j>=i} |a_j| + 4 |xi|_2 sum_{j<i} |a_j| beta(i-j)**0.5``.
    ``beta=None`` means i.i.d. innovations.  When the coefficients are a
    truncated list, the certified tail is charged to both sums.
    """
    if l1_norm < 0 or l2_norm < 0:
        raise InvalidParameterError("innovation norms must be nonnegative")
    if i < 1:
        raise InvalidParameterError("lag must be >= 1")
    co = as_coefficients(coeffs)
    a = np.abs(co.values)
    J = a.size
    bfn = _beta_fn(beta)
    far = float(a[i:].sum()) + co.tail
    near_idx = np.arange(min(i, J))
    b = np.array([bfn(i - j) for j in near_idx], dtype=float)
    if np.any(b < 0):
        raise InvalidParameterError("beta coefficients must be nonnegative")
    near = float(np.dot(a[near_idx], np.sqrt(b)))
    if i > J and co.tail > 0:
        bmax = max(bfn(k) for k in range(1, i - J + 1))
        near += co.tail * math.sqrt(bmax)
    return 2.0 * l1_norm * far + 4.0 * l2_norm * near


def certify_profile(
    bound: Callable[[int], float], gamma1: float, grid: Iterable[int] = range(1, 65)
) -> MixingProfile:
    """Largest ``c`` with ``bound(i) <= exp(-c i**gamma1)`` on every grid lag.

    A bound identically zero on the grid returns ``c = 1`` by convention.
    """
    grid = [int(i) for i in grid]
    cs = []
    for i in grid:
        v = float(bound(i))
        if v <= 0:
            continue
        if v >= 1:
            raise NoEnvelopeError(f"bound at lag {i} is {v:.3g} >= 1; no envelope exists")
        cs.append(-math.log(v) / i**gamma1)
    if not cs:
        return MixingProfile(1.0, gamma1)
    c = min(cs)
    # back off one ulp-scale step so that the certification is not lost to rounding
    c *= 1.0 - 1e-12
    prof = MixingProfile(c, gamma1)
    for i in grid:
        if float(bound(int(i))) > tau_envelope(prof, i):
            raise NoEnvelopeError(f"certification failed at lag {i}")
    return prof


def profile_from_geometric_inputs(
    coeff_rate: float,
    gamma1: float,
    *,
    coeff_scale: float = 1.0,
    beta_rate: float | None = None,
    l1_norm: float = 1.0,
    l2_norm: float = 1.0,
    grid: Iterable[int] = range(1, 65),
) -> MixingProfile:
    """Certified profile for ``a_k <= scale*exp(-c' k**g1)`` and ``beta(k) <= exp(-c' k**g1)``.

    ``beta_rate=None`` is the i.i.d. innovation case.
    """
    if coeff_rate <= 0:
        raise InvalidParameterError("coefficient rate must be positive")
    if coeff_scale == 0:
        return MixingProfile(1.0, gamma1)
    grid = [int(i) for i in grid]
    # the dropped coefficient mass must stay far below the smallest certified value
    floor = math.exp(-coeff_rate * max(grid) ** gamma1)
    coeffs = subgeometric_coefficients(
        coeff_rate, gamma1, scale=coeff_scale, tol=min(SERIES_TOL, 1e-6 * floor)
    )
    beta = None if beta_rate is None else (lambda k: math.exp(-beta_rate * k**gamma1))
    return certify_profile(
        lambda i: tau_linear_process(coeffs, beta, l1_norm, l2_norm, i), gamma1, grid
    )


# -- ARCH(inf) ----------------------------------------------------------------


def arch_coupling_distances(a: float, coeffs, m2: float, kmax: int) -> np.ndarray:
    """``delta[k]`` bounding ``E|Y_k^2 - Y*_k^2|`` when the past before time 1 is resampled.

    Both squared observations lie in ``[0, M]`` with ``M = a / (1 - sum a_j)``,
    so distances before the coupling time are at most ``M``; afterwards
    ``delta_t <= m2 * sum_j a_j delta_{t-j}``.  Index 0 is unused.
    """
    co = np.asarray(as_coefficients(coeffs).values, dtype=float)
    if np.any(co < 0):
        raise InvalidParameterError("ARCH coefficients must be nonnegative")
    s = float(co.sum())
    if s >= 1:
        raise InvalidParameterError("ARCH coefficients must sum to less than one")
    M = a / (1.0 - s)
    J = co.size
    # a_j stored at co[j-1]
    tail_from = np.concatenate([np.cumsum(co[::-1])[::-1], [0.0]])
    delta = np.zeros(kmax + 1)
    for t in range(1, kmax + 1):
        upto = min(t - 1, J)
        inner = float(np.dot(co[:upto], delta[t - upto : t][::-1])) if upto else 0.0
        outside = tail_from[min(t - 1, J)]
        delta[t] = m2 * (inner + M * outside)
    return delta


def tau_arch_bound(a: float, coeffs, m2: float, kmax: int) -> np.ndarray:
    """``tau[k]`` bounds for ``X = (Y^2 - E Y^2) / (2M)``, ``k = 1..kmax``.

    The sup over later indices is taken from the computed range; it is exact
    once ``kmax`` exceeds the coefficient support, because with finite
    support and ``m2 * sum a_j < 1`` later distances never exceed the
    running maximum over the last support-length lags.
    """
    co = as_coefficients(coeffs).values
    J = co.size
    K = kmax + J + 1
    delta = arch_coupling_distances(a, co, m2, K)
    M = a / (1.0 - float(co.sum()))
    suffix = np.maximum.accumulate(delta[::-1])[::-1]
    out = np.zeros(kmax + 1)
    out[1:] = suffix[1 : kmax + 1] / (2.0 * M)
    return out


# -- finite Markov chains ------------------------------------------------------


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    w, v = np.linalg.eig(P.T)
    idx = int(np.argmin(np.abs(w - 1.0)))
    pi = np.real(v[:, idx])
    pi = np.abs(pi) / np.abs(pi).sum()
    return pi


def beta_finite_chain(P: np.ndarray, kmax: int, pi: np.ndarray | None = None) -> np.ndarray:
    """Exact ``beta(k) = sum_x pi(x) TV(P^k(x, .), pi)`` for ``k = 0..kmax``."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise InvalidInputError("transition matrix must be square")
    if not np.allclose(P.sum(axis=1), 1.0):
        raise InvalidInputError("transition rows must sum to one")
    pi = stationary_distribution(P) if pi is None else np.asarray(pi, dtype=float)
    out = np.empty(kmax + 1)
    Pk = np.eye(P.shape[0])
    for k in range(kmax + 1):
        out[k] = float(pi @ (0.5 * np.abs(Pk - pi[None, :]).sum(axis=1)))
        Pk = Pk @ P
    return out
