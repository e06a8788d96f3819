"""Closed-form tail bounds, Laplace envelopes and the decoupling inequality.

Every evaluator returns a :class:`BoundReport` holding the raw addends, the
clamped probability bound and a dictionary of hypothesis flags.  Evaluators
compute in log space where a term can overflow.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constants import ConstantLedger
from .errors import HypothesisViolationError, InvalidParameterError, ResourceLimitError
from .tail_models import GammaTriple, TailModel, h_survival


@dataclass(frozen=True)
class BoundReport:
    value: float
    terms: list = field(default_factory=list)  # (name, raw value) pairs
    validity: dict = field(default_factory=dict)

    @property
    def raw(self) -> float:
        return float(sum(v for _, v in self.terms))

    def to_dict(self) -> dict:
        return {"value": self.value, "terms": {k: v for k, v in self.terms}, "validity": self.validity}


def _exp(x: float) -> float:
    # exp clipped against overflow; callers only feed it exponents of probabilities
    return math.exp(min(x, 700.0))


def _report(terms: list, validity: dict | None = None) -> BoundReport:
    for name, v in terms:
        if not v >= 0:
            raise AssertionError(f"negative or NaN term {name}={v}")
    total = sum(v for _, v in terms)
    return BoundReport(min(1.0, total), terms, validity or {})


def _positive(name: str, v: float, allow_zero: bool = False) -> None:
    ok = v >= 0 if allow_zero else v > 0
    if not (ok and math.isfinite(v)):
        raise InvalidParameterError(f"{name} must be {'nonnegative' if allow_zero else 'positive'} and finite, got {v!r}")


def bernstein_bound(y: float, V_n: float, M: float) -> BoundReport:
    _positive("y", y, allow_zero=True)
    _positive("V_n", V_n)
    _positive("M", M, allow_zero=True)
    return _report([("bernstein", math.exp(-(y * y) / (2.0 * V_n + 2.0 * y * M)))])


def semiexp_iid_bound(y: float, V_n: float, M: float, gamma: float, c1: float, c2: float, n: int) -> BoundReport:
    _positive("y", y, allow_zero=True)
    for name, v in (("V_n", V_n), ("M", M), ("c1", c1), ("c2", c2)):
        _positive(name, v)
    if not 0 < gamma < 1:
        raise InvalidParameterError("gamma must lie in (0, 1)")
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    return _report(
        [
            ("gaussian", 2.0 * math.exp(-c1 * y * y / V_n)),
            ("weibull", n * math.exp(-c2 * (y / M) ** gamma)),
        ]
    )


def fuk_nagaev_bound(lam: float, n: int, V: float, r: float, gamma: float, c: float, C: float) -> BoundReport:
    _positive("lambda", lam)
    _positive("V", V)
    if r < 1:
        raise InvalidParameterError("r must be >= 1")
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    first = 4.0 * math.exp(-(r / 2.0) * math.log1p(lam * lam / (r * n * V)))
    second = 4.0 * C * n / lam * math.exp(-c * (lam / r) ** gamma)
    return _report([("polynomial", first), ("exponential", second)])


def fuk_nagaev_variant(lam: float, n: int, V: float, gamma: float, c: float, C: float) -> BoundReport:
    """Fuk-Nagaev bound with ``r = lambda^2/(nV)``, valid for ``lambda >= sqrt(nV)``."""
    _positive("lambda", lam)
    _positive("V", V)
    ok = lam * lam >= n * V * (1 - 1e-12)
    first = 4.0 * math.exp(-lam * lam * math.log(2.0) / (2.0 * n * V))
    second = 4.0 * C * n / lam * math.exp(-c * (n * V / lam) ** gamma)
    return _report([("polynomial", first), ("exponential", second)], {"lambda_ge_sqrt_nV": ok})


def _check_gamma(gamma: GammaTriple) -> None:
    if not gamma.below_one:
        raise HypothesisViolationError(
            f"gamma = {gamma.gamma:.6g} must be < 1 (1/gamma = 1/gamma1 + 1/gamma2)"
        )


def theorem1_bound(x: float, n: int, V: float, ledger: ConstantLedger, gamma: GammaTriple | None = None) -> BoundReport:
    """Three-term bound on ``P(sup_{j<=n} |S_j| >= x)``."""
    gamma = gamma or ledger.gammas
    _check_gamma(gamma)
    if n < 4:
        raise HypothesisViolationError("n must be >= 4")
    _positive("x", x)
    _positive("V", V, allow_zero=True)
    g = gamma.gamma
    L = max(math.log(x), 1.0)
    t1 = n * math.exp(-(x**g) / ledger.C1)
    t2 = math.exp(-(x * x) / (ledger.C2 * (1.0 + n * V)))
    inner = x ** (g * (1.0 - g)) / (ledger.C4 * L**g)
    log_t3 = -(x * x / (ledger.C3 * n)) * _exp(inner)
    t3 = math.exp(max(log_t3, -745.0))
    return _report(
        [("weibull", t1), ("gaussian", t2), ("moderate", t3)],
        {"n_ge_4": True, "gamma_lt_1": True, "log_x_ge_1": x >= math.e},
    )


def boro_bound(lam: float, n: int, V: float, gamma: float, C: float, C1p: float, C2p: float, eta: float) -> BoundReport:
    if n < 4:
        raise HypothesisViolationError("n must be >= 4")
    _positive("lambda", lam)
    if not 0 < gamma < 1:
        raise InvalidParameterError("gamma must lie in (0, 1)")
    valid = lam >= C * math.log(n) ** eta
    t1 = (n + 1) * math.exp(-(lam**gamma) / C1p)
    t2 = math.exp(-(lam * lam) / (C2p + C2p * n * V))
    return _report([("weibull", t1), ("gaussian", t2)], {"lambda_above_threshold": valid})


def adamczak_bound(lam: float, n: int, sigma2: float, C: float) -> BoundReport:
    if n < 2:
        raise InvalidParameterError("n must be >= 2")
    _positive("sigma2", sigma2)
    _positive("C", C)
    _positive("lambda", lam, allow_zero=True)
    rate = min(lam * lam / (n * sigma2), lam / math.log(n))
    return _report([("adamczak", C * math.exp(-rate / C))])


def truncation_threshold(model: TailModel) -> float:
    return 0.0 if model.bounded else (2.0 / model.gamma2) ** (1.0 / model.gamma2)


def truncation_residual_bound(lam: float, n: int, M: float, model: TailModel) -> BoundReport:
    _positive("lambda", lam)
    _positive("M", M)
    thr = truncation_threshold(model)
    if M < thr * (1 - 1e-12):
        raise HypothesisViolationError(f"M = {M:g} is below (2/gamma2)^(1/gamma2) = {thr:g}")
    return _report([("residual", 2.0 * n / lam * M * float(h_survival(model, M)))])


def mgf_envelope_g(x):
    """``g(x) = (e^x - x - 1)/x^2`` with a series near 0."""
    x_arr = np.asarray(x, dtype=float)
    small = np.abs(x_arr) < 1e-4
    safe = np.where(small, 1.0, x_arr)
    direct = np.expm1(safe) - safe
    direct = direct / (safe * safe)
    series = 0.5 + x_arr / 6.0 + x_arr**2 / 24.0 + x_arr**3 / 120.0
    out = np.where(small, series, direct)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class LaplaceEnvelope:
    """``log E exp(tZ) <= (sigma t)^2 / (1 - c t)`` on ``[0, 1/c)``."""

    sigma: float
    c: float

    def __post_init__(self):
        _positive("sigma", self.sigma, allow_zero=True)
        _positive("c", self.c, allow_zero=True)

    @property
    def t_max(self) -> float:
        return math.inf if self.c == 0 else 1.0 / self.c

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise InvalidParameterError("envelope is defined for t >= 0")
        with np.errstate(divide="ignore"):
            out = np.where(self.c * t < 1.0, (self.sigma * t) ** 2 / (1.0 - self.c * t), np.inf)
        return out if out.ndim else float(out)


def aggregate_laplace(envelopes: Sequence[LaplaceEnvelope]) -> LaplaceEnvelope:
    envs = list(envelopes)
    if not envs:
        raise InvalidParameterError("need at least one envelope")
    return LaplaceEnvelope(math.fsum(e.sigma for e in envs), math.fsum(e.c for e in envs))


def holder_split(env0: LaplaceEnvelope, env1: LaplaceEnvelope, t: float, u: float) -> float:
    """Hoelder bound ``u g1(t/u) + (1-u) g0(t/(1-u))`` for the sum of two variables."""
    if not 0 < u < 1:
        raise InvalidParameterError("u must lie in (0, 1)")
    return u * env1(t / u) + (1 - u) * env0(t / (1 - u))


def decoupling_gap_bound(t: float, M: float, p: int, taus: Sequence[float]) -> float:
    _positive("M", M, allow_zero=True)
    if p < 1:
        raise InvalidParameterError("p must be >= 1")
    taus = [float(x) for x in taus]
    if len(taus) != p - 1:
        raise InvalidParameterError(f"need p-1 = {p - 1} tau values, got {len(taus)}")
    if any(x < 0 for x in taus):
        raise InvalidParameterError("tau values must be nonnegative")
    if t == 0 or not taus:
        return 0.0
    return abs(t) * math.exp(abs(t) * M * p) * math.fsum(taus)


@dataclass(frozen=True)
class FiniteChain:
    """Finite Markov chain with initial law ``init`` and observation ``f(state)``."""

    P: np.ndarray
    f: np.ndarray
    init: np.ndarray | None = None

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or np.any(P < 0):
            raise InvalidParameterError("P must be a square nonnegative matrix")
        if not np.allclose(P.sum(axis=1), 1.0, atol=1e-12):
            raise InvalidParameterError("rows of P must sum to 1")
        f = np.asarray(self.f, dtype=float)
        if f.shape != (P.shape[0],):
            raise InvalidParameterError("f must give one value per state")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "f", f)
        if self.init is None:
            from .mixing import stationary_distribution

            object.__setattr__(self, "init", stationary_distribution(P))
        else:
            object.__setattr__(self, "init", np.asarray(self.init, dtype=float))


def _enumerate_paths(chain: FiniteChain, p: int):
    S = chain.P.shape[0]
    paths = np.array(list(itertools.product(range(S), repeat=p)), dtype=np.int64).reshape(-1, p)
    prob = chain.init[paths[:, 0]].copy()
    for i in range(1, p):
        prob *= chain.P[paths[:, i - 1], paths[:, i]]
    return paths, prob


def _w1(values: np.ndarray, p: np.ndarray, q: np.ndarray) -> float:
    """Wasserstein-1 distance of two laws on the sorted support ``values``."""
    if values.size < 2:
        return 0.0
    diff = np.abs(np.cumsum(p - q))[:-1]
    return float(np.dot(diff, np.diff(values)))


def exact_tau_sequence(chain: FiniteChain, p: int) -> list[float]:
    """``tau(sigma(Y_1..Y_{i-1}), Y_i)`` for ``i = 2..p`` by enumeration."""
    paths, prob = _enumerate_paths(chain, p)
    Y = chain.f[paths]
    support = np.unique(chain.f)
    out = []
    for i in range(1, p):
        _, hist = np.unique(Y[:, :i], axis=0, return_inverse=True)
        hist = hist.reshape(-1)
        val = np.searchsorted(support, Y[:, i])
        joint = np.zeros((hist.max() + 1, support.size))
        np.add.at(joint, (hist, val), prob)
        marg = joint.sum(axis=0)
        h_mass = joint.sum(axis=1)
        tau = 0.0
        for h in range(joint.shape[0]):
            if h_mass[h] > 0:
                tau += h_mass[h] * _w1(support, joint[h] / h_mass[h], marg)
        out.append(tau)
    return out


def verify_decoupling_exact(chain: FiniteChain, p: int, t: float, max_paths: int = 2_000_000) -> tuple[float, float]:
    """Exact ``|E e^{tS} - prod E e^{tY_i}|`` and the decoupling bound."""
    S = chain.P.shape[0]
    if S > 6 or p > 8 or S**p > max_paths:
        raise ResourceLimitError(f"enumeration of {S}^{p} paths is not supported (limit: 6 states, p <= 8)")
    if p < 1:
        raise InvalidParameterError("p must be >= 1")
    paths, prob = _enumerate_paths(chain, p)
    Y = chain.f[paths]
    joint = float(np.dot(prob, np.exp(t * Y.sum(axis=1))))
    prod = 1.0
    for i in range(p):
        prod *= float(np.dot(prob, np.exp(t * Y[:, i])))
    lhs = abs(joint - prod)
    M = float(np.max(np.abs(chain.f)))
    rhs = decoupling_gap_bound(t, M, p, exact_tau_sequence(chain, p))
    return lhs, rhs


def prop1_t_max(A: float, ell: int, ledger: ConstantLedger) -> float:
    g, g1 = ledger.gamma, ledger.gamma1
    return ledger.kappa * min(A ** (g - 1.0), 2.0**ell / A) ** (g1 / g)


def prop1_laplace_envelope(A: int, ell: int, t: float, v2: float, ledger: ConstantLedger) -> float:
    """Log-Laplace envelope for the sum over the Cantor set at depth ``ell``."""
    g, g1 = ledger.gamma, ledger.gamma1
    if A * 2.0 ** (-ell) < max(1.0, 2.0 / ledger.c0) * (1 - 1e-12):
        raise HypothesisViolationError("need A*2^-ell >= max(1, 2/c0)")
    tmax = prop1_t_max(A, ell, ledger)
    if not 0 < t <= tmax * (1 + 1e-12):
        raise HypothesisViolationError(f"t must lie in (0, {tmax:g}]")
    _positive("v2", v2, allow_zero=True)
    coupling = ell * (2.0 * A) ** (1.0 + g1 / g) + 4.0 * A**g * (2.0 * A) ** (2.0 * g1 / g)
    decay = math.exp(-0.5 * (ledger.c1 * A / 2.0**ell) ** g1)
    return t * t * v2 * A + t * t * coupling * decay


def prop2_t_max(A: float, ledger: ConstantLedger) -> float:
    g, g1 = ledger.gamma, ledger.gamma1
    return ledger.nu * A ** (g1 * (g - 1.0) / g)


def prop2_laplace_envelope(A: float, t: float, v2: float, ledger: ConstantLedger, nu1: float, nu2: float) -> float:
    g, g1 = ledger.gamma, ledger.gamma1
    if A < ledger.mu * (1 - 1e-12):
        raise HypothesisViolationError(f"A = {A:g} must be >= mu = {ledger.mu:g}")
    tmax = prop2_t_max(A, ledger)
    if not 0 < t < tmax:
        raise HypothesisViolationError(f"t must lie in (0, {tmax:g})")
    _positive("nu1", nu1, allow_zero=True)
    _positive("nu2", nu2, allow_zero=True)
    VA = 50.0 * v2 + nu1 * math.exp(-nu2 * A ** (g1 * (1.0 - g)) * math.log(A) ** (-g))
    return A * VA * t * t / (1.0 - t / ledger.nu * A ** (g1 * (1.0 - g) / g))
