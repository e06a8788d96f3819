"""Example processes with their analytic mixing and tail profiles.

Each process simulates a batch of independent replicate paths with
``simulate(n, reps, rng)``; the ``gen_*`` helpers wrap a single path with
its metadata.  All emitted observations are centered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidParameterError, NoEnvelopeError
from .mixing import (
    Coefficients,
    MixingProfile,
    as_coefficients,
    beta_finite_chain,
    certify_profile,
    geometric_coefficients,
    stationary_distribution,
    subgeometric_coefficients,
    tau_arch_bound,
    tau_linear_process,
)
from .rng import reserved_stream, stream
from .tail_models import INF, TailModel

CUTOFF_TOL = 1e-12
CERT_GRID = range(1, 65)


@dataclass(frozen=True)
class AnalyticProfile:
    mixing: MixingProfile
    tail: TailModel
    known_bounds: dict = field(default_factory=dict)
    scale: float = 1.0  # emitted values are the raw centered values divided by this


@dataclass(frozen=True)
class ProcessPath:
    values: np.ndarray
    meta: dict


class Process:
    kind = "process"

    def __init__(self):
        self.profile: AnalyticProfile
        self.sup_norm: float | None = None  # declared bound on |X|, if any
        self.burn_in: int = 0

    def params(self) -> dict:
        raise NotImplementedError

    def simulate(self, n: int, reps: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def path(self, n: int, seed: int, stream_id: int = 0) -> ProcessPath:
        if n < 1:
            raise InvalidParameterError("path length must be >= 1")
        vals = self.simulate(n, 1, stream(seed, stream_id))[0]
        meta = {"generator": self.kind, "params": self.params(), "seed": int(seed), "stream": int(stream_id), "burn_in": self.burn_in}
        return ProcessPath(vals, meta)


def _check_size(n: int, reps: int) -> None:
    if n < 1 or reps < 1:
        raise InvalidParameterError("n and reps must be >= 1")


# any gamma1 fits an independent sequence; 1/2 keeps the composed exponent below 1
INDEPENDENT = MixingProfile(INF, 0.5)


class IIDWeibull(Process):
    """Symmetric law with ``P(|X| > t) = exp(1 - t**gamma2)`` for ``t >= 1``."""

    kind = "iid_weibull"

    def __init__(self, gamma2: float):
        super().__init__()
        self.model = TailModel(gamma2)
        if self.model.bounded:
            raise InvalidParameterError("use the Rademacher process for the bounded case")
        self.gamma2 = self.model.gamma2
        self.profile = AnalyticProfile(INDEPENDENT, self.model, {"mean": 0.0, "second_moment": self.model.second_moment()})

    def params(self):
        return {"gamma2": self.gamma2}

    def simulate(self, n, reps, rng):
        _check_size(n, reps)
        u = 1.0 - rng.random((reps, n))  # (0, 1]
        mag = (1.0 - np.log(u)) ** (1.0 / self.gamma2)
        sign = np.where(rng.random((reps, n)) < 0.5, -1.0, 1.0)
        # the signed law is symmetric, so its mean is exactly 0
        return sign * mag


class IIDRademacher(Process):
    kind = "iid_rademacher"

    def __init__(self):
        super().__init__()
        self.sup_norm = 1.0
        self.profile = AnalyticProfile(INDEPENDENT, TailModel(INF), {"mean": 0.0, "variance": 1.0})

    def params(self):
        return {}

    def simulate(self, n, reps, rng):
        _check_size(n, reps)
        return np.where(rng.random((reps, n)) < 0.5, -1.0, 1.0)


# -- coefficient specifications ----------------------------------------------


def coefficients_from_spec(spec, tol: float = CUTOFF_TOL) -> Coefficients:
    """Build coefficients from a list or ``{"type": ..., ...}`` dictionary."""
    if isinstance(spec, Coefficients):
        return spec
    if isinstance(spec, dict):
        kind = spec.get("type")
        if kind == "geometric":
            return geometric_coefficients(float(spec.get("scale", 0.5)), float(spec.get("ratio", 0.5)), tol)
        if kind == "subgeometric":
            return subgeometric_coefficients(
                float(spec["rate"]), float(spec.get("gamma1", 0.5)), float(spec.get("scale", 1.0)), tol
            )
        if kind == "list":
            return as_coefficients(spec["values"])
        raise InvalidParameterError(f"unknown coefficient type {kind!r}")
    return as_coefficients(spec)


def _coeff_spec_json(spec):
    if isinstance(spec, Coefficients):
        return {"type": "list", "values": spec.values.tolist(), "tail": spec.tail}
    if isinstance(spec, dict):
        return spec
    return {"type": "list", "values": [float(x) for x in spec]}


# -- ARCH(inf) -----------------------------------------------------------------


def effective_memory(coeffs: Coefficients, tol: float = CUTOFF_TOL) -> int:
    """Smallest ``J`` with ``sum_{j>J} a_j < tol``."""
    a = np.abs(coeffs.values)
    rem = np.concatenate([np.cumsum(a[::-1])[::-1], [0.0]]) + coeffs.tail
    idx = np.nonzero(rem < tol)[0]
    return int(idx[0]) if idx.size else a.size


class ARCH(Process):
    """``Y_t = sigma_t eta_t``, ``sigma_t^2 = a + sum_j a_j Y_{t-j}^2``, eta uniform on [-1, 1].

    Emits ``X_t = (Y_t^2 - E Y^2) / (2M)`` with ``M = a / (1 - sum a_j)``.
    Here ``a_j`` for ``j >= 1`` is stored at position ``j - 1``.
    """

    kind = "arch"
    M2 = 1.0 / 3.0

    def __init__(self, a: float = 1.0, coeffs=None, burn_in: int | None = None, gamma1: float = 0.5):
        super().__init__()
        # default a_j = 2^{-j-1} for j >= 1, so a_1 = 1/4 and the sum is 1/2
        spec = {"type": "geometric", "scale": 0.25, "ratio": 0.5} if coeffs is None else coeffs
        self.coeff_spec = spec
        co = coefficients_from_spec(spec)
        if a < 0 or np.any(co.values < 0):
            raise InvalidParameterError("ARCH level and coefficients must be nonnegative")
        s = float(co.values.sum() + co.tail)
        if s >= 1:
            raise InvalidParameterError(f"ARCH coefficients sum to {s:g} >= 1")
        if a == 0:
            raise InvalidParameterError("ARCH level a must be positive")
        self.a, self.s = float(a), s
        self.coeffs = co
        self.M = a / (1.0 - s)
        self.EY2 = a * self.M2 / (1.0 - s * self.M2)
        self.memory = max(1, effective_memory(co))
        self.burn_in = 10 * self.memory if burn_in is None else int(burn_in)
        self.window = co.values[: self.memory][::-1].copy()  # oldest lag first
        self.sup_norm = 1.0
        taus = tau_arch_bound(self.a, co.values[: self.memory + 64], self.M2, max(CERT_GRID))
        prof = certify_profile(lambda i: taus[i], gamma1, CERT_GRID)
        self.profile = AnalyticProfile(prof, TailModel(INF), {"M": self.M, "EY2": self.EY2, "mean": 0.0})

    def params(self):
        return {"a": self.a, "coeffs": _coeff_spec_json(self.coeff_spec), "burn_in": self.burn_in}

    def simulate_squares(self, n, reps, rng) -> np.ndarray:
        """Raw ``Y_t^2`` after burn-in, shape ``(reps, n)``."""
        _check_size(n, reps)
        J = self.memory
        total = self.burn_in + n
        y2 = np.zeros((reps, J + total))
        eta = rng.uniform(-1.0, 1.0, size=(reps, total))
        w = self.window
        for t in range(total):
            sig2 = self.a + y2[:, t : t + J] @ w
            y2[:, J + t] = sig2 * eta[:, t] ** 2
        return y2[:, J + self.burn_in :]

    def simulate(self, n, reps, rng):
        return (self.simulate_squares(n, reps, rng) - self.EY2) / (2.0 * self.M)


# -- linear processes ---------------------------------------------------------

LIPSCHITZ_FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "identity": lambda x: x,
    "abs": np.abs,
    "softclip": np.tanh,
}


@dataclass(frozen=True)
class Innovation:
    """I.i.d. law or a finite stationary Markov chain on ``values``."""

    kind: str
    values: np.ndarray
    probs: np.ndarray | None = None
    P: np.ndarray | None = None

    @property
    def stationary(self) -> np.ndarray:
        return self.probs if self.P is None else stationary_distribution(self.P)

    @property
    def l1(self) -> float:
        return float(np.dot(self.stationary, np.abs(self.values)))

    @property
    def l2(self) -> float:
        return float(np.sqrt(np.dot(self.stationary, self.values**2)))

    @property
    def mean(self) -> float:
        return float(np.dot(self.stationary, self.values))

    @property
    def spread(self) -> float:
        return float(self.values.max() - self.values.min())

    def beta(self, kmax: int) -> np.ndarray | None:
        return None if self.P is None else beta_finite_chain(self.P, kmax)

    def sample(self, reps: int, length: int, rng) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(-1.0, 1.0, size=(reps, length))
        if self.P is None:
            idx = np.searchsorted(np.cumsum(self.probs), rng.random((reps, length)), side="right")
            return self.values[np.minimum(idx, self.values.size - 1)]
        cum = np.cumsum(self.P, axis=1)
        pi_cum = np.cumsum(self.stationary)
        u = rng.random((reps, length))
        state = np.minimum(np.searchsorted(pi_cum, u[:, 0], side="right"), self.values.size - 1)
        out = np.empty((reps, length))
        out[:, 0] = self.values[state]
        for t in range(1, length):
            state = np.minimum((u[:, t : t + 1] >= cum[state]).sum(axis=1), self.values.size - 1)
            out[:, t] = self.values[state]
        return out


def innovation_from_spec(spec) -> Innovation:
    if isinstance(spec, Innovation):
        return spec
    if isinstance(spec, str):
        spec = {"type": spec}
    kind = spec.get("type")
    if kind == "bernoulli":
        p = float(spec.get("p", 0.5))
        return Innovation(kind, np.array([0.0, 1.0]), np.array([1 - p, p]))
    if kind == "rademacher":
        return Innovation(kind, np.array([-1.0, 1.0]), np.array([0.5, 0.5]))
    if kind == "uniform":
        # l1 = 1/2, l2 = 1/sqrt(3) for the uniform law on [-1, 1]
        return _UniformInnovation()
    if kind == "markov":
        P = np.asarray(spec["P"], dtype=float)
        vals = np.asarray(spec["values"], dtype=float)
        if P.shape != (vals.size, vals.size) or not np.allclose(P.sum(axis=1), 1.0):
            raise InvalidParameterError("markov innovation needs a stochastic matrix matching its values")
        return Innovation(kind, vals, None, P)
    raise InvalidParameterError(f"unknown innovation type {kind!r}")


class _UniformInnovation(Innovation):
    def __init__(self):
        super().__init__("uniform", np.array([-1.0, 1.0]), np.array([0.5, 0.5]))

    l1 = property(lambda self: 0.5)
    l2 = property(lambda self: 1.0 / math.sqrt(3.0))
    mean = property(lambda self: 0.0)


class LinearProcess(Process):
    """``X_n = f(sum_{j<J} a_j xi_{n-j}) - E f``, rescaled to ``|X| <= 1``."""

    kind = "linear"

    def __init__(self, f: str = "identity", coeffs=None, innovation="bernoulli", gamma1: float = 0.5,
                 prerun: int = 10**6, seed: int = 0):
        super().__init__()
        if f not in LIPSCHITZ_FUNCTIONS:
            raise InvalidParameterError(f"f must be one of {sorted(LIPSCHITZ_FUNCTIONS)}")
        spec = {"type": "geometric", "scale": 0.5, "ratio": 0.5} if coeffs is None else coeffs
        self.f_name, self.coeff_spec = f, spec
        self.f = LIPSCHITZ_FUNCTIONS[f]
        co = coefficients_from_spec(spec)
        if co.tail >= CUTOFF_TOL:
            raise NoEnvelopeError(f"coefficient cutoff not certified: dropped mass {co.tail:g} >= {CUTOFF_TOL:g}")
        self.coeffs = co
        self.J = max(1, co.values.size)
        self.innov = innovation_from_spec(innovation)
        self.innovation_spec = innovation if not isinstance(innovation, Innovation) else innovation.kind
        # |f(s) - E f(s')| <= E|s - s'| <= sum |a_j| * spread
        diam = co.abs_sum * self.innov.spread
        self.scale = max(1.0, diam)
        self.sup_norm = min(1.0, diam / self.scale)
        self.prerun, self.seed = int(prerun), int(seed)
        if f == "identity":
            self.mean = float(co.values.sum()) * self.innov.mean
        else:
            self.mean = self._prerun_mean()
        beta = self.innov.beta(max(CERT_GRID) + 1)
        if np.all(co.values == 0):
            prof = MixingProfile(INF, gamma1)
        else:
            l1, l2 = self.innov.l1 / self.scale, self.innov.l2 / self.scale
            prof = certify_profile(lambda i: tau_linear_process(co, beta, l1, l2, i), gamma1, CERT_GRID)
        self.burn_in = 0
        self.profile = AnalyticProfile(prof, TailModel(INF), {"mean_f": self.mean}, self.scale)

    def params(self):
        return {"f": self.f_name, "coeffs": _coeff_spec_json(self.coeff_spec),
                "innovation": self.innovation_spec, "prerun": self.prerun}

    def _raw(self, n, reps, rng):
        xi = self.innov.sample(reps, n + self.J - 1, rng)
        win = np.lib.stride_tricks.sliding_window_view(xi, self.J, axis=1)
        # win[:, t, k] = xi[t + k]; coefficient a_j multiplies xi_{t+J-1-j}
        return self.f(win @ self.coeffs.values[::-1])

    def _prerun_mean(self) -> float:
        rng = reserved_stream(self.seed, 1)
        reps = 1000
        length = max(1, self.prerun // reps)
        return float(self._raw(length, reps, rng).mean())

    def simulate(self, n, reps, rng):
        _check_size(n, reps)
        return (self._raw(n, reps, rng) - self.mean) / self.scale


# -- regenerative countdown chain --------------------------------------------


class RegenerativeChain(Process):
    """Countdown chain with an atom at 0.

    At the atom an excursion length ``L`` with ``P(L > k) = exp(-delta k^gamma1)``
    is drawn together with a fresh sign ``s``; the chain then runs
    ``L-1, L-2, ..., 0``.  ``X = s * amplitude`` off the atom and 0 on it,
    which has stationary mean exactly 0.
    """

    kind = "regenerative"
    TRUNC = 1e-16

    def __init__(self, gamma1: float = 0.5, delta: float = 1.0, amplitude: float = 0.5):
        super().__init__()
        if not (gamma1 > 0 and delta > 0):
            raise InvalidParameterError("gamma1 and delta must be positive")
        if not 0 <= amplitude <= 1:
            raise InvalidParameterError("amplitude must lie in [0, 1]")
        self.gamma1, self.delta, self.amp = float(gamma1), float(delta), float(amplitude)
        self.K = math.ceil((math.log(1.0 / self.TRUNC) / delta) ** (1.0 / gamma1)) + 1
        k = np.arange(self.K + 1, dtype=float)
        self.surv = np.exp(-delta * k**gamma1)  # P(L > k)
        self.mean_L = float(self.surv.sum())
        self.pi = self.surv / self.mean_L
        self.sup_norm = self.amp
        if self.amp == 0:
            prof = MixingProfile(INF, gamma1)
        else:
            b = self.beta(max(CERT_GRID))
            prof = certify_profile(lambda i: 2.0 * self.amp * b[i], gamma1, CERT_GRID)
        self.profile = AnalyticProfile(prof, TailModel(INF), {"mean": 0.0, "mean_return_time": self.mean_L})

    def params(self):
        return {"gamma1": self.gamma1, "delta": self.delta, "amplitude": self.amp}

    def excursion_length(self, u: np.ndarray) -> np.ndarray:
        """Inverse transform: ``ceil((-log U / delta)^(1/gamma1))``, at least 1."""
        L = np.ceil((-np.log(u) / self.delta) ** (1.0 / self.gamma1))
        return np.maximum(L, 1.0).astype(np.int64)

    def beta(self, kmax: int) -> np.ndarray:
        """Absolute regularity coefficients of the stationary chain, ``k = 0..kmax``.

        From state ``k >= 1`` the chain moves deterministically for ``k`` steps,
        then restarts from the atom; both laws are sign-symmetric, so only the
        countdown marginal matters after a visit to the atom.
        """
        K = self.K
        pL = self.surv[:-1] - self.surv[1:]  # P(L = l) at index l - 1
        pi = self.pi
        # rows: law of the countdown state m steps after leaving the atom
        laws = np.zeros((kmax + 1, K + 1))
        cur = np.zeros(K + 1)
        cur[0] = 1.0
        for m in range(kmax + 1):
            laws[m] = cur
            nxt = np.zeros(K + 1)
            nxt[:-1] = cur[1:]
            nxt[:K] += cur[0] * pL
            cur = nxt
        tv_atom = 0.5 * np.abs(laws - pi[None, :]).sum(axis=1) + self.surv[-1]
        out = np.empty(kmax + 1)
        for n in range(kmax + 1):
            restarted = float(np.dot(pi[: n + 1], tv_atom[n - np.arange(n + 1)]))
            # still on the first excursion: point mass at (k - n, s)
            k = np.arange(n + 1, K + 1)
            pending = float(np.dot(pi[k], 1.0 - pi[k - n] / 2.0))
            out[n] = min(1.0, restarted + pending + self.surv[-1])
        return out

    def simulate_states(self, n, reps, rng):
        _check_size(n, reps)
        u0 = rng.random(reps)
        k = np.minimum(np.searchsorted(np.cumsum(self.pi), u0, side="right"), self.K)
        sign = np.where(rng.random(reps) < 0.5, -1.0, 1.0)
        states = np.empty((reps, n), dtype=np.int64)
        signs = np.empty((reps, n))
        for t in range(n):
            states[:, t] = k
            signs[:, t] = sign
            u = 1.0 - rng.random(reps)
            s_new = np.where(rng.random(reps) < 0.5, -1.0, 1.0)
            at = k == 0
            k = np.where(at, self.excursion_length(u) - 1, k - 1)
            sign = np.where(at, s_new, sign)
        return states, signs

    def simulate(self, n, reps, rng):
        states, signs = self.simulate_states(n, reps, rng)
        return np.where(states > 0, signs * self.amp, 0.0)


# -- registry -----------------------------------------------------------------


def make_process(spec) -> Process:
    """Build a process from ``{"kind": ..., **params}``."""
    if isinstance(spec, Process):
        return spec
    if not isinstance(spec, dict) or "kind" not in spec:
        raise InvalidParameterError("process spec must be a dict with a 'kind' entry")
    params = {k: v for k, v in spec.items() if k != "kind"}
    kind = spec["kind"]
    try:
        if kind == "iid_weibull":
            return IIDWeibull(**params)
        if kind == "iid_rademacher":
            return IIDRademacher(**params)
        if kind == "arch":
            return ARCH(**params)
        if kind == "linear":
            return LinearProcess(**params)
        if kind == "regenerative":
            return RegenerativeChain(**params)
    except TypeError as exc:
        raise InvalidParameterError(f"bad parameters for {kind}: {exc}") from exc
    raise InvalidParameterError(f"unknown process kind {kind!r}")


def gen_iid_weibull(gamma2: float, n: int, seed: int) -> tuple[ProcessPath, AnalyticProfile]:
    p = IIDWeibull(gamma2)
    return p.path(n, seed), p.profile


def gen_arch(a: float, coeffs, n: int, seed: int, burn_in: int | None = None) -> tuple[ProcessPath, AnalyticProfile]:
    p = ARCH(a, coeffs, burn_in)
    return p.path(n, seed), p.profile


def gen_linear_process(f: str, coeffs, innovation, n: int, seed: int, burn_in: int = 0,
                       prerun: int = 10**6) -> tuple[ProcessPath, AnalyticProfile]:
    # the moving average needs no burn-in beyond its window; the argument is accepted for symmetry
    p = LinearProcess(f, coeffs, innovation, prerun=prerun, seed=seed)
    return p.path(n, seed), p.profile


def gen_regenerative_chain(gamma1: float, delta: float, amplitude: float, n: int, seed: int) -> tuple[ProcessPath, AnalyticProfile]:
    p = RegenerativeChain(gamma1, delta, amplitude)
    return p.path(n, seed), p.profile
