"""Constant ledger derived from ``(c, gamma1, gamma2)``.

The derived constants steer the block construction and the Laplace
envelopes.  ``C1..C4`` and ``eta`` only have existence statements behind
them; ``C1`` gets the smallest value the truncation argument allows and the
others default to 1, flagged as uncalibrated.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace

from .errors import InvalidParameterError, UnsupportedRegimeError
from .tail_models import GammaTriple, compose_gamma

UNCALIBRATED_DEFAULT = 1.0


@dataclass(frozen=True)
class ConstantLedger:
    c: float
    gamma1: float
    gamma2: float
    gamma: float
    c0: float
    c1: float
    c2: float
    c3: float
    kappa: float
    c4: float
    mu: float
    nu: float
    zeta: float
    C1: float
    C2: float = UNCALIBRATED_DEFAULT
    C3: float = UNCALIBRATED_DEFAULT
    C4: float = UNCALIBRATED_DEFAULT
    eta: float = UNCALIBRATED_DEFAULT
    uncalibrated: tuple = ("C2", "C3", "C4", "eta")

    @property
    def gammas(self) -> GammaTriple:
        return GammaTriple(self.gamma1, self.gamma2, self.gamma)

    def with_overrides(self, **overrides) -> "ConstantLedger":
        """Replace configurable constants; overridden names lose the uncalibrated flag."""
        allowed = {"C1", "C2", "C3", "C4", "eta"}
        bad = set(overrides) - allowed
        if bad:
            raise InvalidParameterError(f"only {sorted(allowed)} can be overridden, got {sorted(bad)}")
        for k, v in overrides.items():
            if not (v > 0 and math.isfinite(v)):
                raise InvalidParameterError(f"{k} must be positive and finite")
        left = tuple(n for n in self.uncalibrated if n not in overrides)
        return replace(self, uncalibrated=left, **overrides)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["uncalibrated"] = list(self.uncalibrated)
        for k in ("c", "gamma2"):
            if math.isinf(d[k]):
                d[k] = "inf"
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def c1_lower_bounds(gamma2: float, gamma: float, gamma1: float, zeta: float) -> tuple[float, float]:
    """The two constraints on ``C1``: the large-deviation regime and the trivial regime."""
    trunc = 0.0 if math.isinf(gamma2) else (2.0 / gamma2) ** (1.0 / gamma)
    return trunc, (4.0 * zeta) ** gamma1


def gap_ratio_c0(gamma: float) -> float:
    """``c0``, the Cantor gap ratio; it depends on ``gamma`` alone."""
    if not 0 < gamma < 1:
        raise UnsupportedRegimeError(f"gamma = {gamma:.6g} must lie in (0, 1)")
    return (2.0 ** ((1.0 - gamma) / gamma) - 1.0) / (2.0 * (2.0 ** (1.0 / gamma) - 1.0))


def derive_constants(c: float, gamma: GammaTriple, **overrides) -> ConstantLedger:
    # c = inf is the independent case
    if not c > 0:
        raise InvalidParameterError("rate constant c must be positive")
    if not gamma.below_one:
        raise UnsupportedRegimeError(
            f"composed exponent gamma = {gamma.gamma:.6g} must be < 1 "
            "(1/gamma = 1/gamma1 + 1/gamma2)"
        )
    g, g1, g2 = gamma.gamma, gamma.gamma1, gamma.gamma2
    inv_g2 = 0.0 if math.isinf(g2) else 1.0 / g2

    c0 = gap_ratio_c0(g)
    c1 = min(c ** (1.0 / g1) * c0 / 4.0, 2.0 ** (-1.0 / g))
    c2 = 2.0 ** (-(1.0 + 2.0 * g1 / g)) * c1**g1
    c3 = 2.0 ** (-g1 / g)
    kappa = min(c2, c3)

    log_mu = (2.0 / (1.0 - g)) * math.log(2.0 * max(2.0, 4.0 / c0) / (1.0 - g))
    if log_mu > math.log(1.7e308):
        raise OverflowError(f"mu overflows double precision (log mu = {log_mu:.1f})")
    mu = (2.0 * max(2.0, 4.0 / c0) / (1.0 - g)) ** (2.0 / (1.0 - g))
    c4 = 2.0 ** (g1 / g) * 3.0 ** (g1 * inv_g2) * c0 ** (-g1 * inv_g2)
    r = 2.0 ** ((g - 1.0) * g1 / g)
    nu = (1.0 - r) / (c4 * (3.0 - r) + 1.0 / kappa)
    zeta = max(mu, 0.0 if math.isinf(g2) else (2.0 / g2) ** (1.0 / g1))
    C1 = max(c1_lower_bounds(g2, g, g1, zeta))

    ledger = ConstantLedger(
        c=float(c), gamma1=g1, gamma2=g2, gamma=g,
        c0=c0, c1=c1, c2=c2, c3=c3, kappa=kappa, c4=c4,
        mu=mu, nu=nu, zeta=zeta, C1=C1,
    )
    for name in ("c0", "c1", "c2", "c3", "kappa", "c4", "mu", "nu", "zeta", "C1"):
        v = getattr(ledger, name)
        if not (v > 0 and math.isfinite(v)):
            raise OverflowError(f"ledger value {name} = {v!r} is not a positive finite number")
    if overrides:
        ledger = ledger.with_overrides(**overrides)
    return ledger


def ledger_for(c: float, gamma1, gamma2, **overrides) -> ConstantLedger:
    return derive_constants(c, compose_gamma(gamma1, gamma2), **overrides)
