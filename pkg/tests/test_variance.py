import json
import math

import numpy as np
import pytest
from scipy import integrate, optimize

from weakdep.errors import InvalidInputError, InvalidParameterError
from weakdep.mixing import MixingProfile
from weakdep.processes import ARCH
from weakdep.rng import stream
from weakdep.tail_models import INF, TailModel
from weakdep.variance import (
    V_integral_bound,
    cantor_index_sets,
    covariance_lag_bound,
    default_M_grid,
    estimate_sigma_n2,
    estimate_V,
    estimate_v2,
    variance_report,
)


def within(est, target, k=3.0):
    return abs(est.value - target) <= k * est.se


@pytest.fixture(scope="module")
def rademacher():
    return np.where(stream(20, 0).random((4000, 256)) < 0.5, -1.0, 1.0)


@pytest.fixture(scope="module")
def arch_paths():
    return ARCH().simulate(256, 4000, stream(21, 0))


class TestEstimateV:
    def test_iid(self, rademacher):
        est = estimate_V(rademacher, [1.0], 0)
        assert within(est, 1.0)

    def test_constant(self):
        assert estimate_V(np.ones((50, 64)), [1.0], 4).value == 0.0

    def test_arch_stable(self, arch_paths):
        p = ARCH()
        a = estimate_V(arch_paths[:2000], [1.0], 30, model=p.profile.tail, profile=p.profile.mixing)
        b = estimate_V(arch_paths, [1.0], 30, model=p.profile.tail, profile=p.profile.mixing)
        assert math.isfinite(a.value) and a.value > 0
        assert abs(a.value - b.value) <= 3 * math.hypot(a.se, b.se)

    def test_order_invariant(self, arch_paths):
        perm = np.random.default_rng(0).permutation(arch_paths.shape[0])
        a = estimate_V(arch_paths, [1.0], 10)
        b = estimate_V(arch_paths[perm], [1.0], 10)
        assert a == b

    def test_errors(self):
        with pytest.raises(InvalidInputError):
            estimate_V(np.ones((1, 10)), [1.0], 1)
        with pytest.raises(InvalidInputError):
            estimate_V(np.ones(10), [1.0], 1)
        with pytest.raises(InvalidParameterError):
            estimate_V(np.ones((4, 10)), [], 1)
        with pytest.raises(InvalidInputError):
            estimate_V(np.array([[np.nan, 1.0], [1.0, 1.0]]), [1.0], 0)


class TestEstimateV2:
    def test_iid(self, rademacher):
        assert within(estimate_v2(rademacher, T_grid=[1.0]), 1.0)

    def test_constant(self):
        assert estimate_v2(np.ones((50, 64)), T_grid=[1.0]).value == 0.0

    def test_order_invariant(self, arch_paths):
        perm = np.random.default_rng(1).permutation(arch_paths.shape[0])
        assert estimate_v2(arch_paths, T_grid=[1.0]) == estimate_v2(arch_paths[perm], T_grid=[1.0])

    def test_block_sizes(self):
        with pytest.raises(InvalidParameterError):
            estimate_v2(np.ones((10, 16)), block_sizes=(0,))

    def test_cantor_sets(self):
        sets = cantor_index_sets(256)
        assert sets and all(s.min() >= 0 and s.max() < 256 for s in sets)


class TestIntegralBound:
    def test_independent(self):
        m = TailModel(1.0)
        assert V_integral_bound(m, MixingProfile(INF, 0.5)) == pytest.approx(m.second_moment())
        assert m.second_moment() == pytest.approx(5.0)

    def test_bounded(self):
        prof = MixingProfile(0.7, 0.5)
        taus = [prof.tau(k) for k in range(1, 5000)]
        assert V_integral_bound(TailModel(INF), prof) <= 1 + 2 * sum(taus) + 1e-9

    def test_double_quadrature_oracle(self):
        # gamma2 = 1: int_0^x Q = x (2 - log x); 4 sum_k int_0^{tau_k/2} Q(G(v)) dv
        def G(v):
            return optimize.brentq(lambda x: x * (2 - math.log(x)) - v, 1e-300, 1.0, xtol=1e-300, rtol=1e-15)

        total, k = 5.0, 1
        while True:
            y = math.exp(-math.sqrt(k)) / 2
            term, _ = integrate.quad(lambda v: 1 - math.log(G(v)), 0, y, epsabs=0, epsrel=1e-11, limit=200)
            total += 4 * term
            if term < 1e-16:
                break
            k += 1
        got = V_integral_bound(TailModel(1.0), MixingProfile(1.0, 0.5))
        assert got == pytest.approx(total, rel=1e-6)
        assert got >= total * (1 - 1e-9)

    def test_lag_bound(self):
        assert covariance_lag_bound(TailModel(1.0), MixingProfile(1e6, 1.0), 3) == 0.0
        prof = MixingProfile(math.log(5), 1.0)  # tau(1) = 0.2
        assert covariance_lag_bound(TailModel(INF), prof, 1) == pytest.approx(0.2)
        with pytest.raises(InvalidParameterError):
            covariance_lag_bound(TailModel(INF), prof, 0)

    def test_empirical_covariances(self, arch_paths):
        p = ARCH()
        Z = arch_paths - arch_paths.mean(axis=0)
        i = 100
        for k in range(1, 6):
            prod = Z[:, i] * Z[:, i + k]
            se = prod.std(ddof=1) / math.sqrt(prod.size)
            bound = covariance_lag_bound(p.profile.tail, p.profile.mixing, k)
            assert abs(prod.mean()) <= bound + 3 * se

    def test_M_grid(self):
        assert default_M_grid(TailModel(INF)) == [1.0]
        g = default_M_grid(TailModel(1.0))
        assert g[0] == 1.0 and g[-1] == pytest.approx(1 - math.log(1e-9))


class TestSigma:
    def test_iid(self, rademacher):
        s = estimate_sigma_n2(rademacher, 100)
        assert within(s.sigma_n2, 100.0)
        assert s.per_n.value == pytest.approx(s.sigma_n2.value / 100)

    def test_constant(self):
        assert estimate_sigma_n2(np.ones((20, 30)), 30).sigma_n2.value == 0.0

    def test_too_long(self):
        with pytest.raises(InvalidParameterError):
            estimate_sigma_n2(np.ones((20, 30)), 31)

    def test_stabilizes(self):
        X = ARCH().simulate(512, 8000, stream(22, 0))
        a = estimate_sigma_n2(X, 256).per_n
        b = estimate_sigma_n2(X, 512).per_n
        assert abs(a.value - b.value) <= 3 * math.hypot(a.se, b.se)


def test_report_json(arch_paths):
    p = ARCH()
    rep = variance_report(arch_paths[:1000], p.profile.tail, p.profile.mixing)
    d = json.loads(rep.to_json())
    assert set(d) == {"V_hat", "v2_hat", "V_integral", "sigma_n2", "diagnostics"}
    assert all(d[k]["value"] >= 0 for k in ("V_hat", "v2_hat", "sigma_n2"))
    assert d["diagnostics"]["lag_window"] == 128
