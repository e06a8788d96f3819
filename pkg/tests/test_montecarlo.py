import math

import numpy as np
import pytest

from weakdep.bounds import bernstein_bound
from weakdep.errors import InvalidInputError, InvalidParameterError
from weakdep.montecarlo import (
    CalibrationCell,
    TailEstimate,
    calibrate_constants,
    clopper_pearson_upper,
    estimate_max_tail,
    mdp_admissible,
    mdp_study,
    simulate_statistics,
    verify_dominance,
)

RAD = {"kind": "iid_rademacher"}


class TestClopperPearson:
    def test_zero_hits(self):
        for N in (100, 10**5):
            assert clopper_pearson_upper(0, N, 0.99) == pytest.approx(1 - 0.01 ** (1 / N), rel=1e-10)

    def test_all_hits(self):
        assert clopper_pearson_upper(50, 50) == 1.0

    def test_above_phat(self):
        k = np.arange(0, 101)
        assert np.all(clopper_pearson_upper(k, 100) >= k / 100)

    def test_bad_conf(self):
        with pytest.raises(InvalidParameterError):
            clopper_pearson_upper(1, 10, 1.0)


class TestTail:
    def test_trivial_points(self):
        est = estimate_max_tail(RAD, 10, [0.0, 11.0], 1000, 1)
        assert est.hits.tolist() == [1000, 0]
        assert est.cp_upper[1] == pytest.approx(1 - 0.01 ** (1 / 1000))

    def test_rademacher_all_equal(self):
        est = estimate_max_tail(RAD, 10, [10.0], 100_000, 2)
        p = 2.0**-9
        assert abs(est.p_hat[0] - p) <= 3 * math.sqrt(p * (1 - p) / 1e5)

    def test_monotone(self):
        est = estimate_max_tail({"kind": "arch"}, 64, np.linspace(0, 5, 30), 2000, 3)
        assert np.all(np.diff(est.hits) <= 0)
        assert np.all(est.cp_upper >= est.p_hat)

    def test_worker_independence(self):
        a = simulate_statistics({"kind": "regenerative"}, [32, 64], 3000, 5, workers=1)
        b = simulate_statistics({"kind": "regenerative"}, [32, 64], 3000, 5, workers=3)
        for n in (32, 64):
            assert np.array_equal(a[n], b[n])

    def test_errors(self):
        with pytest.raises(InvalidParameterError):
            estimate_max_tail(RAD, 10, [1.0], 50, 0)
        with pytest.raises(InvalidParameterError):
            estimate_max_tail(RAD, 10, [2.0, 1.0], 100, 0)
        with pytest.raises(InvalidParameterError):
            simulate_statistics(RAD, [10], 10, 0, statistic="median")


def _manual(cp, x=(1.0,)):
    x = np.asarray(x, float)
    return TailEstimate(x, np.zeros(x.size, dtype=np.int64), 100, np.asarray(cp, float))


class TestDominance:
    def test_bound_one(self):
        est = estimate_max_tail(RAD, 20, [0.0, 5.0, 10.0], 500, 0)
        assert verify_dominance(est, [1.0, 1.0, 1.0]).passed

    def test_margin(self):
        rep = verify_dominance(_manual([0.03]), [0.05])
        assert rep.passed and rep.worst_margin == pytest.approx(0.02)
        assert not verify_dominance(_manual([0.06]), [0.05]).passed

    def test_mismatch(self):
        with pytest.raises(InvalidInputError):
            verify_dominance(_manual([0.03]), [0.05, 0.01])

    def test_bernstein_suite(self):
        n = 100
        x = np.linspace(0, 40, 21)
        est = TailEstimate.from_statistics(simulate_statistics(RAD, [n], 20_000, 4, "upper")[n], x)
        assert verify_dominance(est, [bernstein_bound(v, n, 1.0).value for v in x]).passed


def _bernstein_family(n):
    return lambda x, k: bernstein_bound(x, k["K"] * n, 1.0).value


class TestCalibration:
    def _cells(self, seed, n=100):
        x = np.linspace(5, 40, 15)
        est = TailEstimate.from_statistics(simulate_statistics(RAD, [n], 20_000, seed, "upper")[n], x)
        return [CalibrationCell(est, _bernstein_family(n))]

    def test_stable_across_seeds(self):
        res = calibrate_constants({s: self._cells(s) for s in range(1, 6)}, {"K": 1.0})
        assert res.ok
        vals = [c["K"] for c in res.constants.values()]
        assert all(0 < v <= 1.0 for v in vals)
        assert res.spread["K"] <= 2.0

    def test_minimum_returned(self):
        cells = self._cells(1)
        always = [CalibrationCell(cells[0].estimate, lambda x, k: 1.0)]
        res = calibrate_constants({1: always, 2: always}, {"K": 1.0})
        assert res.constants[1]["K"] == pytest.approx(1e-3)

    def test_failure_report(self):
        cells = self._cells(1)
        never = [CalibrationCell(cells[0].estimate, lambda x, k: 0.0)]
        res = calibrate_constants({1: never}, {"K": 1.0})
        assert not res.ok and res.constants[1] is None

    def test_empty(self):
        with pytest.raises(InvalidInputError):
            calibrate_constants({}, {"K": 1.0})


class TestMdp:
    def test_admissibility(self):
        assert mdp_admissible(0.25, 0.5)
        assert not mdp_admissible(0.5, 0.5)

    def test_t_zero_and_censoring(self):
        st = mdp_study({"kind": "arch"}, [64, 128], 0.25, [0.0, 50.0], 500, 0)
        assert st.admissible and st.gamma == pytest.approx(0.5)
        for c in st.cells:
            if c.t == 0.0:
                assert c.value == 0.0
            else:
                assert c.censored and c.value is None and c.cp_upper > 0
        assert st.reference[0.0] == 0.0

    def test_all_censored(self):
        with pytest.raises(InvalidInputError):
            mdp_study({"kind": "arch"}, [64], 0.25, [50.0], 200, 0)
