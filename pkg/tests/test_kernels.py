"""Pointwise agreement between the compiled likelihood kernels and the
Python reference implementations, plus the special-function helpers."""

import math

import numpy as np
import pytest
from scipy.integrate import dblquad
from scipy.special import ndtr, ndtri
from scipy.stats import multivariate_normal

from dosefind import _kernels as K
from dosefind import combo as cb
from dosefind import covariates as cov
from dosefind import efftox as et
from dosefind import schedule as sc
from dosefind import ttb as tb


class TestNormalHelpers:
    def test_cdf_matches_scipy(self):
        for x in np.linspace(-8, 8, 33):
            assert K.norm_cdf(x) == pytest.approx(float(ndtr(x)), abs=1e-15)

    def test_ppf_matches_scipy(self):
        for p in [1e-10, 1e-5, 0.01, 0.3, 0.5, 0.77, 0.999, 1 - 1e-9]:
            assert K.norm_ppf(p) == pytest.approx(float(ndtri(p)), abs=5e-9)

    def test_ppf_edges(self):
        assert K.norm_ppf(0.0) == -math.inf
        assert K.norm_ppf(1.0) == math.inf


class TestBivariateNormal:
    def test_matches_scipy_over_grid(self):
        for r in (-0.999, -0.9, -0.5, 0.0, 0.3, 0.75, 0.93, 0.999):
            for h in (-2.5, -0.5, 0.0, 1.0, 3.0):
                for k in (-3.0, 0.2, 2.0):
                    ref = multivariate_normal(
                        mean=[0, 0], cov=[[1, r], [r, 1]], allow_singular=True
                    ).cdf([h, k])
                    assert K.bvn_cdf(h, k, r) == pytest.approx(float(ref), abs=5e-14)

    def test_infinite_limits(self):
        assert K.bvn_cdf(np.inf, 0.7, 0.5) == pytest.approx(float(ndtr(0.7)), abs=1e-15)
        assert K.bvn_cdf(-np.inf, 0.7, 0.5) == 0.0

    def test_box_probability_vs_quadrature(self):
        r = 0.6
        s = math.sqrt(1 - r * r)

        def dens(y, x):
            return math.exp(-(x * x - 2 * r * x * y + y * y) / (2 * s * s)) / (
                2 * math.pi * s
            )

        oracle, _ = dblquad(dens, -0.5, 1.2, -1.0, 0.7, epsabs=1e-13)
        assert K.bvn_box(-0.5, 1.2, -1.0, 0.7, r) == pytest.approx(oracle, abs=1e-12)


class TestQmcBox:
    def test_three_dimensional_box_vs_scipy(self):
        omega = np.array([[1.0, 0.4, 0.2], [0.4, 1.0, 0.3], [0.2, 0.3, 1.0]])
        L, ok = K._chol_flag(omega)
        assert ok
        a = np.array([-np.inf, -1.0, -0.5])
        b = np.array([0.5, 1.0, 2.0])
        rng = np.random.default_rng(3)
        shifts = rng.random((8, 2))
        est = K.mvn_box_qmc(a, b, L, shifts, 2048)
        mvn = multivariate_normal(mean=np.zeros(3), cov=omega)
        corners = 0.0
        import itertools

        for signs in itertools.product([0, 1], repeat=3):
            pt = np.array([b[i] if s else a[i] for i, s in enumerate(signs)])
            corners += (-1) ** (3 - sum(signs)) * mvn.cdf(pt)
        assert est == pytest.approx(float(corners), rel=2e-3)

    def test_cholesky_flag_rejects_non_pd(self):
        bad = np.array([[1.0, 0.99, -0.99], [0.99, 1.0, 0.99], [-0.99, 0.99, 1.0]])
        _, ok = K._chol_flag(bad)
        assert not ok


def _random_theta(rng, model):
    names = model.param_names
    th = np.empty(len(names))
    for i, n in enumerate(names):
        th[i] = abs(rng.normal(1, 0.4)) if n in getattr(model, "positive_params", ()) else rng.normal(0, 0.8)
    return th


class TestKernelAgreement:
    def test_combo(self, rng):
        model = cb.ComboModel()
        data = [((rng.random(), rng.random()), int(rng.random() < 0.3)) for _ in range(12)]
        compiled = model.compiled(data)
        for _ in range(25):
            th = rng.gamma(2.0, 0.7, 6)
            assert compiled.kernel(th, compiled.args) == pytest.approx(
                model.loglik(th, data), abs=1e-12
            )

    @pytest.mark.parametrize("kind", ["trinary3", "trinary4"])
    @pytest.mark.parametrize("link", ["logit", "probit"])
    def test_trinary(self, rng, kind, link):
        model = et.EfftoxModel(kind, link=link)
        data = [(rng.random(), int(rng.integers(0, 3))) for _ in range(10)]
        compiled = model.compiled(data)
        for _ in range(25):
            th = _random_theta(rng, model)
            a = compiled.kernel(th, compiled.args)
            b = model.loglik(th, data)
            if math.isfinite(b):
                assert a == pytest.approx(b, abs=1e-11)
            else:
                assert a == b

    @pytest.mark.parametrize("joint", ["gumbel", "copula"])
    def test_bivariate(self, rng, joint):
        model = et.EfftoxModel("bivariate", link="probit", joint=joint)
        data = [
            (rng.random(), (int(rng.random() < 0.4), int(rng.random() < 0.3)))
            for _ in range(10)
        ]
        compiled = model.compiled(data)
        for _ in range(25):
            th = _random_theta(rng, model)
            if joint == "copula":
                th[-1] = rng.uniform(-0.95, 0.95)
            a = compiled.kernel(th, compiled.args)
            b = model.loglik(th, data)
            if math.isfinite(b):
                assert a == pytest.approx(b, abs=1e-9)
            else:
                assert a == b

    def test_covariate(self, rng):
        model = cov.CovEfftoxModel(
            n_covariates=2, n_historical=2, z_mean=(0.1, -0.2), z_sd=(1.1, 0.9),
            quadratic_efficacy=True,
        )
        data = []
        for _ in range(8):
            data.append((("hist", int(rng.integers(0, 2))), tuple(rng.normal(0, 1, 2)),
                         (int(rng.random() < 0.4), int(rng.random() < 0.3))))
        for _ in range(6):
            data.append((("dose", rng.random()), tuple(rng.normal(0, 1, 2)),
                         (int(rng.random() < 0.4), int(rng.random() < 0.3))))
        compiled = model.compiled(data)
        d = len(model.param_names)
        for _ in range(20):
            th = rng.normal(0, 0.6, d)
            assert compiled.kernel(th, compiled.args) == pytest.approx(
                model.loglik(th, data), abs=1e-11
            )

    def test_historical_mode(self, rng):
        model = cov.CovEfftoxModel(
            n_covariates=1, n_historical=2, z_mean=(0.0,), z_sd=(1.0,),
            mode="historical",
        )
        data = [
            (("hist", int(rng.integers(0, 2))), (float(rng.normal()),),
             (int(rng.random() < 0.5), int(rng.random() < 0.3)))
            for _ in range(10)
        ]
        compiled = model.compiled(data)
        d = len(model.param_names)
        for _ in range(20):
            th = rng.normal(0, 0.6, d)
            assert compiled.kernel(th, compiled.args) == pytest.approx(
                model.loglik(th, data), abs=1e-11
            )

    def test_ttb(self, rng):
        profile = tb.ToxicityProfile(
            ("a", "b"), (("0", "1"), ("0", "1", "2")), ((0.0, 1.0), (0.0, 1.0, 2.0))
        )
        model = tb.TtbModel(profile)
        data = [
            (rng.random(), (int(rng.integers(0, 2)), int(rng.integers(0, 3))))
            for _ in range(8)
        ]
        compiled = model.compiled(data)
        for _ in range(20):
            th = np.array(
                [
                    rng.normal(0, 0.5), abs(rng.normal(1, 0.3)),
                    rng.normal(0, 0.5), abs(rng.normal(1, 0.3)),
                    rng.uniform(0.3, 3.0), rng.uniform(-0.9, 0.9),
                ]
            )
            a = compiled.kernel(th, compiled.args)
            b = model.loglik(th, data)
            if math.isfinite(b):
                assert a == pytest.approx(b, abs=1e-9)
            else:
                assert a == b

    def test_ttb_qmc_path_three_types(self, rng):
        profile = tb.ToxicityProfile(
            ("a", "b", "c"),
            (("0", "1"), ("0", "1"), ("0", "1")),
            ((0.0, 1.0), (0.0, 1.0), (0.0, 1.0)),
        )
        model = tb.TtbModel(profile, qmc_points=256)
        data = [(0.4, (1, 0, 1)), (0.8, (0, 1, 1)), (0.1, (0, 0, 0))]
        compiled = model.compiled(data)
        th = np.array([0.2, 0.7, -0.1, 0.9, 0.4, 1.2, 0.3, 0.1, 0.2])
        a = compiled.kernel(th, compiled.args)
        b = model.loglik(th, data)
        # both sides are QMC but with different adaptive budgets
        assert a == pytest.approx(b, rel=5e-3)

    def test_schedule(self, rng):
        grid = sc.ScheduleGrid(
            schedules=((0.0,), (0.0, 7.0)), pads=(1.0, 2.0),
            t_star=40.0, target=0.3, f_max=0.5,
        )
        model = sc.SchedModel(grid)
        records = []
        for i in range(8):
            k = int(rng.integers(0, 2))
            j = int(rng.integers(0, 2))
            reg = grid.planned_regime(k, j)
            t_obs = float(rng.uniform(0.5, 30))
            event = bool(rng.random() < 0.4)
            records.append(sc.TimeToToxRecord(float(i), reg.truncate_at(t_obs), t_obs, event))
        compiled = model.compiled(records)
        for _ in range(25):
            th = rng.gamma(1.5, np.tile([0.3, 5.0, 6.0], 2))
            a = compiled.kernel(th, compiled.args)
            b = model.loglik(th, records)
            if math.isfinite(b):
                assert a == pytest.approx(b, abs=1e-11)
            else:
                assert a == b
