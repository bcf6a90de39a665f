import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from dosefind import schedule as sc
from dosefind.mcmc import PosteriorSample
from dosefind.priors import ConfigurationError


class TestTriangularHazard:
    def test_zero_at_origin_and_beyond_support(self):
        assert sc.tri_hazard(0.0, (1.0, 2.0, 2.0)) == 0.0
        assert sc.tri_hazard(4.0, (1.0, 2.0, 2.0)) == 0.0
        assert sc.tri_hazard(-1.0, (1.0, 2.0, 2.0)) == 0.0

    def test_peak_height(self):
        assert sc.tri_hazard(2.0, (1.0, 2.0, 2.0)) == pytest.approx(0.5, abs=1e-15)

    def test_falling_branch_hand_value(self):
        assert sc.tri_hazard(3.0, (1.0, 2.0, 2.0)) == pytest.approx(0.25, abs=1e-15)

    @given(
        a=st.floats(0.05, 3.0),
        b=st.floats(0.2, 10.0),
        g=st.floats(0.2, 10.0),
    )
    @settings(max_examples=40)
    def test_area_equals_alpha(self, a, b, g):
        integral, err = quad(
            lambda u: sc.tri_hazard(u, (a, b, g)), 0, b + g, limit=200, points=[b]
        )
        assert abs(integral - a) < 1e-10 + err

    def test_nonnegative_with_compact_support(self, rng):
        for _ in range(20):
            a, b, g = rng.uniform(0.1, 3.0, 3)
            for u in np.linspace(-1, b + g + 1, 50):
                h = sc.tri_hazard(u, (a, b, g))
                assert h >= 0.0
                if u <= 0 or u >= b + g:
                    assert h == 0.0


class TestTriangularCumulative:
    def test_saturates_at_area(self):
        assert sc.tri_cum_hazard(4.0, (1.0, 2.0, 2.0)) == 1.0
        assert sc.tri_cum_hazard(100.0, (0.7, 1.0, 3.0)) == 0.7

    def test_rising_area_at_peak(self):
        # area of the rising triangle: a * b / (b + g)
        assert sc.tri_cum_hazard(2.0, (1.0, 2.0, 2.0)) == pytest.approx(0.5, abs=1e-15)

    def test_zero_before_first_administration(self):
        assert sc.tri_cum_hazard(0.0, (1.0, 2.0, 2.0)) == 0.0
        assert sc.tri_cum_hazard(-3.0, (1.0, 2.0, 2.0)) == 0.0

    def test_matches_numeric_integration(self, rng):
        for _ in range(5):
            a, b, g = rng.uniform(0.2, 3.0, 3)
            for u in rng.uniform(0, b + g, 4):
                pts = [b] if b < u else []
                numeric, _ = quad(
                    lambda v: sc.tri_hazard(v, (a, b, g)), 0, u, limit=200, points=pts
                )
                assert sc.tri_cum_hazard(u, (a, b, g)) == pytest.approx(numeric, abs=1e-10)


class TestWeibull:
    def test_unit_shape_values(self):
        # shape 1: h(u) = e^b exp(-u e^b); at u -> 0+ the hazard is e^b
        b = 0.3
        assert sc.weibull_hazard(1e-12, (1.0, b)) == pytest.approx(math.exp(b), rel=1e-9)

    def test_cumulative_matches_numeric(self):
        for a, b in [(0.8, 0.1), (2.0, 0.3), (3.0, -0.5)]:
            for u in (0.5, 1.0, 2.5):
                numeric, _ = quad(lambda v: sc.weibull_hazard(v, (a, b)), 0, u, limit=300)
                assert sc.weibull_cum_hazard(u, (a, b)) == pytest.approx(numeric, abs=1e-8)

    def test_vanishes_as_scale_drops(self):
        assert sc.weibull_hazard(1.0, (2.0, -700.0)) == pytest.approx(0.0, abs=1e-300)

    def test_shapes(self):
        # decreasing for small shape, nonmonotone for shape >= 2
        hs = [sc.weibull_hazard(u, (0.5, 0.0)) for u in (0.1, 0.5, 1.0, 2.0)]
        assert all(a > b for a, b in zip(hs, hs[1:]))
        hs2 = [sc.weibull_hazard(u, (3.0, 0.0)) for u in (0.1, 0.5, 1.0, 3.0)]
        assert hs2[1] > hs2[0] and hs2[3] < hs2[2]


@pytest.fixture(scope="module")
def fig_regime():
    # four administrations on days 0, 3, 10, 13 at a common dose
    return sc.Regime((0.0, 3.0, 10.0, 13.0), (0, 0, 0, 0))


class TestRegimeHazard:
    def test_zero_before_first_administration(self, fig_regime):
        theta = np.array([0.4, 4.0, 6.0])
        assert sc.regime_hazard(2.0, 5.0, fig_regime, theta) == 0.0
        assert sc.regime_cum_hazard(2.0, 5.0, fig_regime, theta) == 0.0

    def test_additivity_matches_numeric_integration(self, fig_regime):
        theta = np.array([0.4, 4.0, 6.0])
        t = 12.0
        lam_c = sc.regime_cum_hazard(t, 0.0, fig_regime, theta)
        us = np.linspace(0.0, t, 240001)
        lams = np.array([sc.regime_hazard(u, 0.0, fig_regime, theta) for u in us])
        trap = float(np.trapezoid(lams, us))
        assert abs(lam_c - trap) <= 1e-6

    def test_equals_sum_of_single_administrations(self, fig_regime):
        theta = np.array([0.4, 4.0, 6.0])
        t = 12.0
        total = sum(
            sc.tri_cum_hazard(t - s, theta) for s in fig_regime.times if t - s > 0
        )
        assert sc.regime_cum_hazard(t, 0.0, fig_regime, theta) == pytest.approx(total, abs=0)

    def test_never_toxicity_probability(self, fig_regime):
        theta = np.array([0.4, 4.0, 6.0])
        lam_inf = sc.regime_cum_hazard(1e9, 0.0, fig_regime, theta)
        assert abs(math.exp(-lam_inf) - math.exp(-4 * 0.4)) < 1e-12

    def test_bounded_risk(self, fig_regime, rng):
        theta = np.array([0.4, 4.0, 6.0])
        ceiling = 1.0 - math.exp(-4 * 0.4)
        for t in rng.uniform(0, 60, 20):
            f = 1.0 - math.exp(-sc.regime_cum_hazard(t, 0.0, fig_regime, theta))
            assert f <= ceiling + 1e-15


@pytest.fixture(scope="module")
def grid():
    return sc.ScheduleGrid(
        schedules=((0.0,), (0.0, 7.0), (0.0, 7.0, 14.0)),
        pads=(1.0, 2.0, 3.0, 4.0),
        t_star=42.0,
        target=0.3,
        f_max=0.5,
        p_cut=0.9,
    )


def theta_for_grid(areas, rise=4.0, fall=6.0):
    out = []
    for a in areas:
        out += [a, rise, fall]
    return np.array(out)


class TestGrid:
    def test_nesting_enforced(self):
        with pytest.raises(ConfigurationError):
            sc.ScheduleGrid(
                schedules=((0.0, 7.0), (0.0, 6.0, 14.0)),
                pads=(1.0, 2.0),
                t_star=42.0, target=0.3, f_max=0.5,
            )

    def test_horizon_must_cover_longest_schedule(self):
        with pytest.raises(ConfigurationError):
            sc.ScheduleGrid(
                schedules=((0.0,), (0.0, 7.0)),
                pads=(1.0,),
                t_star=5.0, target=0.3, f_max=0.5,
            )

    def test_tox_cdf_saturation(self, grid):
        theta = theta_for_grid([0.1, 0.2, 0.3, 0.4])
        # the horizon far exceeds every triangle: F = 1 - exp(-m alpha)
        for k in range(3):
            for j in range(4):
                m = len(grid.schedules[k])
                expect = 1.0 - math.exp(-m * theta[3 * j])
                assert sc.tox_cdf(grid, k, j, theta) == pytest.approx(expect, abs=1e-12)

    def test_tox_cdf_matches_numeric_oracle(self, grid):
        tight = sc.ScheduleGrid(
            schedules=grid.schedules, pads=grid.pads, t_star=16.0,
            target=0.3, f_max=0.5,
        )
        theta = theta_for_grid([0.3, 0.5, 0.7, 0.9], rise=5.0, fall=9.0)
        k, j = 2, 1
        reg = tight.planned_regime(k, j)
        us = np.linspace(0, 16.0, 160001)
        lams = np.array([sc.regime_hazard(u, 0.0, reg, theta) for u in us])
        lam_c = float(np.trapezoid(lams, us))
        assert sc.tox_cdf(tight, k, j, theta) == pytest.approx(1 - math.exp(-lam_c), abs=1e-6)


class TestLikelihood:
    def test_empty_follow_up_contributes_nothing(self):
        rec = sc.TimeToToxRecord(0.0, sc.Regime((0.0,), (0,)), 0.0, False)
        assert sc.sched_log_likelihood([rec], theta_for_grid([0.3])) == 0.0

    def test_censored_patient_term(self):
        theta = theta_for_grid([0.3])
        reg = sc.Regime((0.0, 7.0), (0, 0))
        rec = sc.TimeToToxRecord(0.0, reg, 9.0, False)
        expect = -(sc.tri_cum_hazard(9.0, theta) + sc.tri_cum_hazard(2.0, theta))
        assert sc.sched_log_likelihood([rec], theta) == pytest.approx(expect, abs=1e-14)

    def test_event_with_zero_hazard_impossible(self):
        theta = theta_for_grid([0.3], rise=1.0, fall=1.0)
        reg = sc.Regime((0.0,), (0,))
        rec = sc.TimeToToxRecord(0.0, reg, 10.0, True)  # far outside support
        assert sc.sched_log_likelihood([rec], theta) == -math.inf

    def test_five_patient_recount(self, rng):
        theta = theta_for_grid([0.3, 0.6], rise=3.0, fall=5.0)
        records = []
        for i in range(5):
            times = tuple(np.cumsum(rng.uniform(1, 4, rng.integers(1, 4))))
            doses = tuple(int(d) for d in rng.integers(0, 2, len(times)))
            t_obs = float(rng.uniform(0.5, 15))
            event = bool(rng.random() < 0.5)
            reg = sc.Regime(times, doses).truncate_at(t_obs)
            if not reg.times:
                continue
            records.append(sc.TimeToToxRecord(float(i), reg, t_obs, event))
        total = sc.sched_log_likelihood(records, theta)
        recount = 0.0
        for r in records:
            lam = sum(
                sc.tri_hazard(r.t_obs - s, theta[3 * j : 3 * j + 3])
                for s, j in zip(r.regime.times, r.regime.dose_idx)
            )
            lam_c = sum(
                sc.tri_cum_hazard(r.t_obs - s, theta[3 * j : 3 * j + 3])
                for s, j in zip(r.regime.times, r.regime.dose_idx)
            )
            if r.event:
                if lam <= 0:
                    recount = -math.inf
                    break
                recount += math.log(lam)
            recount -= lam_c
        if math.isfinite(total):
            assert total == pytest.approx(recount, abs=1e-12)
        else:
            assert recount == -math.inf


class TestAcceptabilityAndSelection:
    def test_all_acceptable_when_safe(self, grid):
        theta = theta_for_grid([0.01, 0.02, 0.03, 0.04])
        sample = PosteriorSample.degenerate(
            sc.SchedModel(grid).param_names, theta
        )
        assert len(sc.acceptable_pairs(sample, grid)) == 12

    def test_none_acceptable_when_toxic(self, grid):
        theta = theta_for_grid([3.0, 3.0, 3.0, 3.0])
        sample = PosteriorSample.degenerate(sc.SchedModel(grid).param_names, theta)
        assert sc.acceptable_pairs(sample, grid) == []
        pick, acc, _ = sc.select_pair(sample, grid, (0, 0), {(0, 0)})
        assert pick is None

    def test_membership_matches_recount(self, grid, rng):
        draws = np.column_stack(
            [
                rng.gamma(1.5, 0.2, 300), rng.gamma(2, 2, 300), rng.gamma(2, 3, 300),
                rng.gamma(1.5, 0.3, 300), rng.gamma(2, 2, 300), rng.gamma(2, 3, 300),
                rng.gamma(1.5, 0.4, 300), rng.gamma(2, 2, 300), rng.gamma(2, 3, 300),
                rng.gamma(1.5, 0.5, 300), rng.gamma(2, 2, 300), rng.gamma(2, 3, 300),
            ]
        )
        sample = PosteriorSample(
            names=sc.SchedModel(grid).param_names, draws=draws, seed=0,
            chain_length=300, acceptance_rate=0.3,
            step_scales=np.ones(12), ess=np.ones(12),
        )
        acc = set(sc.acceptable_pairs(sample, grid))
        for k in range(3):
            for j in range(4):
                fs = np.array(
                    [1 - math.exp(-sum(sc.tri_cum_hazard(grid.t_star - s, th[3 * j : 3 * j + 3]) for s in grid.schedules[k])) for th in draws]
                )
                ok = float(np.mean(fs > grid.f_max)) < grid.p_cut
                assert ((k, j) in acc) == ok

    def test_first_patient_start_pair(self, grid):
        theta = theta_for_grid([0.05, 0.1, 0.2, 0.3])
        sample = PosteriorSample.degenerate(sc.SchedModel(grid).param_names, theta)
        pick, _, _ = sc.select_pair(sample, grid, None, set())
        assert pick == (0, 0)

    def test_escalation_clamped_to_one_step(self, grid):
        # a posterior that wants the far corner must still move one step
        theta = theta_for_grid([0.001, 0.002, 0.003, 0.004])
        sample = PosteriorSample.degenerate(sc.SchedModel(grid).param_names, theta)
        pick, _, _ = sc.select_pair(sample, grid, (0, 0), {(0, 0)})
        assert pick is not None and pick[0] <= 1 and pick[1] <= 1

    def test_tried_pairs_always_eligible(self, grid):
        theta = theta_for_grid([0.05, 0.1, 0.2, 0.3])
        sample = PosteriorSample.degenerate(sc.SchedModel(grid).param_names, theta)
        tried = {(0, 0), (1, 1), (2, 2), (2, 3)}
        pick, acc, mean_f = sc.select_pair(sample, grid, (0, 0), tried)
        eligible = [
            kj for kj in acc if kj in tried or (kj[0] <= 1 and kj[1] <= 1)
        ]
        best = min(
            eligible,
            key=lambda kj: (abs(mean_f[kj] - grid.target), grid.total_dose(*kj), kj[1]),
        )
        assert pick == best

    def test_matches_exhaustive_constrained_argmin(self, grid, rng):
        draws = np.column_stack([rng.gamma(2, 0.25, 200) for _ in range(12)])
        sample = PosteriorSample(
            names=sc.SchedModel(grid).param_names, draws=draws, seed=0,
            chain_length=200, acceptance_rate=0.3,
            step_scales=np.ones(12), ess=np.ones(12),
        )
        current = (1, 1)
        tried = {(0, 0), (0, 1), (1, 1)}
        pick, acc, mean_f = sc.select_pair(sample, grid, current, tried)
        eligible = [
            kj
            for kj in acc
            if kj in tried or (kj[0] <= current[0] + 1 and kj[1] <= current[1] + 1)
        ]
        if not eligible:
            assert pick is None
        else:
            best = min(
                eligible,
                key=lambda kj: (abs(mean_f[kj] - grid.target), grid.total_dose(*kj), kj[1]),
            )
            assert pick == best

    def test_deescalation_unconstrained(self, grid):
        # untried lower pairs are reachable in one move
        theta = theta_for_grid([0.05, 3.0, 3.0, 3.0])
        sample = PosteriorSample.degenerate(sc.SchedModel(grid).param_names, theta)
        pick, _, _ = sc.select_pair(sample, grid, (2, 3), {(2, 3)})
        assert pick is not None and pick[1] == 0


class TestDrawToxTime:
    def test_inversion_reproduces_distribution(self):
        theta = np.array([0.5, 3.0, 5.0])
        reg = sc.Regime((0.0, 4.0), (0, 0))
        rng = np.random.default_rng(12)
        n = 40000
        times = [sc.draw_tox_time(reg, theta, rng) for _ in range(n)]
        none_rate = sum(t is None for t in times) / n
        assert none_rate == pytest.approx(math.exp(-2 * 0.5), abs=0.01)
        observed = np.array([t for t in times if t is not None])
        # empirical CDF at a grid point vs model CDF
        for u in (2.0, 5.0, 8.0):
            model_f = 1 - math.exp(-sc.regime_cum_hazard(u, 0.0, reg, theta))
            emp = float(np.mean(observed <= u)) * (1 - none_rate)
            assert emp == pytest.approx(model_f, abs=0.015)
