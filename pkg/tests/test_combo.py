import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dosefind import combo as cb
from dosefind.mcmc import PosteriorSample
from dosefind.priors import ConfigurationError

UNIT = np.ones(6)


def one_draw(theta):
    return PosteriorSample.degenerate(cb.PARAM_NAMES, theta)


class TestSurface:
    def test_origin_is_safe(self):
        assert cb.combo_tox_prob((0.0, 0.0), UNIT.reshape(1, -1))[0] == 0.0

    def test_single_agent_edge(self):
        assert cb.combo_tox_prob((1.0, 0.0), UNIT.reshape(1, -1))[0] == 0.5

    def test_hand_evaluated_interior_point(self):
        p = cb.combo_tox_prob((0.5, 0.5), UNIT.reshape(1, -1))[0]
        assert p == pytest.approx(1.25 / 2.25, abs=1e-15)

    def test_edge_consistency_with_single_agent(self, rng):
        # the surface restricted to an axis equals the one-agent submodel
        for _ in range(20):
            theta = rng.gamma(2.0, 0.7, 6)
            x1 = rng.random()
            lhs = cb.combo_tox_prob((x1, 0.0), theta.reshape(1, -1))[0]
            rhs = cb.single_agent_prob(1, x1, theta[:2])
            assert lhs == rhs
            x2 = rng.random()
            lhs2 = cb.combo_tox_prob((0.0, x2), theta.reshape(1, -1))[0]
            rhs2 = cb.single_agent_prob(2, x2, theta[2:4])
            assert lhs2 == rhs2

    def test_single_agent_hand_value(self):
        assert cb.single_agent_prob(1, 0.5, (2.0, 3.0)) == pytest.approx(0.2, abs=1e-15)
        assert cb.single_agent_prob(1, 0.0, (2.0, 3.0)) == 0.0
        assert cb.single_agent_prob(2, 1.0, (1.0, 1.0)) == 0.5

    @given(
        st.tuples(*[st.floats(0.05, 5.0) for _ in range(6)]),
        st.floats(0.0, 1.0),
        st.floats(0.0, 1.0),
        st.floats(0.001, 0.5),
    )
    @settings(max_examples=60)
    def test_monotone_in_each_coordinate(self, theta, x1, x2, step):
        theta = np.asarray(theta).reshape(1, -1)
        p = cb.combo_tox_prob((x1, x2), theta)[0]
        if x1 + step <= 1.0:
            assert cb.combo_tox_prob((x1 + step, x2), theta)[0] >= p
        if x2 + step <= 1.0:
            assert cb.combo_tox_prob((x1, x2 + step), theta)[0] >= p

    def test_distinct_levels_have_disjoint_isocontours(self, rng):
        # a point cannot satisfy pi = p and pi = q for p != q
        theta = rng.gamma(2.0, 0.7, 6).reshape(1, -1)
        for _ in range(30):
            x = tuple(rng.random(2))
            p = cb.combo_tox_prob(x, theta)[0]
            assert not (abs(p - 0.2) < 1e-12 and abs(p - 0.4) < 1e-12)

    def test_domain_validation(self):
        with pytest.raises(ConfigurationError):
            cb.combo_tox_prob((1.2, 0.0), UNIT.reshape(1, -1))


class TestGradient:
    def test_matches_central_differences(self, rng):
        for _ in range(10):
            theta = rng.gamma(2.0, 0.6, 6)
            x = tuple(rng.uniform(0.05, 0.95, 2))
            g = cb.combo_tox_grad(x, theta)
            eps = 1e-6
            for j in range(6):
                tp, tm = theta.copy(), theta.copy()
                tp[j] += eps
                tm[j] -= eps
                fd = (
                    cb.combo_tox_prob(x, tp.reshape(1, -1))[0]
                    - cb.combo_tox_prob(x, tm.reshape(1, -1))[0]
                ) / (2 * eps)
                assert g[j] == pytest.approx(fd, rel=1e-5, abs=1e-12)

    def test_finite_on_axes(self):
        g = cb.combo_tox_grad((0.0, 0.5), UNIT)
        assert np.all(np.isfinite(g))
        g = cb.combo_tox_grad((0.0, 0.0), UNIT)
        assert np.all(np.isfinite(g))


class TestFisher:
    def test_origin_returns_sentinel(self):
        assert cb.fisher_logdet((0.0, 0.0), UNIT) == -math.inf

    def test_single_dose_is_rank_deficient(self):
        assert cb.fisher_logdet((0.5, 0.5), UNIT, history=()) == -math.inf

    def test_accumulated_information_matches_finite_difference_gradients(self, rng):
        # build the information matrix from finite-difference gradients and
        # compare log-determinants
        history = [(0.1, 0.2), (0.3, 0.45), (0.55, 0.1), (0.7, 0.65), (0.2, 0.8), (0.9, 0.35)]
        candidate = (0.5, 0.5)
        theta = UNIT
        ld = cb.fisher_logdet(candidate, theta, history)

        def fd_grad(x):
            eps = 1e-6
            out = np.empty(6)
            for j in range(6):
                tp, tm = theta.copy(), theta.copy()
                tp[j] += eps
                tm[j] -= eps
                out[j] = (
                    cb.combo_tox_prob(x, tp.reshape(1, -1))[0]
                    - cb.combo_tox_prob(x, tm.reshape(1, -1))[0]
                ) / (2 * eps)
            return out

        total = np.zeros((6, 6))
        for x in [candidate] + history:
            p = cb.combo_tox_prob(x, theta.reshape(1, -1))[0]
            g = fd_grad(x)
            total += np.outer(g, g) / (p * (1 - p))
        _, oracle = np.linalg.slogdet(total)
        assert ld == pytest.approx(oracle, rel=1e-4)


class TestLine:
    def test_ordering_enforced(self):
        with pytest.raises(ConfigurationError):
            cb.DiagonalLine(
                (0.1, 0.1), (0.9, 0.9),
                doses=((0.5, 0.5), (0.3, 0.3)),
                expansion=(False, False),
            )

    def test_expansion_availability(self):
        line = cb.DiagonalLine.from_fractions(
            (0.1, 0.1), (0.9, 0.9), [0.0, 0.5, 1.0], [0.25, 0.75]
        )
        assert line.allowed_indices(False) == [0, 2, 4]
        assert line.allowed_indices(True) == [0, 1, 2, 3, 4]

    def test_signed_side(self):
        line = cb.DiagonalLine.from_fractions((0.0, 0.0), (1.0, 1.0), [0.0, 1.0])
        assert line.signed_side((0.2, 0.8)) > 0  # above the diagonal: left
        assert line.signed_side((0.8, 0.2)) < 0
        assert line.signed_side((0.5, 0.5)) == pytest.approx(0.0, abs=1e-12)


class TestStage1:
    @pytest.fixture
    def line(self):
        return cb.DiagonalLine.from_fractions(
            (0.05, 0.05), (0.95, 0.95), [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
        )

    def test_exact_hit_stays(self, line):
        # degenerate posterior for which dose 3 hits the target exactly
        theta = UNIT
        sample = one_draw(theta)
        target = float(cb.combo_tox_prob(line.doses[3], theta.reshape(1, -1))[0])
        assert cb.stage1_select(sample, line, target, current_index=3, any_tox_seen=False) == 3

    def test_no_skip_clamps_escalation(self, line):
        # posterior pulls toward the top dose, but only one step is allowed
        theta = np.array([0.01, 1.0, 0.01, 1.0, 0.01, 1.0])
        sample = one_draw(theta)
        high_target = float(cb.combo_tox_prob(line.doses[5], theta.reshape(1, -1))[0])
        pick = cb.stage1_select(sample, line, high_target, current_index=2, any_tox_seen=False)
        assert pick == 3

    def test_matches_exhaustive_oracle(self, line, rng):
        draws = rng.gamma(2.0, 0.7, size=(300, 6))
        sample = PosteriorSample(
            names=cb.PARAM_NAMES, draws=draws, seed=0, chain_length=300,
            acceptance_rate=0.3, step_scales=np.ones(6), ess=np.ones(6),
        )
        target = 0.3
        current = 4
        pick = cb.stage1_select(sample, line, target, current, any_tox_seen=True)
        candidates = [i for i in range(len(line.doses)) if i <= current + 1]
        errs = [
            abs(float(np.mean(cb.combo_tox_prob(line.doses[i], draws))) - target)
            for i in candidates
        ]
        assert pick == candidates[int(np.argmin(errs))]

    def test_ties_prefer_lower(self):
        # agent-swapped draws make the two mirror doses' posterior-mean
        # toxicity exactly equal, producing a true floating-point tie
        mirror = cb.DiagonalLine.from_fractions((0.2, 0.8), (0.8, 0.2), [1 / 3, 2 / 3])
        theta_a = np.array([1.3, 0.9, 0.6, 1.7, 0.8, 1.1])
        theta_b = theta_a[[2, 3, 0, 1, 4, 5]]
        sample = PosteriorSample(
            names=cb.PARAM_NAMES, draws=np.vstack([theta_a, theta_b]), seed=0,
            chain_length=2, acceptance_rate=0.5, step_scales=np.ones(6), ess=np.ones(6),
        )
        p_lo = float(np.mean(cb.combo_tox_prob(mirror.doses[0], sample.draws)))
        p_hi = float(np.mean(cb.combo_tox_prob(mirror.doses[1], sample.draws)))
        assert p_lo == p_hi
        pick = cb.stage1_select(sample, mirror, p_lo, current_index=1, any_tox_seen=False)
        assert pick == 0


class TestContour:
    def test_one_draw_unit_parameters(self):
        sample = one_draw(UNIT)
        contour = cb.estimate_contour(sample, 0.5, grid=101, tolerance=1e-6)
        assert contour
        vertices = dict((round(v[0], 4), v[1]) for v in contour.vertices)
        # exact crossing at x1 = 0.5 solves 0.5 + 1.5 x2 = 1, i.e. x2 = 1/3
        assert vertices[0.5] == pytest.approx(1 / 3, abs=1e-4)
        # the diagonal crossing sits below (0.5, 0.5) at sqrt(2) - 1
        t = math.sqrt(2.0) - 1.0
        assert vertices[0.41] == pytest.approx(t, abs=2e-2)

    def test_vertices_satisfy_tolerance(self, rng):
        draws = rng.gamma(2.0, 0.7, size=(200, 6))
        sample = PosteriorSample(
            names=cb.PARAM_NAMES, draws=draws, seed=0, chain_length=200,
            acceptance_rate=0.3, step_scales=np.ones(6), ess=np.ones(6),
        )
        contour = cb.estimate_contour(sample, 0.3, grid=41, tolerance=1e-4)
        for x1, x2 in contour.vertices:
            mean_p = float(np.mean(cb.combo_tox_prob((x1, x2), draws)))
            assert abs(mean_p - 0.3) <= 1e-4
        assert all(
            a[0] < b[0] for a, b in zip(contour.vertices, contour.vertices[1:])
        )

    def test_unreachable_target_returns_empty(self):
        theta = np.array([0.01, 1.0, 0.01, 1.0, 0.001, 1.0])
        sample = one_draw(theta)
        contour = cb.estimate_contour(sample, 0.9, grid=21, tolerance=1e-4)
        assert not contour

    def test_symmetric_parameters_give_symmetric_contour(self):
        sample = one_draw(UNIT)
        contour = cb.estimate_contour(sample, 0.5, grid=41, tolerance=1e-6)
        verts = {round(v[0], 6): v[1] for v in contour.vertices}
        for x1, x2 in contour.vertices:
            if round(x2, 6) in verts:
                assert verts[round(x2, 6)] == pytest.approx(x1, abs=5e-3)


class TestStage2:
    @pytest.fixture
    def line(self):
        return cb.DiagonalLine.from_fractions((0.05, 0.05), (0.95, 0.95), [0.0, 0.5, 1.0])

    def test_single_vertex_per_side(self, line):
        contour = cb.ContourEstimate(
            target=0.5, vertices=((0.2, 0.8), (0.8, 0.2)), tolerance=1e-4
        )
        sample = one_draw(UNIT)
        assert cb.stage2_select(sample, contour, "left", [], line) == (0.2, 0.8)
        assert cb.stage2_select(sample, contour, "right", [], line) == (0.8, 0.2)

    def test_empty_side_falls_back_to_nearest_on_line(self, line):
        contour = cb.ContourEstimate(
            target=0.5, vertices=((0.2, 0.8), (0.45, 0.55)), tolerance=1e-4
        )
        sample = one_draw(UNIT)
        pick = cb.stage2_select(sample, contour, "right", [], line)
        assert pick == (0.45, 0.55)

    def test_argmax_matches_exhaustive_scan(self, line, rng):
        sample = one_draw(rng.gamma(2.0, 0.7, 6))
        contour = cb.estimate_contour(sample, 0.35, grid=21, tolerance=1e-3)
        if not contour:
            pytest.skip("target unreachable under this draw")
        history = [(0.1, 0.2), (0.3, 0.45), (0.55, 0.1), (0.7, 0.65), (0.2, 0.8), (0.9, 0.35)]
        pick = cb.stage2_select(sample, contour, "left", history, line, max_draws=50)
        lefts = [v for v in contour.vertices if line.signed_side(v) > 1e-9]
        if not lefts:
            pytest.skip("no left-side vertices")
        scores = [cb._mean_fisher_logdet(v, sample, history, 50) for v in lefts]
        assert pick == lefts[int(np.argmax(scores))]

    def test_symmetric_history_mirrors(self, line):
        sample = one_draw(UNIT)
        contour = cb.estimate_contour(sample, 0.5, grid=41, tolerance=1e-6)
        history = [(0.2, 0.2), (0.6, 0.6), (0.3, 0.7), (0.7, 0.3), (0.1, 0.55), (0.55, 0.1)]
        left = cb.stage2_select(sample, contour, "left", history, line, max_draws=20)
        right = cb.stage2_select(sample, contour, "right", history, line, max_draws=20)
        assert left[0] == pytest.approx(right[1], abs=0.06)
        assert left[1] == pytest.approx(right[0], abs=0.06)

    def test_kill_criterion_hook(self, line):
        sample = one_draw(UNIT)
        contour = cb.estimate_contour(sample, 0.5, grid=41, tolerance=1e-6)
        history = [(0.2, 0.2), (0.6, 0.6), (0.3, 0.7), (0.7, 0.3), (0.1, 0.55), (0.55, 0.1)]
        # an anti-disease score favoring agent-2-heavy pairs pulls the pick
        # toward the chosen side's high-x2 end, snapped to a contour vertex
        pick = cb.stage2_select(
            sample, contour, "left", history, line, max_draws=20,
            kill_criterion=lambda v: v[1],
        )
        assert pick in contour.vertices
