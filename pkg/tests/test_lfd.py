import math

import numpy as np
import pytest

from netsprt.hypothesis import GaussianBinaryTest, llr, llr_moments
from netsprt.lfd import (
    ClippedLrtParams,
    LfdBandError,
    adaptive_simpson,
    clipped_llr,
    clipped_llr_moments,
    excess_masses,
    lfd_densities,
    lfd_log_densities,
    llr_cdf,
    solve_lfd_eps,
    support_interval,
)

S1 = GaussianBinaryTest.shift_in_mean(-1.0, 1.0, 2.0)
S2 = GaussianBinaryTest.shift_in_variance(4.0, 1.0)


def quad_oracle(f, a, b, n=200_001):
    """Composite Simpson on a dense fixed grid, vectorized; independent of
    the adaptive integrator used by the solver."""
    xs = np.linspace(a, b, n)
    ys = f(xs)
    h = (b - a) / (n - 1)
    return h / 3 * (ys[0] + ys[-1] + 4 * ys[1:-1:2].sum() + 2 * ys[2:-2:2].sum())


class TestSolver:
    def test_zero_eps_sentinel(self):
        p = solve_lfd_eps(S1, 0.0)
        assert p.is_unclipped
        a, b = support_interval(S1)
        for idx in (0, 1):
            mass = quad_oracle(lambda y: lfd_densities(p, y)[idx], a, b)
            assert mass == pytest.approx(1.0, abs=1e-8)

    def test_symmetric_band(self):
        p = solve_lfd_eps(S1, 0.1)
        assert p.lower == pytest.approx(-p.upper, abs=1e-8)
        assert p.c0 == pytest.approx(p.c1, rel=1e-8)
        assert p.lower == pytest.approx(-math.log(p.c0), rel=1e-12)
        assert p.upper == pytest.approx(math.log(p.c1), rel=1e-12)

    @pytest.mark.parametrize("eps", [0.05, 0.1, 0.2])
    def test_normalization_scenario1(self, eps):
        p = solve_lfd_eps(S1, eps)
        a, b = support_interval(S1)
        for idx in (0, 1):
            mass = quad_oracle(lambda y: lfd_densities(p, y)[idx], a, b)
            assert mass == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("eps", [0.05, 0.1])
    def test_normalization_scenario2(self, eps):
        p = solve_lfd_eps(S2, eps)
        a, b = support_interval(S2)
        for idx in (0, 1):
            mass = quad_oracle(lambda y: lfd_densities(p, y)[idx], a, b)
            assert mass == pytest.approx(1.0, abs=1e-6)

    def test_band_narrows_with_eps(self):
        uppers = [solve_lfd_eps(S1, e).upper for e in (0.05, 0.1, 0.2, 0.3)]
        assert all(a > b for a, b in zip(uppers, uppers[1:]))

    def test_band_overlap_error(self):
        # heavy contamination leaves no valid clipping band for this test
        with pytest.raises(LfdBandError):
            solve_lfd_eps(S1, 0.45)

    def test_eps_validation(self):
        with pytest.raises(ValueError):
            solve_lfd_eps(S1, 0.5)
        with pytest.raises(ValueError):
            solve_lfd_eps(S1, -0.01)


class TestClippedLlr:
    def test_clamp_above(self):
        p = ClippedLrtParams(S1, 0.1, -2.0, 2.0)
        assert clipped_llr(p, S1, 3.0) == 2.0

    def test_interior_pass_through(self):
        p = ClippedLrtParams(S1, 0.1, -2.0, 2.0)
        assert clipped_llr(p, S1, 0.7) == pytest.approx(0.7)

    @pytest.mark.parametrize("test", [S1, S2])
    def test_matches_density_ratio(self, test):
        # log(q1/q0) must equal the clamped nominal ratio pointwise
        p = solve_lfd_eps(test, 0.1)
        ys = np.linspace(*support_interval(test), 4001)
        lq0, lq1 = lfd_log_densities(p, ys)
        assert np.max(np.abs((lq1 - lq0) - clipped_llr(p, test, ys))) < 1e-9

    def test_monotone_and_bounded(self):
        p = solve_lfd_eps(S1, 0.1)
        ys = np.linspace(-20, 20, 2001)
        vals = np.asarray(clipped_llr(p, S1, ys))
        assert (np.diff(vals) >= -1e-12).all()
        assert vals.min() >= p.lower - 1e-12 and vals.max() <= p.upper + 1e-12

    def test_unclipped_sentinel_is_identity(self):
        p = solve_lfd_eps(S1, 0.0)
        ys = np.linspace(-30, 30, 101)
        assert np.allclose(clipped_llr(p, S1, ys), llr(S1, ys))


class TestLlrCdf:
    @pytest.mark.parametrize("test", [S1, S2])
    def test_against_monte_carlo(self, test):
        rng = np.random.default_rng(77)
        n = 10**6
        for i in (0, 1):
            y = rng.normal(test.mean(i), test.std(i), n)
            vals = np.asarray(llr(test, y))
            for x in (-1.0, -0.3, 0.0, 0.5, 1.5):
                exact = llr_cdf(test, i, x)
                emp = (vals <= x).mean()
                se = math.sqrt(max(exact * (1 - exact), 1e-12) / n)
                assert emp == pytest.approx(exact, abs=4 * se + 1e-6)

    def test_support_edges(self):
        # the variance-shift ratio is bounded below; nothing sits beneath
        floor = 0.5 * math.log(S2.var0 / S2.var1)
        assert llr_cdf(S2, 0, floor - 1e-9) == 0.0
        assert llr_cdf(S2, 0, math.inf) == 1.0
        assert llr_cdf(S2, 0, -math.inf) == 0.0


class TestExcessMasses:
    def test_unclipped_all_interior(self):
        p = solve_lfd_eps(S1, 0.0)
        m = excess_masses(p)
        assert m.a0 == (0.0, 0.0) and m.a1 == (0.0, 0.0)

    def test_symmetry(self):
        p = solve_lfd_eps(S1, 0.1)
        m = excess_masses(p)
        assert m.a0[0] == pytest.approx(m.a1[1], abs=1e-12)
        assert m.a0[1] == pytest.approx(m.a1[0], abs=1e-12)

    def test_gaussian_cdf_oracle(self):
        # standalone evaluation of the printed tail expression
        p = solve_lfd_eps(S1, 0.1)
        m = excess_masses(p)
        mom = llr_moments(S1)
        for i, (mean, var) in ((0, (mom.mean0, mom.var0)), (1, (mom.mean1, mom.var1))):
            q = lambda x: 0.5 * math.erfc(x / math.sqrt(2.0))
            a0 = 0.9 * q(-(p.lower - mean) / var) + (0.1 if i else 0.0)
            a1 = 0.9 * q((p.upper - mean) / var) + (0.0 if i else 0.1)
            assert m.a0[i] == pytest.approx(a0, abs=1e-9)
            assert m.a1[i] == pytest.approx(a1, abs=1e-9)

    @pytest.mark.parametrize("mode", ["gaussian", "exact"])
    @pytest.mark.parametrize("eps", [0.05, 0.1, 0.2])
    def test_mass_conservation(self, mode, eps):
        p = solve_lfd_eps(S1, eps)
        m = excess_masses(p, mode=mode)
        width = p.upper - p.lower
        for i in (0, 1):
            total = m.a0[i] + m.a1[i] + m.a2[i] * width
            assert total == pytest.approx(1.0, abs=1e-9)

    def test_exact_mode_matches_simulation(self):
        rng = np.random.default_rng(5)
        p = solve_lfd_eps(S2, 0.1)
        m = excess_masses(p, mode="exact")
        n = 10**6
        for i in (0, 1):
            y = rng.normal(S2.mean(i), S2.std(i), n)
            vals = np.asarray(llr(S2, y))
            a0_sim = 0.9 * (vals <= p.lower).mean() + (0.1 if i else 0.0)
            a1_sim = 0.9 * (vals >= p.upper).mean() + (0.0 if i else 0.1)
            assert m.a0[i] == pytest.approx(a0_sim, abs=0.002)
            assert m.a1[i] == pytest.approx(a1_sim, abs=0.002)

    def test_degenerate_band_rejected_by_type(self):
        with pytest.raises(ValueError):
            ClippedLrtParams(S1, 0.1, 1.0, 1.0)
        with pytest.raises(ValueError):
            ClippedLrtParams(S1, 0.1, 2.0, -2.0)

    def test_mode_validation(self):
        p = solve_lfd_eps(S1, 0.1)
        with pytest.raises(ValueError):
            excess_masses(p, mode="nope")


class TestClippedMoments:
    def test_point_mass(self):
        from netsprt.lfd import ExcessMass

        p = ClippedLrtParams(S1, 0.1, -2.0, 3.0)
        m = ExcessMass((1.0, 0.0), (0.0, 1.0), (0.0, 0.0))
        cm = clipped_llr_moments(m, p)
        assert cm.mean0 == -2.0 and cm.var0 == pytest.approx(0.0, abs=1e-12)
        assert cm.mean1 == 3.0 and cm.var1 == pytest.approx(0.0, abs=1e-12)

    def test_uniform_interior(self):
        from netsprt.lfd import ExcessMass

        c0, c1 = -2.0, 3.0
        level = 1.0 / (c1 - c0)
        p = ClippedLrtParams(S1, 0.1, c0, c1)
        m = ExcessMass((0.0, 0.0), (0.0, 0.0), (level, level))
        cm = clipped_llr_moments(m, p)
        assert cm.mean0 == pytest.approx((c0 + c1) / 2)
        assert cm.var0 == pytest.approx((c1 - c0) ** 2 / 12)

    def test_moment_algebra_against_mixture_simulation(self):
        # simulate the approximating law itself: two edge deltas plus a
        # uniform interior at the computed masses
        rng = np.random.default_rng(21)
        p = solve_lfd_eps(S1, 0.1)
        m = excess_masses(p)
        cm = clipped_llr_moments(m, p)
        n = 10**6
        width = p.upper - p.lower
        for i, (mean_f, var_f) in ((0, (cm.mean0, cm.var0)), (1, (cm.mean1, cm.var1))):
            u = rng.random(n)
            draw = np.where(
                u < m.a0[i],
                p.lower,
                np.where(u < m.a0[i] + m.a1[i], p.upper, rng.uniform(p.lower, p.upper, n)),
            )
            assert draw.mean() == pytest.approx(mean_f, abs=4 * width / math.sqrt(n))
            assert draw.var() == pytest.approx(var_f, rel=0.01)

    def test_worst_case_simulation_gap(self):
        # the uniform-interior approximation is deliberately coarse: against
        # 1e6 worst-case draws (nominal clipped, outlier mass at the adverse
        # edge) the exact-edge-mass moments sit within ~20% / ~10%
        rng = np.random.default_rng(22)
        p = solve_lfd_eps(S1, 0.1)
        cm = clipped_llr_moments(excess_masses(p, mode="exact"), p)
        n = 10**6
        for i, edge in ((0, p.upper), (1, p.lower)):
            y = rng.normal(S1.mean(i), S1.std(i), n)
            vals = np.asarray(clipped_llr(p, S1, y))
            vals[rng.random(n) < 0.1] = edge
            mean_f = cm.mean1 if i else cm.mean0
            var_f = cm.var1 if i else cm.var0
            assert abs(mean_f - vals.mean()) / abs(vals.mean()) < 0.20
            assert abs(var_f - vals.var()) / vals.var() < 0.10

    def test_separation_after_clipping(self):
        for eps in (0.05, 0.1, 0.2):
            p = solve_lfd_eps(S1, eps)
            cm = clipped_llr_moments(excess_masses(p), p)
            assert cm.mean0 < 0.0 < cm.mean1
            assert cm.var0 > 0 and cm.var1 > 0

    def test_unclipped_degrades_to_plain_moments(self):
        p = solve_lfd_eps(S1, 0.0)
        cm = clipped_llr_moments(excess_masses(p), p)
        plain = llr_moments(S1)
        assert (cm.mean0, cm.mean1, cm.var0, cm.var1) == (
            plain.mean0,
            plain.mean1,
            plain.var0,
            plain.var1,
        )


class TestAdaptiveSimpson:
    def test_polynomial_exact(self):
        # integral of x^3 - 2x over [-1, 2]: [x^4/4 - x^2] gives 0.75
        assert adaptive_simpson(lambda x: x**3 - 2 * x, -1.0, 2.0, 1e-12) == pytest.approx(
            0.75, abs=1e-10
        )

    def test_gaussian_mass(self):
        f = lambda x: math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
        assert adaptive_simpson(f, -10, 10, 1e-12) == pytest.approx(1.0, abs=1e-10)

    def test_kinked_integrand(self):
        f = lambda x: max(0.0, x)
        assert adaptive_simpson(f, -1.0, 1.0, 1e-12) == pytest.approx(0.5, abs=1e-9)
