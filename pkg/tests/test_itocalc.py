import numpy as np
import pytest

from fracbm.gaussianpaths import (
    GridSpec,
    RngSeed,
    SamplePath,
    bm_ensemble,
    generate_bm,
    generate_fbm_circulant,
)
from fracbm.itocalc import (
    REPLICATE_FLOOR,
    AdaptedIntegrand,
    AdaptednessError,
    ItoProcess,
    PathPrefix,
    SimpleProcess,
    endpoint_comparison,
    isometry_check,
    ito_formula_apply,
    ito_integral,
    ito_integral_qv,
)

GRID = GridSpec(1.0, 2**14)


class TestAdaptedIntegrand:
    def test_grid_eval_agrees_with_the_rule(self):
        p = generate_bm(GridSpec(1.0, 128), RngSeed(20, 0))
        f = AdaptedIntegrand.deterministic(lambda t: np.cos(t))
        fast = f.on_nodes(p.times, p.values)
        slow = AdaptedIntegrand(f.rule).on_nodes(p.times, p.values)
        assert np.abs(fast - slow).max() <= 1e-14

    def test_prefix_blocks_look_ahead(self):
        prefix = PathPrefix(np.array([0.0, 0.5, 1.0]), np.array([0.0, 0.2, -0.1]))
        assert prefix.value_at(0.75) == pytest.approx(0.05)
        with pytest.raises(AdaptednessError):
            prefix.value_at(1.5)
        with pytest.raises(AdaptednessError):
            prefix.up_to(2.0)

    def test_peeking_integrand_raises(self):
        p = generate_bm(GridSpec(1.0, 64), RngSeed(20, 1))
        peeker = AdaptedIntegrand(lambda t, prefix: prefix.value_at(t + 0.1))
        with pytest.raises(AdaptednessError):
            ito_integral(peeker, p)

    def test_non_finite_integrand_rejected(self):
        p = generate_bm(GridSpec(1.0, 64), RngSeed(20, 2))
        bad = AdaptedIntegrand.deterministic(lambda t: np.where(t < 0.5, 0.0, np.inf))
        with pytest.raises(ValueError):
            ito_integral(bad, p)


class TestIntegralExactCases:
    def test_constant_integrand_telescopes(self):
        p = generate_bm(GRID, RngSeed(13, 0))
        v = ito_integral(AdaptedIntegrand.constant(2.5), p)
        assert abs(v - 2.5 * p.values[-1]) <= 1e-12

    def test_constant_over_a_sub_window(self):
        p = generate_bm(GRID, RngSeed(13, 0))
        sub = p.times[4096:12289]
        v = ito_integral(AdaptedIntegrand.constant(2.5), p, sub_partition=sub)
        assert abs(v - 2.5 * (p.values[12288] - p.values[4096])) <= 1e-12

    def test_left_sums_of_the_path_square_identity(self):
        # sum B dB = B(T)^2/2 - (sum dB^2)/2 holds per path, not just in law
        p = generate_bm(GRID, RngSeed(13, 1))
        lhs = ito_integral(AdaptedIntegrand.path_value(), p)
        rhs = 0.5 * p.values[-1] ** 2 - 0.5 * np.sum(np.diff(p.values) ** 2)
        assert abs(lhs - rhs) <= 1e-10

    def test_rejects_non_brownian_driver(self):
        g = generate_fbm_circulant(GridSpec(1.0, 256), 0.75, RngSeed(13, 2))
        with pytest.raises(ValueError, match="hurst 0.5"):
            ito_integral(AdaptedIntegrand.constant(1.0), g)

    def test_linearity(self):
        p = generate_bm(GRID, RngSeed(13, 3))
        fa = AdaptedIntegrand.deterministic(lambda t: np.cos(t))
        fb = AdaptedIntegrand.path_value()
        comb = AdaptedIntegrand(
            lambda t, prefix: 2.0 * np.cos(t) - 3.0 * prefix.latest,
            lambda times, values: 2.0 * np.cos(times) - 3.0 * values,
        )
        lhs = ito_integral(comb, p)
        rhs = 2.0 * ito_integral(fa, p) - 3.0 * ito_integral(fb, p)
        assert abs(lhs - rhs) <= 1e-12


class TestEnsembleChecks:
    def test_martingale_mean_is_statistically_zero(self):
        vals = [
            ito_integral(AdaptedIntegrand.path_value(), generate_bm(GridSpec(1.0, 2048), RngSeed(16, s)))
            for s in range(2000)
        ]
        se = np.std(vals, ddof=1) / np.sqrt(len(vals))
        assert abs(np.mean(vals)) <= 5.0 * se

    def test_endpoint_choice_splits_the_means(self):
        grid = GridSpec(2.0, 512)
        ens = bm_ensemble(grid, 17, 4000)
        mean_left, mean_right = endpoint_comparison(ens, grid, 2.0)
        assert abs(mean_left) <= 0.08
        assert abs(mean_right - 2.0) <= 0.08

    def test_degenerate_ensemble_gives_zeros(self):
        grid = GridSpec(2.0, 512)
        assert endpoint_comparison(np.zeros((2000, 513)), grid, 2.0) == (0.0, 0.0)

    def test_small_ensembles_warn(self):
        grid = GridSpec(1.0, 16)
        with pytest.warns(UserWarning, match=str(REPLICATE_FLOOR)):
            endpoint_comparison(np.zeros((10, 17)), grid, 1.0)

    @pytest.mark.parametrize(
        "f",
        [
            AdaptedIntegrand.constant(1.0),
            AdaptedIntegrand.deterministic(lambda t: t),
            AdaptedIntegrand.path_value(),
        ],
        ids=["one", "time", "path"],
    )
    def test_isometry(self, f):
        grid = GridSpec(1.0, 1024)
        ens = bm_ensemble(grid, 12, 3000)
        lhs, rhs, ci = isometry_check(f, ens, grid)
        assert abs(lhs - rhs) <= ci


class TestQuadraticVariationOfIntegral:
    def test_unit_integrand_reproduces_the_clock(self):
        p = generate_bm(GRID, RngSeed(13, 0))
        qv, target = ito_integral_qv(AdaptedIntegrand.constant(1.0), p)
        assert target == pytest.approx(1.0, abs=1e-12)
        assert abs(qv - 1.0) <= 0.05

    def test_path_integrand_tracks_the_compensator(self):
        gaps = []
        for s in range(100):
            p = generate_bm(GRID, RngSeed(18, s))
            qv, target = ito_integral_qv(AdaptedIntegrand.path_value(), p)
            gaps.append(abs(qv - target))
        assert np.median(gaps) <= 0.1

    def test_zero_integrand_is_exactly_zero(self):
        p = SamplePath(GridSpec(1.0, 64), np.zeros(65), 0.5)
        assert ito_integral_qv(AdaptedIntegrand.constant(0.0), p) == (0.0, 0.0)


class TestSimpleProcess:
    def test_step_integrand_matches_the_coarse_sum(self):
        p = generate_bm(GRID, RngSeed(19, 0))
        part = p.times[::64]
        sp = SimpleProcess(part, lambda i, ti, prefix: prefix.latest)
        fine = ito_integral(sp.as_integrand(), p)
        coarse = float(np.dot(p.values[::64][:-1], np.diff(p.values[::64])))
        assert abs(fine - coarse) <= 1e-10

    def test_repeated_times_contribute_nothing(self):
        p = generate_bm(GRID, RngSeed(19, 0))
        with_repeat = SimpleProcess(
            np.array([0.0, 0.25, 0.25, 0.5, 1.0]), lambda i, ti, prefix: prefix.latest
        )
        without = SimpleProcess(
            np.array([0.0, 0.25, 0.5, 1.0]), lambda i, ti, prefix: prefix.latest
        )
        a = ito_integral(with_repeat.as_integrand(), p)
        b = ito_integral(without.as_integrand(), p)
        assert a == b

    def test_decreasing_partition_rejected(self):
        with pytest.raises(ValueError):
            SimpleProcess(np.array([0.0, 0.5, 0.25]), lambda i, ti, prefix: 1.0)

    def test_refinement_cauchy_contraction(self):
        # left sums along nested meshes: successive differences shrink by a
        # solid factor once the mesh halves
        factors = []
        for s in range(20):
            p = generate_bm(GRID, RngSeed(15, s))
            sums = [
                ito_integral(AdaptedIntegrand.path_value(), p, sub_partition=p.times[::k])
                for k in (64, 32, 16, 8, 4, 2, 1)
            ]
            d = np.abs(np.diff(sums))
            factors.append(np.exp(np.mean(np.log(d[:-1] / d[1:]))))
        assert np.median(factors) >= 1.3


class TestItoFormula:
    def make_bm_process(self, stream):
        p = generate_bm(GRID, RngSeed(14, stream))
        return ItoProcess(
            0.0, AdaptedIntegrand.constant(0.0), AdaptedIntegrand.constant(1.0), p
        )

    def test_identity_map_is_exact(self):
        lhs, rhs = ito_formula_apply(
            lambda t, x: x,
            lambda t, x: 0.0,
            lambda t, x: 1.0,
            lambda t, x: 0.0,
            self.make_bm_process(0),
        )
        assert np.abs(lhs - rhs).max() <= 1e-10

    def test_product_with_time_needs_no_correction(self):
        lhs, rhs = ito_formula_apply(
            lambda t, x: t * x,
            lambda t, x: x,
            lambda t, x: t,
            lambda t, x: 0.0,
            self.make_bm_process(1),
        )
        assert np.abs(lhs - rhs).max() <= 0.01

    def test_half_square_needs_the_correction(self):
        proc = self.make_bm_process(2)
        lhs, rhs = ito_formula_apply(
            lambda t, x: 0.5 * x * x,
            lambda t, x: 0.0,
            lambda t, x: x,
            lambda t, x: 1.0,
            proc,
        )
        assert np.abs(lhs - rhs).max() <= 0.02
        # dropping the second-order term breaks the identity by ~t/2
        lhs2, rhs2 = ito_formula_apply(
            lambda t, x: 0.5 * x * x,
            lambda t, x: 0.0,
            lambda t, x: x,
            lambda t, x: 0.0,
            proc,
        )
        assert np.abs(lhs2 - rhs2).max() > 0.3

    def test_drift_only_process_is_a_line(self):
        p = generate_bm(GRID, RngSeed(14, 3))
        proc = ItoProcess(1.5, AdaptedIntegrand.constant(0.7), AdaptedIntegrand.constant(0.0), p)
        x, nu = proc.realize()
        assert np.abs(x - (1.5 + 0.7 * p.times)).max() <= 1e-12
        assert np.abs(nu).max() == 0.0

    def test_process_requires_brownian_driver(self):
        g = generate_fbm_circulant(GridSpec(1.0, 128), 0.75, RngSeed(14, 4))
        with pytest.raises(ValueError):
            ItoProcess(0.0, AdaptedIntegrand.constant(0.0), AdaptedIntegrand.constant(1.0), g)
