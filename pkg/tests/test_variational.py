import math

import numpy as np
import pytest

from gnls import (
    ModelParams,
    RngStream,
    TorusGeometry,
    build_bump,
    bump_norm_scan,
    divergence_scan,
    drift_cost,
    objective_estimate,
    ou_gap_oracle,
    simulate_drift,
    simulate_ou_gap,
    stability_dt,
    to_grid,
)
from gnls.spectral import TWO_PI
from gnls.variational import VariationalConfig, bump_coeffs


def make_params(n_cut, alpha=2.0, beta=0.5, gamma=-1.0, n_max=None):
    geo = TorusGeometry(d=1, n_max=n_max or 2 * n_cut, oversampling=2.0)
    return ModelParams(d=1, alpha=alpha, beta=beta, gamma=gamma, n_cut=n_cut, geometry=geo)


class TestBump:
    def test_l2_mass_exact(self):
        geo = TorusGeometry(d=1, n_max=64)
        for n in (1, 8, 32):
            b = build_bump(n, 0.7, geo)
            assert np.sum(np.abs(b.field.coeffs) ** 2) == pytest.approx(
                1.0 / math.pi, abs=1e-14
            )

    def test_real_on_grid(self):
        geo = TorusGeometry(d=1, n_max=32)
        b = build_bump(8, 2.1, geo)
        vals = to_grid(b.field).values
        assert np.max(np.abs(vals.imag)) < 1e-12

    def test_peak_value(self):
        geo = TorusGeometry(d=1, n_max=64, oversampling=8.0)
        n = 16
        x0 = geo.x[40]  # grid-aligned center so the peak is sampled exactly
        b = build_bump(n, x0, geo)
        vals = to_grid(b.field).values.real
        assert vals[40] == pytest.approx(math.sqrt(n) / math.pi, rel=1e-12)

    def test_translation_equivariance(self):
        geo = TorusGeometry(d=1, n_max=32)
        shift = geo.x[12]
        a = build_bump(8, shift, geo).field
        b = build_bump(8, 0.0, geo).field
        translated = b.coeffs * np.exp(-1j * geo.modes * shift)
        assert np.max(np.abs(a.coeffs - translated)) < 1e-14

    def test_spectral_support_annulus(self):
        geo = TorusGeometry(d=1, n_max=32)
        b = build_bump(8, 0.0, geo)
        inside = (np.abs(geo.modes) > 8) & (np.abs(geo.modes) <= 16)
        assert np.all(b.field.coeffs[~inside] == 0)
        assert np.all(b.field.coeffs[inside] != 0)

    def test_geometry_too_small(self):
        geo = TorusGeometry(d=1, n_max=8)
        with pytest.raises(ValueError):
            build_bump(8, 0.0, geo)


class TestBumpScan:
    def test_scaling_exponents(self):
        scan = bump_norm_scan([8, 16, 32, 64, 128, 256, 512], [1.0])
        assert np.max(np.abs(scan.l2_sq - 1.0 / math.pi)) < 1e-12
        assert 0.45 <= scan.sup_exponent <= 0.55
        ratios = scan.sobolev_ratio[1.0]
        assert np.max(ratios) < 2.0 * np.min(ratios)  # bounded, no growth
        assert np.all(scan.near_peak_min > 0.25)  # concentration bound


class TestDriftPaths:
    def test_deterministic_replay(self):
        p = make_params(8)
        cfg = VariationalConfig(params=p, k_mass=1.0, l_clip=10.0, eta=0.5, m=1)
        a = simulate_drift(cfg, RngStream(3))
        b = simulate_drift(cfg, RngStream(3))
        assert np.array_equal(a.z_path, b.z_path)
        assert np.array_equal(a.b_path, b.b_path)

    def test_starts_at_zero_and_shapes(self):
        p = make_params(8)
        cfg = VariationalConfig(params=p, k_mass=1.0, l_clip=10.0, eta=0.5, m=1)
        path = simulate_drift(cfg, RngStream(4))
        assert np.all(path.z_path[0] == 0)
        assert np.all(path.b_path[0] == 0)
        assert path.z_path.shape[1] == path.active_modes.size == 17
        assert path.times[0] == 0.0 and path.times[-1] == 1.0

    def test_stability_rule(self):
        p = make_params(16, alpha=2.0)
        # fastest rate is N^(alpha/2) = 16 at the zero mode
        assert stability_dt(p) == pytest.approx(min(1e-3, 1.0 / 160.0))
        p64 = make_params(64, alpha=2.5)
        assert stability_dt(p64) == pytest.approx(1.0 / (10 * 64**1.25))

    def test_gap_oracle_small_case(self):
        p = make_params(4)
        oracle = ou_gap_oracle(p)
        vals = simulate_ou_gap(p, 4000, RngStream(5), scheme="exact")
        est, se = vals.mean(), vals.std(ddof=1) / math.sqrt(len(vals))
        assert abs(est - oracle) <= 3 * se

    def test_gap_decreases_with_cutoff(self):
        oracles = [ou_gap_oracle(make_params(n)) for n in (4, 16, 64)]
        assert oracles[0] > oracles[1] > oracles[2]

    def test_euler_and_exact_agree_in_distribution(self):
        p = make_params(8)
        a = simulate_ou_gap(p, 4000, RngStream(6), scheme="euler")
        b = simulate_ou_gap(p, 4000, RngStream(7), scheme="exact")
        se = math.hypot(a.std(ddof=1) / 63.2, b.std(ddof=1) / 63.2)
        assert abs(a.mean() - b.mean()) <= 4 * se


class TestDriftCost:
    def test_pure_bump_cost_closed_form(self):
        p = make_params(8)
        cfg = VariationalConfig(params=p, k_mass=1.0, l_clip=10.0, eta=0.7, m=1)
        path = simulate_drift(cfg, RngStream(8))
        # suppress the stochastic part: cost reduces to the bump term exactly
        path.z_path[:] = 0.0
        f = bump_coeffs(p.geometry, p.n_cut, 0.0)
        h_half_sq = float(np.sum(p.geometry.bracket(p.alpha) * np.abs(f) ** 2))
        assert drift_cost(path, cfg) == pytest.approx(0.5 * 0.7**2 * h_half_sq, rel=1e-12)

    def test_cost_nonnegative_and_grows_with_eta(self):
        p = make_params(8)
        costs = []
        for eta in (0.1, 0.5, 1.0):
            cfg = VariationalConfig(params=p, k_mass=1.0, l_clip=10.0, eta=eta, m=1)
            path = simulate_drift(cfg, RngStream(9))
            costs.append(drift_cost(path, cfg))
        assert all(c > 0 for c in costs)
        assert costs[0] < costs[1] < costs[2]

    def test_cost_growth_exponent(self):
        # ensemble mean cost grows no faster than max(d + alpha/2, alpha)
        means = []
        ladder = (4, 8, 16, 32)
        for n in ladder:
            p = make_params(n)
            cfg = VariationalConfig(params=p, k_mass=1.0, l_clip=10.0, eta=0.5, m=1)
            reps = [
                drift_cost(simulate_drift(cfg, RngStream(20 + r, n)), cfg)
                for r in range(4)
            ]
            means.append(np.mean(reps))
        slope = np.polyfit(np.log(ladder), np.log(means), 1)[0]
        assert slope <= max(1.0 + 2.0 / 2.0, 2.0) + 0.2


class TestObjective:
    def test_defocusing_control_nonnegative(self):
        p = make_params(8, gamma=1.0)
        cfg = VariationalConfig(params=p, k_mass=2.0, l_clip=50.0, eta=0.3, m=200)
        rep = objective_estimate(cfg, RngStream(10))
        assert rep.estimate >= 0.0

    def test_indicator_frequency_reasonable(self):
        # eta << K^2 keeps the shifted field inside the mass ball
        p = make_params(16, gamma=-1.0)
        cfg = VariationalConfig(params=p, k_mass=2.0, l_clip=1e4, eta=0.3, m=400)
        rep = objective_estimate(cfg, RngStream(11))
        assert rep.indicator_freq >= 0.5

    def test_focusing_objective_decreases_along_cutoff_ladder(self):
        # the bump peak contributes exp(~beta eta^2 N / pi^2) to the clipped
        # potential, overtaking the N^alpha drift cost once eta is large
        ests, ses = [], []
        eta = 4.0
        for n in (8, 16, 32):
            p = make_params(n, gamma=-1.0, beta=0.5)
            l_clip = 100.0 * math.exp(0.9 * 0.5 * eta**2 * n / math.pi**2)
            cfg = VariationalConfig(params=p, k_mass=3.5, l_clip=l_clip, eta=eta, m=400)
            rep = objective_estimate(cfg, RngStream(12, n))
            ests.append(rep.estimate)
            ses.append(rep.stderr)
        assert ests[0] > ests[1] > ests[2]
        # trend significance: last vs first separated well beyond noise
        assert (ests[2] - ests[0]) / math.hypot(ses[0], ses[2]) < -2.33


class TestDivergenceScan:
    def test_focusing_trend(self):
        # a mass cutoff of K = 3 leaves room for the clipped weight to grow
        # with the clip (K = 1 suppresses every sample beyond V ~ 10)
        p = make_params(16, gamma=-1.0, beta=0.5, n_max=16)
        scan = divergence_scan(p, -1.0, 3.0, [10.0, 100.0, 1000.0, 10000.0], 4000, RngStream(13))
        assert scan.trend_pvalue < 0.01
        assert scan.estimates[1] > scan.estimates[0]

    def test_focusing_saturates_beyond_potential_bound(self):
        # on {||u|| <= K} the potential is bounded by Vol*exp(beta (2N+1) K^2 / Vol):
        # clips above that bound cannot change a single sample, so the upper
        # ladder estimates coincide bit for bit
        p = make_params(16, gamma=-1.0, beta=0.5, n_max=16)
        scan = divergence_scan(p, -1.0, 1.0, [100.0, 1000.0, 10000.0], 2000, RngStream(14))
        bound = TWO_PI * math.exp(0.5 * 33 * 1.0 / TWO_PI)
        assert bound < 100.0
        assert scan.estimates[0] == scan.estimates[1] == scan.estimates[2]

    def test_defocusing_control_saturates(self):
        p = make_params(16, gamma=1.0, beta=0.5, n_max=16)
        scan = divergence_scan(p, 1.0, 1.0, [10.0, 100.0, 1000.0, 10000.0], 3000, RngStream(15))
        assert scan.saturated

    def test_dropping_mass_cutoff_increases_estimates(self):
        p = make_params(16, gamma=-1.0, beta=0.5, n_max=16)
        with_k = divergence_scan(p, -1.0, 1.0, [10.0, 100.0], 2000, RngStream(16))
        without = divergence_scan(p, -1.0, None, [10.0, 100.0], 2000, RngStream(16))
        assert np.all(without.estimates > with_k.estimates)
