import math

import numpy as np
import pytest
from scipy.special import erfc

from conftest import bin_grid, make_device
from fastreadout.analysis import (FilterConfig, MixtureFit, build_weights,
                                  error_budget, fit_mixture,
                                  fit_shot_histograms, histogram_bins,
                                  integrate_batch, integrate_shot,
                                  overlap_model, overlap_vs_power)
from fastreadout.dynamics import (PulseEnvelope, SignalTrace, TWOPI,
                                  full_model_signal, mean_quadrature_traces,
                                  qss_steady_signal)
from fastreadout.errors import FitError, NoSignalError, TauRangeError
from fastreadout.params import derive
from fastreadout.shots import ShotConfig, ShotRecord, simulate_batch


@pytest.fixture(scope="module")
def reference_traces():
    dev = make_device()
    pulse = PulseEnvelope(kind="gated", total_duration=160e-9)
    times = np.arange(0.0, 160e-9, 0.5e-9)
    trace = full_model_signal(dev, pulse, times, method="exact")
    qt = mean_quadrature_traces(dev, pulse, times, method="exact")
    return dev, trace, qt


class TestWeights:
    def test_constant_difference(self):
        centers, _ = bin_grid(8)
        tau = 64e-9
        w = build_weights(centers, np.zeros(8), np.full(8, 2.5), tau)
        assert np.allclose(w.w, 1.0 / math.sqrt(tau))

    def test_unit_norm_postcondition(self):
        rng = np.random.default_rng(7)
        centers, _ = bin_grid(17)
        for _ in range(10):
            diff = rng.uniform(-3, 3, 17)
            if np.all(diff == 0):
                continue
            w = build_weights(centers, np.zeros(17), diff, 136e-9)
            assert np.sum(w.w ** 2) * w.dt == pytest.approx(1.0, rel=1e-9)
            assert np.all(w.w >= 0.0)

    def test_weight_peaks_at_tau_for_rising_signal(self, reference_traces):
        _, _, qt = reference_traces
        centers, idx = bin_grid(7)
        w = build_weights(centers, qt.q_g[idx], qt.q_e[idx], 56e-9)
        # ring-up: negligible weight at turn-on, peak (with a small
        # overshoot) in the settled half of the window
        assert w.w[0] < 0.05 * np.max(w.w)
        assert np.argmax(w.w) >= len(w.w) // 2
        assert w.w[-1] > 0.8 * np.max(w.w)

    def test_no_signal_raises(self):
        centers, _ = bin_grid(8)
        with pytest.raises(NoSignalError):
            build_weights(centers, np.ones(8), np.ones(8), 64e-9)

    def test_tau_beyond_support(self):
        centers, _ = bin_grid(8)
        with pytest.raises(TauRangeError):
            build_weights(centers, np.zeros(8), np.ones(8), 1e-6)


class TestIntegration:
    def test_zero_record(self):
        centers, _ = bin_grid(7)
        w = build_weights(centers, np.zeros(7), np.ones(7), 56e-9)
        rec = ShotRecord(prep="g", samples=np.zeros(7))
        assert integrate_shot(rec, w, 64.27e6) == 0.0

    def test_mean_difference_is_weighted_signal(self, reference_traces):
        # noise-free records at the two mean traces: q_e - q_g equals the
        # weighted integral of S
        dev, _, qt = reference_traces
        d = derive(dev)
        centers, idx = bin_grid(7)
        w = build_weights(centers, qt.q_g[idx], qt.q_e[idx], 56e-9)
        rec_g = ShotRecord(prep="g", samples=qt.q_g[idx])
        rec_e = ShotRecord(prep="e", samples=qt.q_e[idx])
        q_g = integrate_shot(rec_g, w, d.kappa_p)
        q_e = integrate_shot(rec_e, w, d.kappa_p)
        s_bins = math.sqrt(TWOPI * d.kappa_p) * np.abs(
            qt.q_e[idx][:7] - qt.q_g[idx][:7])
        expected = float(np.sum(s_bins * w.w) * w.dt)
        assert q_e - q_g == pytest.approx(expected, rel=1e-9)

    def test_short_record_rejected(self):
        centers, _ = bin_grid(7)
        w = build_weights(centers, np.zeros(7), np.ones(7), 56e-9)
        rec = ShotRecord(prep="g", samples=np.zeros(3))
        with pytest.raises(TauRangeError):
            integrate_shot(rec, w, 64.27e6)

    def test_batch_matches_single(self, reference_traces):
        dev, _, qt = reference_traces
        d = derive(dev)
        rng = np.random.default_rng(11)
        centers, idx = bin_grid(7)
        w = build_weights(centers, qt.q_g[idx], qt.q_e[idx], 56e-9)
        recs = [ShotRecord(prep="g", samples=rng.normal(size=7))
                for _ in range(5)]
        q, prep = integrate_batch(recs, w, d.kappa_p)
        for i, rec in enumerate(recs):
            assert q[i] == pytest.approx(integrate_shot(rec, w, d.kappa_p),
                                         rel=1e-12)
        assert list(prep) == ["g"] * 5


class TestMixtureFit:
    def synth(self, rng, n, mu_g=-1.0, mu_e=1.0, sigma=0.3, ge_frac=0.0):
        q_g = rng.normal(mu_g, sigma, n // 2)
        swap = rng.random(n // 2) < ge_frac
        q_e = np.where(swap, rng.normal(mu_g, sigma, n // 2),
                       rng.normal(mu_e, sigma, n // 2))
        q = np.concatenate([q_g, q_e])
        prep = np.array(["g"] * (n // 2) + ["e"] * (n // 2))
        return q, prep

    def test_round_trip_clean(self):
        q, prep = self.synth(np.random.default_rng(1), 30000)
        fit, *_ = fit_shot_histograms(q, prep)
        assert fit.mu_g == pytest.approx(-1.0, abs=0.02)
        assert fit.mu_e == pytest.approx(1.0, abs=0.02)
        assert fit.sigma_g == pytest.approx(0.3, rel=0.02)
        assert fit.sigma_e == pytest.approx(0.3, rel=0.02)

    def test_symmetric_threshold_at_midpoint(self):
        q, prep = self.synth(np.random.default_rng(2), 30000)
        fit, *_ = fit_shot_histograms(q, prep)
        assert fit.threshold == pytest.approx(0.0, abs=0.03)
        assert min(fit.mu_g, fit.mu_e) < fit.threshold < max(fit.mu_g, fit.mu_e)

    def test_injected_transition_amplitude(self):
        q, prep = self.synth(np.random.default_rng(3), 30000, ge_frac=0.05)
        fit, *_ = fit_shot_histograms(q, prep)
        frac = fit.A_ge / (fit.A_ge + fit.A_ee)
        assert frac == pytest.approx(0.05, abs=0.01)

    def test_too_few_counts(self):
        centers = np.linspace(-2, 2, 60)
        counts = np.full(60, 5.0)
        with pytest.raises(FitError):
            fit_mixture(centers, counts, counts)

    def test_histogram_bins_minimum(self):
        q = np.random.default_rng(4).normal(size=500)
        edges = histogram_bins(q, min_bins=60)
        assert len(edges) >= 61

    def test_zero_noise_degenerate_branch(self):
        q = np.array([-1.0] * 2000 + [1.0] * 2000)
        prep = np.array(["g"] * 2000 + ["e"] * 2000)
        fit, *_ = fit_shot_histograms(q, prep)
        assert fit.threshold == pytest.approx(0.0)
        bud = error_budget(q, prep, fit)
        assert bud.fidelity == 1.0
        assert bud.eps_g == bud.eps_e == 0.0


class TestErrorBudget:
    def test_identity_and_decomposition(self):
        rng = np.random.default_rng(5)
        q = np.concatenate([rng.normal(-1, 0.5, 20000),
                            rng.normal(1, 0.5, 20000)])
        prep = np.array(["g"] * 20000 + ["e"] * 20000)
        fit, *_ = fit_shot_histograms(q, prep)
        bud = error_budget(q, prep, fit)
        assert bud.fidelity == pytest.approx(1 - bud.eps_g - bud.eps_e, rel=1e-12)
        assert bud.eps_o == pytest.approx(bud.eps_o_g + bud.eps_o_e, rel=1e-12)
        # pure overlap case: empirical errors close to the analytic tails
        expected = 0.5 * erfc(1.0 / (0.5 * math.sqrt(2)))
        assert bud.eps_g == pytest.approx(expected, rel=0.2)
        assert bud.eps_o_g == pytest.approx(expected, rel=0.1)

    def test_affine_invariance(self):
        rng = np.random.default_rng(6)
        q = np.concatenate([rng.normal(-1, 0.4, 15000),
                            rng.normal(1, 0.4, 15000)])
        prep = np.array(["g"] * 15000 + ["e"] * 15000)
        fit, *_ = fit_shot_histograms(q, prep)
        bud = error_budget(q, prep, fit)
        a, b = -2.5, 0.7  # include a sign flip
        fit2, *_ = fit_shot_histograms(a * q + b, prep)
        bud2 = error_budget(a * q + b, prep, fit2)
        assert fit2.threshold == pytest.approx(a * fit.threshold + b, abs=0.02)
        assert bud2.fidelity == pytest.approx(bud.fidelity, abs=0.002)
        assert bud2.eps_g == pytest.approx(bud.eps_g, abs=0.002)
        assert bud2.eps_e == pytest.approx(bud.eps_e, abs=0.002)

    def test_t1_scaling_of_transition_error(self, gated_pulse):
        # excited-state transition error grows like 1 - exp(-tau/T1)
        results = {}
        for t1 in (7.6e-6, 3.8e-6):
            dev = make_device(T1=t1)
            cfg = ShotConfig(n_shots=30000, master_seed=13, p_thermal=0.0)
            recs = simulate_batch(dev, gated_pulse, cfg)
            d = derive(dev)
            times = np.arange(0.0, 160e-9, 0.5e-9)
            qt = mean_quadrature_traces(dev, gated_pulse, times, method="exact")
            centers, idx = bin_grid(7)
            w = build_weights(centers, qt.q_g[idx], qt.q_e[idx], 56e-9)
            q, prep = integrate_batch(recs, w, d.kappa_p)
            fit, *_ = fit_shot_histograms(q, prep)
            results[t1] = error_budget(q, prep, fit)
        assert results[3.8e-6].fidelity < results[7.6e-6].fidelity
        ratio = results[3.8e-6].eps_t_e / results[7.6e-6].eps_t_e
        expected = (1 - math.exp(-56e-9 / 3.8e-6)) / (1 - math.exp(-56e-9 / 7.6e-6))
        assert ratio == pytest.approx(expected, rel=0.35)


class TestOverlapModel:
    def test_zero_signal(self):
        times = np.linspace(0, 100e-9, 201)
        trace = SignalTrace(times=times, values=np.zeros_like(times), model="QSS")
        assert overlap_model(trace, 0.66, 56e-9) == pytest.approx(1.0)

    def test_matched_filter_steady_state_identity(self):
        # constant S: eps_o = erfc(sqrt(eta/2) S_ss sqrt(tau) / 2)
        s_ss = qss_steady_signal(2.5, -7.9e6, 37.5e6)
        times = np.linspace(0, 200e-9, 401)
        trace = SignalTrace(times=times, values=np.full_like(times, s_ss),
                            model="QSS")
        tau, eta = 56e-9, 0.66
        filt = FilterConfig(amp_bandwidth=None, dt_bin=None)
        expected = erfc(math.sqrt(eta / 2.0) * s_ss * math.sqrt(tau))
        assert overlap_model(trace, eta, tau, filt) == pytest.approx(
            expected, rel=1e-9)

    def test_reference_point_with_composed_filter(self, reference_traces):
        _, trace, _ = reference_traces
        eps = overlap_model(trace, 0.66, 56e-9, FilterConfig())
        assert 0.0024 <= eps <= 0.0054

    def test_monotone_in_tau(self, reference_traces):
        _, trace, _ = reference_traces
        taus = np.arange(24e-9, 137e-9, 8e-9)
        eps = [overlap_model(trace, 0.66, tau, FilterConfig()) for tau in taus]
        assert np.all(np.diff(eps) < 0)

    def test_power_scaling_monotone(self, reference_traces):
        _, trace, _ = reference_traces
        grid = np.array([1.0, 2.0, 4.0, 8.0])
        eps = overlap_vs_power(trace, 0.66, 56e-9, 2.5, grid)
        assert np.all(np.diff(eps) < 0)

    def test_efficiency_ordering(self, reference_traces):
        _, trace, _ = reference_traces
        grid = np.array([1.0, 2.5, 5.0])
        lo = overlap_vs_power(trace, 0.66, 56e-9, 2.5, grid)
        hi = overlap_vs_power(trace, 1.0, 56e-9, 2.5, grid)
        assert np.all(hi < lo)

    def test_power_curve_consistent_with_single_point(self, reference_traces):
        _, trace, _ = reference_traces
        eps_curve = overlap_vs_power(trace, 0.66, 56e-9, 2.5, np.array([2.5]))
        eps_single = overlap_model(trace, 0.66, 56e-9)
        assert eps_curve[0] == pytest.approx(eps_single, rel=1e-12)


class TestMonteCarloAgreement:
    def test_overlap_matches_analytic(self, gated_pulse):
        # transitions disabled: empirical misassignment equals the analytic
        # overlap error within 3 binomial standard errors
        dev = make_device(T1=1.0)
        cfg = ShotConfig(n_shots=100000, master_seed=101, p_thermal=0.0)
        recs = simulate_batch(dev, gated_pulse, cfg)
        d = derive(dev)
        times = np.arange(0.0, 160e-9, 0.5e-9)
        trace = full_model_signal(dev, gated_pulse, times, method="exact")
        qt = mean_quadrature_traces(dev, gated_pulse, times, method="exact")
        centers, idx = bin_grid(17)
        filt = FilterConfig(amp_bandwidth=None, bin_mode="center")
        n_class = cfg.n_shots // 2
        for tau in (24e-9, 48e-9, 64e-9, 136e-9):
            w = build_weights(centers, qt.q_g[idx], qt.q_e[idx], tau)
            q, prep = integrate_batch(recs, w, d.kappa_p)
            fit, *_ = fit_shot_histograms(q, prep)
            bud = error_budget(q, prep, fit)
            eps_mc = bud.eps_g + bud.eps_e
            eps_th = overlap_model(trace, dev.eta, tau, filt)
            se = math.sqrt(2.0 * max(eps_th * (1 - eps_th), 1.0 / n_class)
                           / n_class)
            assert abs(eps_mc - eps_th) <= 3 * se
