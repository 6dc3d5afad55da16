"""Monte Carlo generator of single-shot readout records.

Each shot draws a hidden qubit trajectory (a two-state continuous-time Markov
chain: e -> g at rate 1/T1 + gamma_mix_down, g -> e at rate gamma_mix_up),
solves the deterministic cavity response conditioned on that trajectory, and
samples the amplified quadrature in dt_bin time bins with white Gaussian
noise of variance sigma_bin^2 = 1/(4 eta * 2 pi kappa_p * dt_bin). That
variance is the unique choice for which the mode-matched integral
q_tau = sqrt(2 pi kappa_p) * sum Q_k w_k dt has Var[q_tau] = 1/(4 eta).

Shots are mutually independent and bit-reproducible: shot i uses its own
Philox generator keyed by (master_seed, i), so batches are identical for any
execution order or parallel split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from .dynamics import TWOPI, PulseEnvelope, TwoCavityModel, optimal_lo_phase
from .errors import ConfigError, FitError, GridError
from .params import DeviceParams, derive

#: one-sided z score of the 99% Gaussian CDF point
Z99 = 2.3263478740408408


def noise_sigma_bin(eta: float, kappa_p: float, dt_bin: float) -> float:
    """Per-bin quadrature noise standard deviation; kappa_p in ordinary Hz."""
    return 1.0 / math.sqrt(4.0 * eta * TWOPI * kappa_p * dt_bin)


@dataclass(frozen=True)
class ShotConfig:
    """Knobs of the stochastic part of the experiment."""

    n_shots: int
    master_seed: int = 0
    dt_bin: float = 8e-9
    p_thermal: float = 0.003
    gamma_mix_up: float = 0.0
    gamma_mix_down: float = 0.0
    preselect: bool = False
    prep_error: float = 0.0
    measure_duration: float | None = None
    premeasure_duration: float = 152e-9
    premeasure_window: float = 48e-9
    premeasure_amplitude: float = 1.0
    reset_gap: float = 100e-9
    prep_pulse_duration: float = 18e-9

    def __post_init__(self):
        if self.n_shots <= 0:
            raise ConfigError("n_shots must be positive")
        if self.dt_bin <= 0.0:
            raise ConfigError("dt_bin must be positive")
        for name in ("p_thermal", "prep_error"):
            p = getattr(self, name)
            if not (0.0 <= p <= 1.0):
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.gamma_mix_up < 0.0 or self.gamma_mix_down < 0.0:
            raise ConfigError("mixing rates must be non-negative")
        if not (0.0 < self.premeasure_window <= self.premeasure_duration):
            raise ConfigError("need 0 < premeasure_window <= premeasure_duration")


@dataclass
class ShotRecord:
    """One repetition: preparation label, binned samples, hidden diagnostics."""

    prep: str
    samples: np.ndarray
    jump_times: list = field(default_factory=list)
    preselect_value: float | None = None


class _ShotEngine:
    """Precomputed deterministic context shared by all shots of a batch."""

    def __init__(self, device: DeviceParams, pulse: PulseEnvelope, cfg: ShotConfig):
        self.device = device
        self.cfg = cfg
        self.derived = derive(device)
        self.model = TwoCavityModel(device, self.derived)

        duration = cfg.measure_duration
        if duration is None:
            duration = pulse.total_duration
        self.n_bins = int(math.floor(duration / cfg.dt_bin + 1e-9))
        if self.n_bins < 1:
            raise GridError("sampling window shorter than one bin")
        if pulse.total_duration < self.n_bins * cfg.dt_bin - 1e-12:
            raise GridError("pulse does not cover the sampling window")
        self.pulse = pulse
        self.bin_centers = (np.arange(self.n_bins) + 0.5) * cfg.dt_bin
        self.sigma_bin = noise_sigma_bin(device.eta, self.derived.kappa_p, cfg.dt_bin)

        fields = {s: self.model.trace(s, pulse, self.bin_centers) for s in (-1, +1)}
        phi = optimal_lo_phase(fields[+1][:, 1] - fields[-1][:, 1])
        rot = np.exp(-1j * phi)
        # orient the LO so the excited state sits on the high-q side
        contrast = float(np.sum(np.real(rot * (fields[+1][:, 1] - fields[-1][:, 1]))))
        if contrast < 0.0:
            rot = -rot
        self.phi_lo = phi
        self.rot = rot
        self.mean_bins = {
            s: np.real(rot * fields[s][:, 1]) for s in (-1, +1)
        }

        if cfg.preselect:
            self.pre_pulse = PulseEnvelope(
                kind="gated",
                amplitude=pulse.amplitude * cfg.premeasure_amplitude,
                total_duration=cfg.premeasure_duration,
            )
            self.n_pre = int(round(cfg.premeasure_duration / cfg.dt_bin))
            self.n_win = max(1, int(round(cfg.premeasure_window / cfg.dt_bin)))
            self.pre_centers = (np.arange(self.n_pre) + 0.5) * cfg.dt_bin
            pre_fields = {
                s: self.model.trace(s, self.pre_pulse, self.pre_centers)
                for s in (-1, +1)
            }
            self.pre_bins = {
                s: np.real(rot * pre_fields[s][:, 1]) for s in (-1, +1)
            }

        self.down_rate = 1.0 / device.T1 + cfg.gamma_mix_down
        self.up_rate = cfg.gamma_mix_up

    # -- trajectory machinery ------------------------------------------------

    def _jumps(self, rng, s: int, t0: float, t1: float):
        """Markov-chain jump times in [t0, t1); returns (jumps, final state)."""
        jumps = []
        t = t0
        while True:
            rate = self.down_rate if s == +1 else self.up_rate
            if rate <= 0.0:
                break
            t = t + rng.exponential(1.0 / rate)
            if t >= t1:
                break
            jumps.append((t, "eg" if s == +1 else "ge"))
            s = -s
        return jumps, s

    def _mean_samples(self, s0: int, jumps, pulse, centers, mean_bins):
        """Noise-free bin-center quadratures conditioned on a jump list."""
        if not jumps:
            return mean_bins[s0].copy()
        out = np.empty(len(centers))
        t_edges = [0.0] + [t for t, _ in jumps] + [centers[-1] + 1.0e-9]
        x = np.zeros(2, dtype=complex)
        s = s0
        idx = 0
        for a, b in zip(t_edges[:-1], t_edges[1:]):
            sel = (centers >= a - 1e-15) & (centers < b - 1e-15)
            ts = np.append(centers[sel], b)
            vals = self.model.trace(s, pulse, ts, x0=x, t0=a)
            n_sel = int(np.count_nonzero(sel))
            out[idx: idx + n_sel] = np.real(self.rot * vals[:n_sel, 1])
            idx += n_sel
            x = vals[-1]
            s = -s
        return out

    # -- one shot ------------------------------------------------------------

    def run_shot(self, prep: str, index: int) -> ShotRecord:
        if prep not in ("g", "e"):
            raise ConfigError(f"preparation must be 'g' or 'e', got {prep!r}")
        cfg = self.cfg
        rng = np.random.Generator(
            np.random.Philox(key=[cfg.master_seed & 0xFFFFFFFFFFFFFFFF, index])
        )
        s = +1 if rng.random() < cfg.p_thermal else -1

        q_p = None
        if cfg.preselect:
            s0 = s
            pre_jumps, s = self._jumps(rng, s, 0.0, cfg.premeasure_duration)
            pre_mean = self._mean_samples(
                s0, pre_jumps, self.pre_pulse, self.pre_centers, self.pre_bins
            )
            pre_samples = pre_mean + rng.standard_normal(self.n_pre) * self.sigma_bin
            q_p = float(np.mean(pre_samples[-self.n_win:]))
            # reset gap: cavity returns to vacuum, qubit only decays
            if s == +1 and rng.random() < 1.0 - math.exp(-cfg.reset_gap / self.device.T1):
                s = -1

        if prep == "e":
            if rng.random() >= cfg.prep_error:
                s = -s

        jumps, _ = self._jumps(rng, s, 0.0, self.n_bins * cfg.dt_bin)
        mean = self._mean_samples(s, jumps, self.pulse, self.bin_centers, self.mean_bins)
        samples = mean + rng.standard_normal(self.n_bins) * self.sigma_bin
        return ShotRecord(prep=prep, samples=samples, jump_times=jumps,
                          preselect_value=q_p)


def simulate_shot(device: DeviceParams, pulse: PulseEnvelope, cfg: ShotConfig,
                  prep: str, index: int = 0) -> ShotRecord:
    """Generate one shot; deterministic given (cfg.master_seed, index)."""
    return _ShotEngine(device, pulse, cfg).run_shot(prep, index)


def simulate_batch(device: DeviceParams, pulse: PulseEnvelope, cfg: ShotConfig,
                   prep: str | None = None) -> list[ShotRecord]:
    """Generate cfg.n_shots shots.

    prep None alternates g, e, g, e, ... (shot index parity); 'g' or 'e'
    prepares a single class. Order-independent: shot i depends only on
    (master_seed, i).
    """
    engine = _ShotEngine(device, pulse, cfg)
    out = []
    for i in range(cfg.n_shots):
        p = prep if prep is not None else ("g" if i % 2 == 0 else "e")
        out.append(engine.run_shot(p, i))
    return out


# ---------------------------------------------------------------------------
# preselection
# ---------------------------------------------------------------------------

def run_preselection(device: DeviceParams, cfg: ShotConfig, records):
    """Reject shots whose premeasurement flags an initially excited qubit.

    Fits a single Gaussian to the q_p histogram, thresholds at the 99% point
    of the fitted CDF (mu + 2.326 sigma) and drops records above it. Returns
    (surviving records, rejected fraction).
    """
    if len(records) < 100:
        raise FitError("preselection needs at least 100 records")
    q_p = np.array([r.preselect_value for r in records], dtype=float)
    if np.any(~np.isfinite(q_p)):
        raise FitError("records lack preselection values")

    med = float(np.median(q_p))
    iqr = float(np.subtract(*np.percentile(q_p, [75, 25])))
    sig0 = max(iqr / 1.349, 1e-12 * (1.0 + abs(med)))
    core = q_p[np.abs(q_p - med) < 4.0 * sig0]
    edges = np.histogram_bin_edges(core, bins=max(40, int(math.sqrt(len(core)))))
    counts, _ = np.histogram(core, bins=edges)
    centers = 0.5 * (edges[:-1] + edges[1:])

    def gauss(x, a, mu, sigma):
        return a * np.exp(-0.5 * ((x - mu) / sigma) ** 2)

    try:
        popt, _ = curve_fit(
            gauss, centers, counts,
            p0=[float(np.max(counts)), med, sig0],
            maxfev=5000,
        )
    except RuntimeError as exc:
        raise FitError(f"preselection Gaussian fit failed: {exc}") from exc
    mu, sigma = float(popt[1]), abs(float(popt[2]))
    threshold = mu + Z99 * sigma
    kept = [r for r in records if r.preselect_value <= threshold]
    rejected = 1.0 - len(kept) / len(records)
    return kept, rejected
