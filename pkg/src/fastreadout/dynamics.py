"""Deterministic readout-signal dynamics.

Two models of the state-dependent output signal S(t):

* a quasi-steady-state (QSS) closed form for a single driven cavity, valid
  when the Purcell filter adiabatically follows the readout resonator, and
* the full two-cavity linear model (readout resonator + Purcell filter),
  integrated with fixed-step RK4 or solved exactly segment by segment via
  the eigendecomposition of the (time-independent) system matrix.

All public inputs are ordinary frequencies in Hz; the angular conversion
happens here. Signal values S(t) carry the angular convention
S = sqrt(2 pi kappa_p) |Q_e - Q_g| (units 1/sqrt(s)); `to_sqrt_mhz`
converts to the ordinary-frequency sqrt(MHz) numbers quoted for S_ss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GridError, PhotonCeilingError, TauRangeError
from .params import DeviceParams, DerivedParams, derive
from .search import golden_section_max

TWOPI = 2.0 * math.pi

#: default internal RK4 step (s); stiff-free at these linewidths and
#: fixed-step for bit-reproducible traces
DEFAULT_RK4_STEP = 0.05e-9

#: default high-power-segment amplitude multiplier of the two-step pulse
DEFAULT_BOOST_FACTOR = 2.5
#: default high-power-segment duration of the two-step pulse (s)
DEFAULT_BOOST_DURATION = 4e-9


def to_sqrt_mhz(s):
    """Convert a signal from 1/sqrt(s) (angular) to sqrt(MHz) (ordinary)."""
    return np.asarray(s) / math.sqrt(TWOPI * 1e6)


@dataclass(frozen=True)
class PulseEnvelope:
    """Readout drive envelope: square ('gated') or boosted ('two_step')."""

    kind: str = "gated"
    amplitude: float = 1.0
    boost_factor: float = DEFAULT_BOOST_FACTOR
    boost_duration: float = DEFAULT_BOOST_DURATION
    total_duration: float = 300e-9
    start_time: float = 0.0

    def __post_init__(self):
        if self.kind not in ("gated", "two_step"):
            raise ConfigError(f"unknown pulse kind {self.kind!r}")
        if self.kind == "gated":
            object.__setattr__(self, "boost_factor", 1.0)
        if self.amplitude < 0.0 or self.boost_factor < 0.0:
            raise ConfigError("pulse amplitudes must be non-negative")
        if not (0.0 <= self.boost_duration < self.total_duration):
            raise ConfigError("need 0 <= boost_duration < total_duration")

    def segments(self):
        """Constant-amplitude pieces as (t_start, t_end, amplitude) triples."""
        t0 = self.start_time
        out = []
        if self.kind == "two_step" and self.boost_duration > 0.0:
            out.append((t0, t0 + self.boost_duration, self.amplitude * self.boost_factor))
            out.append((t0 + self.boost_duration, t0 + self.total_duration, self.amplitude))
        else:
            out.append((t0, t0 + self.total_duration, self.amplitude))
        return out

    def envelope(self, t):
        """Drive amplitude at time(s) t."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for a, b, amp in self.segments():
            out = np.where((t >= a) & (t < b), amp, out)
        return out


@dataclass
class CavityState:
    """Instantaneous complex field amplitudes of resonator and filter."""

    alpha_field: complex
    beta_field: complex
    t: float


@dataclass
class SignalTrace:
    """S(t) samples on a uniform time grid; model is 'QSS' or 'full'."""

    times: np.ndarray
    values: np.ndarray
    model: str

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


# ---------------------------------------------------------------------------
# quasi-steady-state closed form (single effective cavity)
# ---------------------------------------------------------------------------

def qss_steady_signal(n_drive: float, chi: float, kappa_eff: float) -> float:
    """Steady-state signal of the QSS model, in 1/sqrt(s) (angular)."""
    r2 = (2.0 * chi / kappa_eff) ** 2
    ca = TWOPI * chi
    ka = TWOPI * kappa_eff
    return math.sqrt(16.0 * n_drive * ca * ca / ka / (1.0 + r2))


def qss_signal(n_drive: float, chi: float, kappa_eff: float, t):
    """QSS signal S(t) for a gated pulse starting at t = 0.

    Exact solution of the driven one-cavity equation of motion,
    S(t) = S_ss / (2|r|) *
    |2r - exp(-pi kappa t) (sin(2 pi chi t) + 2 r cos(2 pi chi t))|
    with r = chi/kappa, which vanishes at t = 0 as the physical signal must.
    """
    t = np.asarray(t, dtype=float)
    r = chi / kappa_eff
    sss = qss_steady_signal(n_drive, chi, kappa_eff)
    damp = np.exp(-math.pi * kappa_eff * t)
    bracket = np.abs(
        2.0 * r - damp * (np.sin(TWOPI * chi * t) + 2.0 * r * np.cos(TWOPI * chi * t))
    )
    return sss / (2.0 * abs(r)) * bracket


# ---------------------------------------------------------------------------
# full two-cavity model
# ---------------------------------------------------------------------------

class TwoCavityModel:
    """Linear input-output model of resonator + Purcell filter.

    State vector x = (alpha, beta). For qubit state s in {-1 (g), +1 (e)}:

        d alpha/dt = -i (delta_r + s chi_a) alpha - (gamma_a/2) alpha - i J_a beta
        d beta/dt  = -i delta_pf beta - (kappa_pa/2) beta - i J_a alpha
                     + sqrt(kappa_pa) eps(t)

    with all rates angular. Pulse amplitude 1 is normalized so that the
    mean steady-state resonator photon number of the two qubit states
    equals n_drive at the symmetric drive point omega_d = omega_r.
    """

    def __init__(self, device: DeviceParams, derived: DerivedParams | None = None,
                 photon_ceiling: float = 100.0):
        self.device = device
        self.derived = derived if derived is not None else derive(device)
        self.photon_ceiling = photon_ceiling

        self.chi_a = TWOPI * self.derived.chi
        self.J_a = TWOPI * device.J
        self.kappa_pa = TWOPI * self.derived.kappa_p
        self.gamma_a = TWOPI * device.gamma_int
        self.delta_r_a = TWOPI * (device.omega_r - device.omega_d)
        self.delta_pf_a = TWOPI * (device.omega_p - device.omega_d)

        self._b = np.array([0.0, math.sqrt(self.kappa_pa)], dtype=complex)
        self._A = {s: self._matrix(s, symmetric=False) for s in (-1, +1)}
        self._eig = {}
        for s in (-1, +1):
            lam, V = np.linalg.eig(self._A[s])
            self._eig[s] = (lam, V, np.linalg.inv(V))

        # drive normalization at the symmetric point omega_d = omega_r
        n_mean = 0.0
        for s in (-1, +1):
            xs = np.linalg.solve(self._matrix(s, symmetric=True), -self._b)
            n_mean += 0.5 * abs(xs[0]) ** 2
        if device.n_drive > 0.0 and n_mean > 0.0:
            self.eps0 = math.sqrt(device.n_drive / n_mean)
        else:
            self.eps0 = 0.0

    def _matrix(self, s: int, symmetric: bool) -> np.ndarray:
        dr = 0.0 if symmetric else self.delta_r_a
        dpf = (self.delta_pf_a - self.delta_r_a) if symmetric else self.delta_pf_a
        return np.array(
            [
                [-1j * (dr + s * self.chi_a) - self.gamma_a / 2.0, -1j * self.J_a],
                [-1j * self.J_a, -1j * dpf - self.kappa_pa / 2.0],
            ],
            dtype=complex,
        )

    def steady_state(self, s: int, eps: float) -> np.ndarray:
        """Exact steady state (d/dt = 0) for a constant drive eps."""
        if eps == 0.0:
            return np.zeros(2, dtype=complex)
        return np.linalg.solve(self._A[s], -self._b * eps)

    def propagate(self, s: int, x: np.ndarray, dt: float) -> np.ndarray:
        """Homogeneous evolution of x over dt for qubit state s."""
        lam, V, Vi = self._eig[s]
        return V @ (np.exp(lam * dt) * (Vi @ x))

    def trace(self, s: int, pulse: PulseEnvelope, times: np.ndarray,
              x0: np.ndarray | None = None, t0: float = 0.0) -> np.ndarray:
        """Exact fields at `times` (>= t0) starting from x0 at t0.

        Piecewise-constant drive is handled segment by segment with the
        closed-form solution of the linear system.
        """
        times = np.asarray(times, dtype=float)
        if len(times) == 0:
            return np.empty((0, 2), dtype=complex)
        x = np.zeros(2, dtype=complex) if x0 is None else np.array(x0, dtype=complex)
        out = np.empty((len(times), 2), dtype=complex)
        lam, V, Vi = self._eig[s]

        t_max = float(times[-1])
        # constant-drive intervals covering [t0, t_max]
        bounds = sorted({a for a, _, _ in pulse.segments()}
                        | {b for _, b, _ in pulse.segments()})
        edges = [t0] + [b for b in bounds if t0 + 1e-15 < b < t_max - 1e-15] + [t_max]
        idx = 0
        t_cur = t0
        for a, b in zip(edges[:-1], edges[1:]):
            eps = self.eps0 * float(pulse.envelope(0.5 * (a + b)))
            xss = self.steady_state(s, eps)
            c = Vi @ (x - xss)
            while idx < len(times) and times[idx] <= b + 1e-15:
                out[idx] = xss + V @ (np.exp(lam * (times[idx] - t_cur)) * c)
                idx += 1
            x = xss + V @ (np.exp(lam * (b - t_cur)) * c)
            t_cur = b
        return out

    def rk4_trace(self, s: int, pulse: PulseEnvelope, times: np.ndarray,
                  max_step: float = DEFAULT_RK4_STEP) -> np.ndarray:
        """Classical fixed-step RK4 integration from vacuum at times[0]."""
        times = np.asarray(times, dtype=float)
        dt = times[1] - times[0]
        nsub = max(1, int(math.ceil(dt / max_step - 1e-12)))
        h = dt / nsub
        A = self._A[s]
        b = self._b

        def f(t, y):
            return A @ y + b * (self.eps0 * float(pulse.envelope(t)))

        out = np.empty((len(times), 2), dtype=complex)
        y = np.zeros(2, dtype=complex)
        out[0] = y
        t = times[0]
        for i in range(1, len(times)):
            for _ in range(nsub):
                k1 = f(t, y)
                k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
                k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
                k4 = f(t + h, y + h * k3)
                y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                t += h
            out[i] = y
        return out

    def check_ceiling(self, fields: np.ndarray):
        n_max = float(np.max(np.abs(fields[:, 0]) ** 2))
        if n_max > self.photon_ceiling:
            raise PhotonCeilingError(
                f"resonator photon number {n_max:.1f} exceeds ceiling "
                f"{self.photon_ceiling:g}"
            )


def full_model_signal(device: DeviceParams, pulse: PulseEnvelope, times,
                      derived: DerivedParams | None = None,
                      photon_ceiling: float = 100.0,
                      method: str = "rk4") -> SignalTrace:
    """S(t) = sqrt(kappa_pa) |beta_e(t) - beta_g(t)| from the two-cavity model."""
    times = np.asarray(times, dtype=float)
    if len(times) < 2:
        raise GridError("need at least two grid points")
    dt = times[1] - times[0]
    if dt > 0.5e-9 + 1e-15:
        raise GridError(f"grid step {dt:g} s exceeds 0.5 ns")
    model = TwoCavityModel(device, derived, photon_ceiling)
    if method == "rk4":
        xg = model.rk4_trace(-1, pulse, times)
        xe = model.rk4_trace(+1, pulse, times)
    elif method == "exact":
        xg = model.trace(-1, pulse, times)
        xe = model.trace(+1, pulse, times)
    else:
        raise ConfigError(f"unknown method {method!r}")
    model.check_ceiling(xg)
    model.check_ceiling(xe)
    values = math.sqrt(model.kappa_pa) * np.abs(xe[:, 1] - xg[:, 1])
    return SignalTrace(times=times, values=values, model="full")


@dataclass
class QuadratureTraces:
    """Mean amplified-quadrature responses for both preparations."""

    times: np.ndarray
    q_g: np.ndarray
    q_e: np.ndarray
    phi_lo: float
    fields_g: np.ndarray
    fields_e: np.ndarray


def optimal_lo_phase(delta_beta: np.ndarray) -> float:
    """LO phase in [0, pi) maximizing the integrated quadrature contrast."""

    def contrast(phi):
        return float(np.sum(np.abs(np.real(np.exp(-1j * phi) * delta_beta))))

    # coarse scan handles the pi-periodic wrap, golden section refines
    phis = np.linspace(0.0, math.pi, 65)[:-1]
    vals = [contrast(p) for p in phis]
    k = int(np.argmax(vals))
    step = phis[1] - phis[0]
    phi, _ = golden_section_max(contrast, phis[k] - step, phis[k] + step, tol=1e-9)
    return phi % math.pi


def mean_quadrature_traces(device: DeviceParams, pulse: PulseEnvelope, times,
                           derived: DerivedParams | None = None,
                           photon_ceiling: float = 100.0,
                           method: str = "rk4") -> QuadratureTraces:
    """Noise-free mean quadratures Q_x(t) = Re[exp(-i phi_LO) beta_x].

    Dimensionless; the sqrt(kappa_p) factor of the signal and of q_tau is
    applied downstream, so S(t) = sqrt(2 pi kappa_p) |Q_e - Q_g|.
    """
    times = np.asarray(times, dtype=float)
    if len(times) < 2:
        raise GridError("need at least two grid points")
    if times[1] - times[0] > 0.5e-9 + 1e-15:
        raise GridError("grid step exceeds 0.5 ns")
    model = TwoCavityModel(device, derived, photon_ceiling)
    if method == "rk4":
        xg = model.rk4_trace(-1, pulse, times)
        xe = model.rk4_trace(+1, pulse, times)
    else:
        xg = model.trace(-1, pulse, times)
        xe = model.trace(+1, pulse, times)
    model.check_ceiling(xg)
    model.check_ceiling(xe)
    phi = optimal_lo_phase(xe[:, 1] - xg[:, 1])
    rot = np.exp(-1j * phi)
    # orient the LO so the excited state sits on the high-q side
    if float(np.sum(np.real(rot * (xe[:, 1] - xg[:, 1])))) < 0.0:
        rot = -rot
    q_g = np.real(rot * xg[:, 1])
    q_e = np.real(rot * xe[:, 1])
    return QuadratureTraces(times=times, q_g=q_g, q_e=q_e, phi_lo=phi,
                            fields_g=xg, fields_e=xe)


def integrated_rate(trace: SignalTrace, tau: float) -> float:
    """s(tau) = (1/sqrt(tau)) * integral_0^tau S(t) dt (trapezoidal)."""
    times = trace.times
    if tau <= 0.0 or tau > times[-1] + 1e-15:
        raise TauRangeError(f"tau = {tau:g} s outside trace support")
    mask = times <= tau + 1e-15
    t_sub = times[mask]
    v_sub = trace.values[mask]
    if t_sub[-1] < tau - 1e-15:
        v_end = np.interp(tau, times, trace.values)
        t_sub = np.append(t_sub, tau)
        v_sub = np.append(v_sub, v_end)
    return float(np.trapezoid(v_sub, t_sub) / math.sqrt(tau))
