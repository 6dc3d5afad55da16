import numpy as np
import pytest

from fastreadout.dynamics import PulseEnvelope
from fastreadout.params import DeviceParams


def make_device(**kw) -> DeviceParams:
    """Reference device; individual fields overridable per test."""
    base = dict(g=208e6, omega_q=6.316e9, omega_r=4.754e9, omega_p=4.756e9,
                alpha=-340e6, J=25e6, Q_p=74, T1=7.6e-6, eta=0.66,
                n_drive=2.5, dispersive_guard=5.0)
    base.update(kw)
    return DeviceParams(**base)


@pytest.fixture
def device() -> DeviceParams:
    return make_device()


@pytest.fixture
def gated_pulse() -> PulseEnvelope:
    return PulseEnvelope(kind="gated", total_duration=160e-9)


@pytest.fixture
def fine_times() -> np.ndarray:
    return np.arange(0.0, 160e-9, 0.5e-9)


def bin_grid(n_bins: int, dt_bin: float = 8e-9, fine_step: float = 0.5e-9):
    """Bin-center times and their indices on the fine grid."""
    centers = (np.arange(n_bins) + 0.5) * dt_bin
    idx = np.round(centers / fine_step).astype(int)
    return centers, idx
