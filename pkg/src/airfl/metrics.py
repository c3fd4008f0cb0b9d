"""Aggregation MSE, per-device SIC rates, and constraint feasibility checks.

Single source of truth: every solver step and the sweep harness judge
feasibility through check_feasibility, so a solution marked feasible has
passed exactly the tolerances defined here.

All powers are linear watts, rates are bit/s, bandwidth is Hz. dB and dBm
appear only in the configuration layer.
"""

import numpy as np
from dataclasses import dataclass


@dataclass(frozen=True)
class SystemParams:
    sigma2: float  # noise power, W
    bandwidth_hz: float
    r_min_bps: float
    gamma_min: float  # 2^(R_min/B) - 1
    p_gap: float  # W
    p_max: float  # W

    def __post_init__(self):
        if min(self.sigma2, self.bandwidth_hz, self.p_gap, self.p_max) <= 0:
            raise ValueError("sigma2, bandwidth, p_gap, p_max must be positive")
        if self.r_min_bps < 0 or self.gamma_min < 0:
            raise ValueError("r_min and gamma_min must be >= 0")
        expected = 2.0 ** (self.r_min_bps / self.bandwidth_hz) - 1.0
        if abs(self.gamma_min - expected) > 1e-12 * (1.0 + expected):
            raise ValueError(
                f"gamma_min={self.gamma_min!r} inconsistent with "
                f"2^(r_min/B)-1={expected!r}"
            )

    @classmethod
    def from_rates(cls, sigma2, bandwidth_hz, r_min_bps, p_gap, p_max):
        gamma = 2.0 ** (r_min_bps / bandwidth_hz) - 1.0
        return cls(sigma2=sigma2, bandwidth_hz=bandwidth_hz, r_min_bps=r_min_bps,
                   gamma_min=gamma, p_gap=p_gap, p_max=p_max)


@dataclass(frozen=True)
class Solution:
    """A candidate operating point: beamformer, powers, phase shifts."""

    b: np.ndarray  # (Nr,) complex
    p: np.ndarray  # (K,) positive watts
    v: np.ndarray  # (M,) unit modulus


@dataclass(frozen=True)
class FeasibilityReport:
    qos_residuals: np.ndarray  # R_k - R_min, bps
    gap_residuals: np.ndarray  # K-1 entries, W-scale
    power_ok: bool
    phase_ok: bool
    feasible: bool


def mse(b, hbar, p, sigma2):
    """Closed-form aggregation distortion sum_k |b^H hbar_k sqrt(p_k) - 1|^2 + |b|^2 sigma2."""
    b = np.asarray(b, dtype=complex)
    hbar = np.asarray(hbar, dtype=complex)
    p = np.asarray(p, dtype=float)
    fit = hbar.conj() @ b * np.sqrt(p)  # b^H hbar_k sqrt(p_k)
    return float(np.sum(np.abs(fit - 1.0) ** 2) + np.sum(np.abs(b) ** 2) * sigma2)


def mse_monte_carlo(b, hbar, p, sigma2, n_samples, rng):
    """Sampled estimate of E|s_hat - s|^2 with its standard error.

    Draws unit-variance complex Gaussian symbols per device and CN(0, sigma2)
    receiver noise, forms the beamformed estimate, and averages the squared
    distortion. Serves as the independent cross-check of the closed form.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    b = np.asarray(b, dtype=complex)
    hbar = np.asarray(hbar, dtype=complex)
    p = np.asarray(p, dtype=float)
    K, Nr = hbar.shape
    gains = hbar.conj() @ b * np.sqrt(p)  # per-device b^H hbar_k sqrt(p_k)
    bn = np.conj(b)

    sq = np.empty(n_samples)
    chunk = 1 << 14
    done = 0
    while done < n_samples:
        n = min(chunk, n_samples - done)
        s = (rng.standard_normal((n, K)) + 1j * rng.standard_normal((n, K))) / np.sqrt(2)
        noise = (rng.standard_normal((n, Nr)) + 1j * rng.standard_normal((n, Nr)))
        noise *= np.sqrt(sigma2 / 2.0)
        s_hat = s @ gains + noise @ bn
        sq[done:done + n] = np.abs(s_hat - s.sum(axis=1)) ** 2
        done += n
    est = float(np.mean(sq))
    se = float(np.std(sq, ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else 0.0
    return est, se


def _received_powers(b, hbar, p):
    return np.abs(np.asarray(hbar).conj() @ np.asarray(b)) ** 2 * np.asarray(p)


def rate(k, b, hbar, p, sigma2, bandwidth):
    """Uplink rate of device k (0-based) under SIC, devices in decode order."""
    rp = _received_powers(b, hbar, p)
    noise = float(np.sum(np.abs(b) ** 2)) * sigma2
    interference = float(np.sum(rp[k + 1:]))
    return bandwidth * np.log2(1.0 + rp[k] / (interference + noise))


def rates(b, hbar, p, sigma2, bandwidth):
    """All K SIC rates at once (decode order)."""
    rp = _received_powers(b, hbar, p)
    noise = float(np.sum(np.abs(b) ** 2)) * sigma2
    tail = np.concatenate([np.cumsum(rp[::-1])[::-1][1:], [0.0]])
    return bandwidth * np.log2(1.0 + rp / (tail + noise))


def gap_residuals(b, hbar, p, p_gap):
    """SIC decodability margins for devices 1..K-1 (decode order).

    residual_k = received_k - sum of later received powers - p_gap; the
    constraint holds when every residual is nonnegative.
    """
    rp = _received_powers(b, hbar, p)
    if len(rp) <= 1:
        return np.zeros(0)
    tail = np.cumsum(rp[::-1])[::-1][1:]
    return rp[:-1] - tail - p_gap


def check_feasibility(sol: Solution, hbar, sp: SystemParams,
                      tol_power=1e-6, tol_rate_bps=1e-3) -> FeasibilityReport:
    """Evaluate all constraint families of the master problem.

    hbar must be in decode order. Power and gap checks use a relative
    tolerance (against max(1, p_gap) for gaps), rate checks an absolute
    bps tolerance.
    """
    p = np.asarray(sol.p, dtype=float)
    rate_vec = rates(sol.b, hbar, p, sp.sigma2, sp.bandwidth_hz)
    qos_res = rate_vec - sp.r_min_bps
    gap_res = gap_residuals(sol.b, hbar, p, sp.p_gap)
    power_ok = bool(np.all(p > 0) and np.all(p <= sp.p_max * (1.0 + tol_power)))
    phase_ok = bool(sol.v.size == 0 or np.max(np.abs(np.abs(sol.v) - 1.0)) <= 1e-9)
    feasible = (
        power_ok
        and phase_ok
        and bool(np.all(qos_res >= -tol_rate_bps))
        and bool(gap_res.size == 0 or np.all(gap_res >= -tol_power * max(1.0, sp.p_gap)))
    )
    return FeasibilityReport(
        qos_residuals=qos_res,
        gap_residuals=gap_res,
        power_ok=power_ok,
        phase_ok=phase_ok,
        feasible=feasible,
    )
