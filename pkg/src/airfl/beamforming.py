"""Receive beamformer design via the Lagrange dual method.

The subproblem fixes powers and phase shifts and minimizes the aggregation
MSE over the beamformer b subject to per-device SINR constraints
(b^H A_k b >= 0) and SIC power-gap constraints (b^H B_k b >= p_gap). Each
iteration alternates the closed-form minimizer of the Lagrangian with a
projected constant-step subgradient ascent on the multipliers.

Because the constraint matrices are indefinite, large multipliers can make
the Lagrangian matrix lose positive definiteness; the solver then adds a
small ridge and, failing that, halves the multipliers and retries.
"""

import numpy as np
from dataclasses import dataclass, replace

from . import linalg
from .metrics import SystemParams


@dataclass(frozen=True)
class QuadForms:
    """Auxiliary quadratic forms of the beamforming subproblem.

    H[k] = hbar_k hbar_k^H; A[k] encodes the SINR constraint of device k,
    Bq[k] the power-gap constraint (with Bq[K-1] = p_K H_K by convention so
    multiplier sums run over all K devices).
    """

    H: np.ndarray   # (K, Nr, Nr)
    A: np.ndarray   # (K, Nr, Nr)
    Bq: np.ndarray  # (K, Nr, Nr)
    gamma_min: float
    sigma2: float


@dataclass(frozen=True)
class DualState:
    lam: np.ndarray  # (K,) >= 0
    mu: np.ndarray   # (K,) >= 0, mu[K-1] pinned to 0

    def __post_init__(self):
        if np.any(self.lam < 0) or np.any(self.mu < 0):
            raise ValueError("multipliers must be nonnegative")
        if self.mu[-1] != 0.0:
            raise ValueError("mu_K must stay 0")

    @classmethod
    def zeros(cls, K):
        return cls(lam=np.zeros(K), mu=np.zeros(K))


@dataclass(frozen=True)
class BeamSettings:
    # Step factors are normalized by ||sum p_k H_k||_F of the internally
    # rescaled instance. Values much below ~1e-2 stall: the multipliers move
    # so little per iteration that the beamformer-displacement termination
    # fires long before the constraints are felt.
    delta1: float = 0.05
    delta2: float = 0.05
    eps1: float = 1e-5    # convergence tolerance on ||b_t - b_{t-1}||
    t1_max: int = 10_000
    reg: float = 1e-9     # relative ridge on the Lagrangian matrix

    def __post_init__(self):
        if min(self.delta1, self.delta2, self.eps1) <= 0 or self.t1_max < 1:
            raise ValueError("step sizes, eps1 must be positive, t1_max >= 1")
        if self.reg < 0:
            raise ValueError("reg must be >= 0")


def build_quadforms(hbar, p, sp: SystemParams) -> QuadForms:
    """Assemble H_k, A_k, B_k for devices already in decode order."""
    hbar = np.asarray(hbar, dtype=complex)
    p = np.asarray(p, dtype=float)
    K, Nr = hbar.shape
    if len(p) != K:
        raise ValueError("power vector length mismatch")
    if np.any(p <= 0):
        raise ValueError("powers must be positive")
    H = hbar[:, :, None] * hbar[:, None, :].conj()
    pH = p[:, None, None] * H
    # tail[k] = sum_{k' > k} p_k' H_k'
    tail = np.zeros_like(pH)
    acc = np.zeros((Nr, Nr), dtype=complex)
    for k in range(K - 1, -1, -1):
        tail[k] = acc
        acc = acc + pH[k]
    eye = np.eye(Nr)
    A = pH - sp.gamma_min * tail - sp.gamma_min * sp.sigma2 * eye
    Bq = pH - tail
    Bq[K - 1] = pH[K - 1]
    return QuadForms(H=H, A=A, Bq=Bq, gamma_min=sp.gamma_min, sigma2=sp.sigma2)


def mmse_step(qf: QuadForms, dual: DualState, hbar, p, sigma2, reg):
    """Closed-form Lagrangian minimizer for fixed multipliers.

    Uses the expanded coefficient form: the weight on p_k H_k is
    1 - lam_k - mu_k + sum_{i<k} (lam_i * gamma_min + mu_i), and the noise
    ridge is (1 + gamma_min * sum lam) * sigma2. reg adds a relative ridge
    scaled by the trace of the unconstrained matrix.
    """
    hbar = np.asarray(hbar, dtype=complex)
    p = np.asarray(p, dtype=float)
    K, Nr = hbar.shape
    lam, mu = dual.lam, dual.mu
    prefix = np.concatenate([[0.0], np.cumsum(lam * qf.gamma_min + mu)[:-1]])
    coeff = 1.0 - lam - mu + prefix
    pH = p[:, None, None] * qf.H
    Mmat = np.tensordot(coeff, pH, axes=1)
    sigma_coeff = (1.0 + qf.gamma_min * lam.sum()) * sigma2
    trace_scale = (np.sum(p * np.sum(np.abs(hbar) ** 2, axis=1)) + sigma2 * Nr) / Nr
    eps_r = reg * trace_scale
    Mmat = Mmat + (sigma_coeff + eps_r) * np.eye(Nr)
    rhs = (np.sqrt(p)[:, None] * hbar).sum(axis=0)
    return linalg.solve_hpd(Mmat, rhs)


def _quad(b, X):
    return float(np.real(b.conj() @ X @ b))


def dual_step(dual: DualState, b, qf: QuadForms, p_gap, delta1, delta2) -> DualState:
    """Projected subgradient update of the multipliers."""
    K = len(dual.lam)
    lam = np.maximum(0.0, dual.lam - delta1 * np.array([_quad(b, qf.A[k]) for k in range(K)]))
    gap = np.array([_quad(b, qf.Bq[k]) - p_gap for k in range(K)])
    mu = np.maximum(0.0, dual.mu - delta2 * gap)
    mu[K - 1] = 0.0
    return DualState(lam=lam, mu=mu)


def solve_beamforming(hbar, p, sp: SystemParams, settings: BeamSettings,
                      dual0: DualState = None, b0=None):
    """Alternate the closed-form step and multiplier updates until the
    beamformer stops moving or the iteration cap is hit.

    The instance is normalized internally (channels scaled to O(1), noise
    scaled accordingly) so the constant subgradient steps behave uniformly
    across absolute channel scales; the transform is exact and undone on
    output. Returns (b, dual, iterations, converged).
    """
    hbar = np.asarray(hbar, dtype=complex)
    p = np.asarray(p, dtype=float)
    K, Nr = hbar.shape

    # exact scale normalization: hbar -> c hbar, sigma2 -> c^2 sigma2, b -> b/c
    scale2 = (K + 1.0) / max(np.sum(p * np.sum(np.abs(hbar) ** 2, axis=1)) + sp.sigma2, 1e-300)
    c = np.sqrt(scale2)
    hb = c * hbar
    sig2 = scale2 * sp.sigma2
    sps = replace(sp, sigma2=sig2)

    qf = build_quadforms(hb, p, sps)
    norm_pH = np.linalg.norm(np.tensordot(p, qf.H, axes=1))
    d1 = settings.delta1 / max(norm_pH, 1e-300)
    d2 = settings.delta2 / max(norm_pH, 1e-300)

    dual = dual0 if dual0 is not None else DualState.zeros(K)
    b = (np.asarray(b0, dtype=complex) / c) if b0 is not None else np.zeros(Nr, dtype=complex)

    converged = False
    it = 0
    for it in range(1, settings.t1_max + 1):
        b_prev = b
        for attempt in range(11):
            try:
                b = mmse_step(qf, dual, hb, p, sig2, settings.reg)
                break
            except linalg.SingularSystemError:
                if attempt == 10:
                    raise
                dual = DualState(lam=dual.lam / 2.0,
                                 mu=np.where(np.arange(K) < K - 1, dual.mu / 2.0, 0.0))
        dual = dual_step(dual, b, qf, sp.p_gap, d1, d2)
        if np.linalg.norm(b - b_prev) <= settings.eps1:
            converged = True
            break
    return c * b, dual, it, converged
