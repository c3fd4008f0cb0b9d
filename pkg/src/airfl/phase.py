"""Phase-shift design: matrix lifting, semidefinite relaxation, recovery.

With the beamformer and powers fixed, each effective channel is affine in
the phase vector v: hbar_k = h_k + D_k v with D_k = G^H diag(g_k). Writing
Phi_k = D_k^H b sqrt(p_k) and rho_k = h_k^H b sqrt(p_k), the MSE and both
constraint families become quadratics in v, homogenized by an extra
unit-modulus coordinate t. Dropping the rank-one constraint on the lifted
variable V = vbar vbar^H leaves a semidefinite program whose value lower
bounds the constrained MSE minimum.

The linear objective coefficient is derived from the direct expansion of
the MSE (alpha_k = Phi_k (rho_k^* - 1)); the per-device identity
vbar^H F0 vbar + const == MSE(v) is enforced by tests.

Recovered phases come from the scaled leading eigenvector, with a Gaussian
randomization fallback, and a monotone safeguard only accepts phases that
keep the solution feasible without raising the MSE.
"""

import numpy as np
from dataclasses import dataclass

from . import linalg
from .channel import ChannelSet, compose_hbar, reflect_operator
from .conic import (ConeSpec, ConicProgram, ConicSettings, embed_hermitian,
                    extract_hermitian, solve_conic, svec, svec_indices, unsvec)
from .metrics import SystemParams, Solution, check_feasibility, mse


@dataclass(frozen=True)
class LiftedData:
    D: np.ndarray      # (K, Nr, M)
    Phi: np.ndarray    # (K, M)
    rho: np.ndarray    # (K,)
    alpha: np.ndarray  # (K, M)
    beta: np.ndarray   # (K, M)
    omega: np.ndarray  # (K-1, M)
    F0: np.ndarray     # (M+1, M+1) Hermitian
    F1: np.ndarray     # (K, M+1, M+1)
    F2: np.ndarray     # (K-1, M+1, M+1)
    C1: np.ndarray     # (K,)
    C2: np.ndarray     # (K-1,)
    const_term: float  # sum_k |rho_k^* - 1|^2 + sigma2 ||b||^2
    gamma_min: float

    @property
    def M(self):
        return self.Phi.shape[1]

    def lifted_objective(self, vbar):
        vbar = np.asarray(vbar, dtype=complex)
        return float(np.real(vbar.conj() @ self.F0 @ vbar))


@dataclass(frozen=True)
class LiftedSolution:
    V: np.ndarray       # (M+1, M+1) Hermitian PSD
    objective: float    # Tr(F0 V)
    rank1_gap: float    # 1 - lambda_max / sum(lambda)
    status: str


def _border(Q, lin):
    """Hermitian block [[Q, lin], [lin^H, 0]]."""
    M = Q.shape[0]
    F = np.zeros((M + 1, M + 1), dtype=complex)
    F[:M, :M] = Q
    F[:M, M] = lin
    F[M, :M] = lin.conj()
    return F


def build_lifted(b, p, ch: ChannelSet, sp: SystemParams) -> LiftedData:
    """Assemble all lifting data for decode-ordered channels."""
    if ch.M < 1:
        raise ValueError("phase design needs at least one reflecting element")
    b = np.asarray(b, dtype=complex)
    if np.all(b == 0):
        raise ValueError("beamformer must be nonzero")
    p = np.asarray(p, dtype=float)
    K, M = ch.K, ch.M
    D = reflect_operator(ch)
    sq = np.sqrt(p)
    Phi = sq[:, None] * (D.conj().transpose(0, 2, 1) @ b)  # (K, M)
    rho = sq * (ch.h.conj() @ b)

    outer = Phi[:, :, None] * Phi[:, None, :].conj()        # Phi_k Phi_k^H
    lin = Phi * rho.conj()[:, None]                         # Phi_k rho_k^H
    # tails over k' > k
    tail_outer = np.zeros_like(outer)
    tail_lin = np.zeros_like(lin)
    tail_rho2 = np.zeros(K)
    acc_o = np.zeros((M, M), dtype=complex)
    acc_l = np.zeros(M, dtype=complex)
    acc_r = 0.0
    for k in range(K - 1, -1, -1):
        tail_outer[k] = acc_o
        tail_lin[k] = acc_l
        tail_rho2[k] = acc_r
        acc_o = acc_o + outer[k]
        acc_l = acc_l + lin[k]
        acc_r = acc_r + abs(rho[k]) ** 2

    alpha = Phi * (rho.conj() - 1.0)[:, None]
    beta = lin - sp.gamma_min * tail_lin
    omega = (lin - tail_lin)[:K - 1]

    noise = sp.sigma2 * float(np.sum(np.abs(b) ** 2))
    F0 = _border(outer.sum(axis=0), alpha.sum(axis=0))
    F1 = np.stack([_border(outer[k] - sp.gamma_min * tail_outer[k], beta[k])
                   for k in range(K)])
    F2 = np.stack([_border(outer[k] - tail_outer[k], omega[k])
                   for k in range(K - 1)]) if K > 1 else np.zeros((0, M + 1, M + 1), dtype=complex)
    C1 = sp.gamma_min * tail_rho2 + sp.gamma_min * noise - np.abs(rho) ** 2
    C2 = (tail_rho2 + sp.p_gap - np.abs(rho) ** 2)[:K - 1]
    const = float(np.sum(np.abs(rho.conj() - 1.0) ** 2) + noise)
    return LiftedData(D=D, Phi=Phi, rho=rho, alpha=alpha, beta=beta, omega=omega,
                      F0=F0, F1=F1, F2=F2, C1=C1, C2=C2, const_term=const,
                      gamma_min=sp.gamma_min)


def _diag_indices_svec(d):
    r, c = svec_indices(d)
    return np.where(r == c)[0]


def solve_sdr(ld: LiftedData, settings: ConicSettings = ConicSettings()) -> LiftedSolution:
    """Solve the relaxed lifted program over the embedded Hermitian cone."""
    q = ld.M + 1
    d = 2 * q
    nvar = d * (d + 1) // 2
    diag_idx = _diag_indices_svec(d)

    rows, rhs = [], []
    for i in range(q):  # unit diagonal (first embedded copy pins both)
        r = np.zeros(nvar)
        r[diag_idx[i]] = 1.0
        rows.append(r)
        rhs.append(1.0)
    n_zero = len(rows)
    if ld.gamma_min > 0:
        for k in range(ld.F1.shape[0]):
            rows.append(-svec(embed_hermitian(ld.F1[k])) / 2.0)
            rhs.append(-ld.C1[k])
    for k in range(ld.F2.shape[0]):
        rows.append(-svec(embed_hermitian(ld.F2[k])) / 2.0)
        rhs.append(-ld.C2[k])
    n_nonneg = len(rows) - n_zero

    A = np.vstack([np.array(rows), -np.eye(nvar)])
    b = np.concatenate([np.array(rhs), np.zeros(nvar)])
    prog = ConicProgram(
        c=svec(embed_hermitian(ld.F0)) / 2.0, A=A, b=b,
        cones=ConeSpec(zero_dim=n_zero, nonneg_dim=n_nonneg,
                       psd_dims=(d,), psd_cplx=(True,)),
    )
    sol = solve_conic(prog, settings)
    if sol.status in ("infeasible", "unbounded"):
        return LiftedSolution(V=np.full((q, q), np.nan, dtype=complex),
                              objective=np.nan, rank1_gap=np.nan, status=sol.status)
    V = extract_hermitian(unsvec(sol.x, d))
    V = 0.5 * (V + V.conj().T)
    w = np.linalg.eigvalsh(V)
    wpos = np.clip(w, 0.0, None)
    gap = 1.0 - (wpos[-1] / wpos.sum() if wpos.sum() > 0 else 1.0)
    status = "optimal" if sol.status == "optimal" else "max_iter"
    return LiftedSolution(V=V, objective=float(np.real(np.trace(ld.F0 @ V))),
                          rank1_gap=float(gap), status=status)


def recover_rank1(V):
    """Best rank-one approximation direction scaled by the leading eigenvalue."""
    lam, q = linalg.leading_eigpair(V)
    return np.sqrt(max(lam, 0.0)) * q


def project_phases(vbar):
    """Feasible phases from a lifted vector: de-rotate the homogenization
    coordinate to real-positive, drop it, renormalize each entry to unit
    modulus (zeros map to 1)."""
    vbar = np.asarray(vbar, dtype=complex)
    t = vbar[-1]
    if abs(t) > 0:
        vbar = vbar * (t.conj() / abs(t))
    v = vbar[:-1]
    out = np.ones(len(v), dtype=complex)
    nz = np.abs(v) > 0
    out[nz] = v[nz] / np.abs(v[nz])
    return out


def _randomized_candidates(V, rng, count):
    M = V.shape[0] - 1
    top = 0.5 * (V[:M, :M] + V[:M, :M].conj().T)
    eig = linalg.hermitian_eig(top)
    L = eig.eigenvectors * np.sqrt(np.clip(eig.eigenvalues, 0.0, None))
    for _ in range(count):
        z = (rng.standard_normal(M) + 1j * rng.standard_normal(M)) / np.sqrt(2.0)
        w = L @ z
        cand = np.ones(M, dtype=complex)
        nz = np.abs(w) > 0
        cand[nz] = w[nz] / np.abs(w[nz])
        yield cand


def phase_step(b, p, ch: ChannelSet, sp: SystemParams, v_old,
               settings: ConicSettings = ConicSettings(), rng=None,
               n_randomizations=50):
    """One safeguarded phase update. Returns (v, accepted).

    Accepts the projected leading-eigenpair candidate when it is feasible
    and does not raise the MSE; otherwise tries Gaussian randomization
    candidates drawn from the lifted solution and keeps the best feasible
    improving one. Falls back to v_old when nothing qualifies.
    """
    v_old = np.asarray(v_old, dtype=complex)
    if ch.M == 0:
        return v_old, False
    mse_old = mse(b, compose_hbar(ch, v_old), p, sp.sigma2)

    ld = build_lifted(b, p, ch, sp)
    sdr = solve_sdr(ld, settings)
    if sdr.status in ("infeasible", "unbounded"):
        return v_old, False

    def evaluate(v_cand):
        hb = compose_hbar(ch, v_cand)
        rep = check_feasibility(Solution(b=b, p=p, v=v_cand), hb, sp)
        return rep.feasible, mse(b, hb, p, sp.sigma2)

    v_eig = project_phases(recover_rank1(sdr.V))
    ok, m = evaluate(v_eig)
    if ok and m <= mse_old + 1e-9:
        return v_eig, True

    if rng is not None and n_randomizations > 0:
        best_v, best_m = None, mse_old + 1e-9
        for cand in _randomized_candidates(sdr.V, rng, n_randomizations):
            ok, m = evaluate(cand)
            if ok and m <= best_m:
                best_v, best_m = cand, m
        if best_v is not None:
            return best_v, True
    return v_old, False
