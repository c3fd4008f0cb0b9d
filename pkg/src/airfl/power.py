"""Transmit power allocation via the relaxed convex program.

With the beamformer and phases fixed, the MSE terms reduce to
sum_k a_k p_k - 2 c_k sqrt(p_k) with a_k = |b^H hbar_k|^2 and
c_k = Re{b^H hbar_k}. Substituting eta_k for sqrt(p_k) and relaxing the
equality to eta_k <= sqrt(p_k) yields a program that is conic once the
quadratic objective gets an epigraph variable t_k >= eta_k^2:

    minimize    sum_k a_k t_k - 2 c_k eta_k
    subject to  eta_k^2 <= t_k,  eta_k^2 <= p_k,  eta_k >= 0,
                p_floor <= p_k <= p_max,
                SIC gap rows and (when QoS is active) SINR rows in p.

Both quadratic couplings are standard rotated cones written as second-order
cones ||(2 eta, z - 1)|| <= z + 1.
"""

import logging

import numpy as np
from dataclasses import dataclass

from .conic import ConeSpec, ConicProgram, ConicSettings, solve_conic
from .metrics import SystemParams

logger = logging.getLogger(__name__)

P_FLOOR = 1e-12  # closed-set stand-in for the strict constraint p_k > 0


@dataclass(frozen=True)
class PowerProgram:
    a: np.ndarray        # (K,) effective gains |b^H hbar_k|^2
    c: np.ndarray        # (K,) Re{b^H hbar_k}
    noise: float         # sigma2 * ||b||^2
    gamma_min: float
    p_gap: float
    p_max: float
    p_floor: float = P_FLOOR

    @property
    def K(self):
        return len(self.a)

    def objective(self, p, eta=None):
        """P3.1 objective at a point; eta defaults to sqrt(p)."""
        eta = np.sqrt(p) if eta is None else np.asarray(eta)
        return float(np.sum(self.a * eta ** 2 - 2.0 * self.c * eta))

    def to_conic(self) -> ConicProgram:
        """Canonical cone program over normalized variables.

        Powers are expressed in units of p_max (and eta in sqrt(p_max)), so
        the rotated cones keep their form while all data sits near O(1);
        solve_power undoes the substitution.
        """
        K = self.K
        n = 3 * K  # [p, eta, t] in p_max / sqrt(p_max) / p_max units
        idx_p = np.arange(K)
        idx_e = K + np.arange(K)
        idx_t = 2 * K + np.arange(K)
        a_s = self.a * self.p_max
        c_s = self.c * np.sqrt(self.p_max)

        cost = np.zeros(n)
        cost[idx_e] = -2.0 * c_s
        cost[idx_t] = a_s

        rows, rhs = [], []

        def add(coefs, const):
            r = np.zeros(n)
            for j, val in coefs:
                r[j] = val
            rows.append(r)
            rhs.append(const)

        for k in range(K):  # p_floor <= p_k <= p_max, eta_k >= 0
            add([(idx_p[k], -1.0)], -self.p_floor / self.p_max)
            add([(idx_p[k], 1.0)], 1.0)
            add([(idx_e[k], -1.0)], 0.0)
        if self.gamma_min > 0:
            for k in range(K):  # SINR rows linear in p
                coefs = [(idx_p[k], -a_s[k])]
                coefs += [(idx_p[j], self.gamma_min * a_s[j]) for j in range(k + 1, K)]
                add(coefs, -self.gamma_min * self.noise)
        for k in range(K - 1):  # SIC gap rows
            coefs = [(idx_p[k], -a_s[k])]
            coefs += [(idx_p[j], a_s[j]) for j in range(k + 1, K)]
            add(coefs, -self.p_gap)
        n_nonneg = len(rows)

        for k in range(K):  # eta_k^2 <= p_k
            add([(idx_p[k], -1.0)], 1.0)
            add([(idx_e[k], -2.0)], 0.0)
            add([(idx_p[k], -1.0)], -1.0)
        for k in range(K):  # eta_k^2 <= t_k
            add([(idx_t[k], -1.0)], 1.0)
            add([(idx_e[k], -2.0)], 0.0)
            add([(idx_t[k], -1.0)], -1.0)

        return ConicProgram(
            c=cost, A=np.array(rows), b=np.array(rhs),
            cones=ConeSpec(nonneg_dim=n_nonneg, soc_dims=(3,) * (2 * K)),
        )


@dataclass(frozen=True)
class PowerSolution:
    p: np.ndarray
    eta: np.ndarray
    objective: float
    status: str  # optimal | infeasible | max_iter
    tight: bool  # all eta_k^2 == p_k within 1e-5 relative


def build_power_program(b, hbar, sp: SystemParams) -> PowerProgram:
    b = np.asarray(b, dtype=complex)
    hbar = np.asarray(hbar, dtype=complex)
    if np.all(b == 0):
        raise ValueError("beamformer must be nonzero")
    inner = hbar.conj() @ b  # b^H hbar_k
    return PowerProgram(
        a=np.abs(inner) ** 2,
        c=np.real(inner),
        noise=sp.sigma2 * float(np.sum(np.abs(b) ** 2)),
        gamma_min=sp.gamma_min,
        p_gap=sp.p_gap,
        p_max=sp.p_max,
    )


def _row_residuals(prog: PowerProgram, p, eta):
    """Constraint values of P3.1 at (p, eta); nonnegative means satisfied."""
    K = prog.K
    res = [p - prog.p_floor, prog.p_max - p, eta, p - eta ** 2]
    tails = np.concatenate([np.cumsum((prog.a * p)[::-1])[::-1][1:], [0.0]])
    if prog.gamma_min > 0:
        res.append(prog.a * p - prog.gamma_min * tails - prog.gamma_min * prog.noise)
    if K > 1:
        res.append((prog.a * p - tails - prog.p_gap)[:-1])
    return np.concatenate(res)


def _minimal_power(prog: PowerProgram, p_raw, eta):
    """Componentwise-minimal feasible p at fixed eta.

    The gap and SINR rows only lower-bound p_k through later powers, so a
    backward pass yields the least element of the optimal face. The relaxed
    objective never decreases along any p_k above eta_k^2, so this is also
    the MSE-preferred representative.
    """
    K = prog.K
    p = p_raw.copy()
    for k in range(K - 1, -1, -1):
        lo = max(eta[k] ** 2, prog.p_floor)
        if prog.a[k] > 1e-30:
            tail = float(np.sum(prog.a[k + 1:] * p[k + 1:]))
            if prog.gamma_min > 0:
                lo = max(lo, (prog.gamma_min * (tail + prog.noise)) / prog.a[k])
            if k < K - 1:
                lo = max(lo, (tail + prog.p_gap) / prog.a[k])
            p[k] = min(lo, prog.p_max)
        else:
            p[k] = min(max(lo, p_raw[k]), prog.p_max)
    return p


def solve_power(prog: PowerProgram, settings: ConicSettings = ConicSettings(),
                tighten=False) -> PowerSolution:
    """Solve the relaxed program.

    The optimal face is flat in p wherever the coupling eta_k <= sqrt(p_k)
    is slack, so the raw p-block is an arbitrary face point. The returned
    power is the componentwise-minimal feasible representative at the
    certified eta (verified against every row; the raw block is kept when
    verification fails), which keeps the coupling tight whenever the gap
    and SINR rows allow it.

    tighten=True substitutes p <- eta^2 afterwards (clipped to the floor),
    trading certified feasibility for an exactly tight coupling.
    """
    K = prog.K
    sol = solve_conic(prog.to_conic(), settings)
    if sol.status == "infeasible":
        return PowerSolution(p=np.full(K, np.nan), eta=np.full(K, np.nan),
                             objective=np.nan, status="infeasible", tight=False)
    status = "optimal" if sol.status == "optimal" else "max_iter"
    p_raw = np.maximum(sol.x[:K] * prog.p_max, prog.p_floor)
    eta = np.clip(sol.x[K:2 * K] * np.sqrt(prog.p_max), 0.0, np.sqrt(prog.p_max))
    p = _minimal_power(prog, p_raw, eta)
    scale = max(prog.p_max, prog.p_gap, prog.noise)
    if np.min(_row_residuals(prog, p, eta)) < -1e-9 * scale:
        p = p_raw
    if tighten:
        p = np.maximum(eta ** 2, prog.p_floor)
    tight = bool(np.all(np.abs(eta ** 2 - p) <= 1e-5 * np.maximum(p, prog.p_floor)))
    if status == "optimal" and np.all(prog.c > 0) and not tight:
        logger.warning("relaxed coupling eta^2 <= p inactive at the returned point")
    return PowerSolution(p=p, eta=eta, objective=prog.objective(p, eta),
                         status=status, tight=tight)
