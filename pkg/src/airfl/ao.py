"""Alternating optimization: feasible initialization and the safeguarded
beamforming -> power -> phase loop.

Each step's candidate is accepted only when the full solution stays
feasible and the MSE does not increase, so the recorded trace is
non-increasing by construction even though the subgradient and relaxation
steps are individually approximate. The SIC decoding order is frozen at
initialization: constraint matrices are index-literal in decode order, and
re-ordering mid-run would silently change the feasible set.
"""

import numpy as np
from dataclasses import dataclass, field

from . import linalg
from .beamforming import (BeamSettings, DualState, build_quadforms, mmse_step,
                          solve_beamforming)
from .channel import ChannelSet, compose_hbar, effective_channel
from .conic import ConicSettings
from .metrics import SystemParams, Solution, check_feasibility, mse, rates
from .phase import phase_step
from .power import build_power_program, solve_power

# power ladder ratios tried at initialization, strongest-first decay
_LADDER = (1.0, 0.7, 0.5, 0.35, 0.25, 0.18, 0.13, 0.09, 0.065, 0.045,
           0.03, 0.02, 0.012, 0.007, 0.004, 0.002, 0.001)


class NoFeasiblePoint(RuntimeError):
    """Initialization exhausted its retries without a feasible start."""


@dataclass(frozen=True)
class AoSettings:
    t0_max: int = 40
    eps0: float = 1e-5
    init_retries: int = 50
    n_randomizations: int = 50
    tighten_power: bool = False

    def __post_init__(self):
        if self.t0_max < 1 or self.eps0 <= 0 or self.init_retries < 1:
            raise ValueError("AO settings must be positive")


@dataclass(frozen=True)
class TracePoint:
    iter: int
    mse: float
    min_rate_bps: float
    feasible: bool
    accepted: tuple  # (beam, power, phase)


@dataclass
class MseTrace:
    points: list = field(default_factory=list)

    def add(self, **kw):
        self.points.append(TracePoint(**kw))

    @property
    def mse_values(self):
        return np.array([pt.mse for pt in self.points])


@dataclass(frozen=True)
class InitState:
    solution: Solution
    ch: ChannelSet          # decode-ordered copy
    order: np.ndarray       # original device index decoded i-th
    hbar: np.ndarray
    attempts: int


def initialize_feasible(ch: ChannelSet, sp: SystemParams, rng,
                        retries=50, reg=1e-9,
                        beam: BeamSettings = None) -> InitState:
    """Draw phases, fix the SIC order, and ladder the powers down until the
    gap constraints hold with a 3 dB margin under the zero-dual beamformer.

    When that beamformer violates QoS, the dual method is run once on the
    ladder point as a rescue before the phases are redrawn. Raises
    NoFeasiblePoint after the given number of phase redraws.
    """
    K = ch.K
    beam = beam if beam is not None else BeamSettings(t1_max=3000)

    def rescale_for_margin(b, hbar, p):
        # Gap rows scale with ||b||^2 while rates do not, so any beamformer
        # with a positive directional ordering can buy the 3 dB margin by
        # upscaling (at an MSE cost the AO loop later recovers).
        if K == 1:
            return b
        rp = np.abs(hbar.conj() @ b) ** 2 * p
        directional = rp[:-1] - np.cumsum(rp[::-1])[::-1][1:]
        dmin = float(directional.min())
        if dmin <= 0 or not np.isfinite(dmin):
            return None
        if dmin < 2.0 * sp.p_gap:
            c2 = 2.0 * sp.p_gap / dmin
            if c2 > 1e12:
                return None
            b = np.sqrt(c2) * b
        return b

    for attempt in range(1, retries + 1):
        v = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, ch.M))
        eff = effective_channel(ch, v)
        order = eff.order
        ch_o = ch.reordered(order)
        hbar = eff.hbar[order]

        chosen = None
        rescue_starts = []   # ladder points whose zero-dual rates already pass
        best_effort = None   # fallback start: best directional ordering
        for r in _LADDER:
            p = sp.p_max * np.power(r, np.arange(K))
            qf = build_quadforms(hbar, p, sp)
            try:
                b = mmse_step(qf, DualState.zeros(K), hbar, p, sp.sigma2, reg)
            except linalg.SingularSystemError:
                continue
            rate_vec = rates(b, hbar, p, sp.sigma2, sp.bandwidth_hz)
            if np.all(rate_vec >= sp.r_min_bps) and len(rescue_starts) < 3:
                rescue_starts.append((p, b))
            if K > 1:
                rp = np.abs(hbar.conj() @ b) ** 2 * p
                dmin = float((rp[:-1] - np.cumsum(rp[::-1])[::-1][1:]).min())
                if best_effort is None or dmin > best_effort[0]:
                    best_effort = (dmin, p, b)
            scaled = rescale_for_margin(b, hbar, p)
            if scaled is None:
                continue
            sol = Solution(b=scaled, p=p, v=v)
            rep = check_feasibility(sol, hbar, sp)
            margin_ok = rep.gap_residuals.size == 0 or np.min(rep.gap_residuals) >= sp.p_gap
            if margin_ok:
                chosen = (sol, rep)
                break

        if chosen is not None and chosen[1].feasible:
            return InitState(solution=chosen[0], ch=ch_o, order=order, hbar=hbar,
                             attempts=attempt)

        # rescue: the dual method shapes b for the QoS and gap families
        # jointly; start it from ladder points whose rates already pass,
        # then from the best-ordered point
        if chosen is not None:
            rescue_starts.append((chosen[0].p, chosen[0].b))
        if best_effort is not None:
            rescue_starts.append((best_effort[1], best_effort[2]))
        found = None
        for p_s, _ in rescue_starts:
            # cold start: seeding at the zero-dual fixed point would trip
            # the displacement-based termination before the duals engage
            try:
                b, _, _, _ = solve_beamforming(hbar, p_s, sp, beam)
            except linalg.SingularSystemError:
                continue
            b = rescale_for_margin(b, hbar, p_s)
            if b is None:
                continue
            sol = Solution(b=b, p=p_s, v=v)
            rep = check_feasibility(sol, hbar, sp)
            if rep.feasible:
                found = sol
                break
        if found is not None:
            return InitState(solution=found, ch=ch_o, order=order, hbar=hbar,
                             attempts=attempt)
    raise NoFeasiblePoint(f"no feasible initialization in {retries} attempts")


def alternate(ch: ChannelSet, sp: SystemParams, rng,
              ao: AoSettings = AoSettings(),
              beam: BeamSettings = BeamSettings(),
              conic: ConicSettings = ConicSettings()):
    """Run the full alternating loop from a fresh initialization.

    Returns (Solution, MseTrace, InitState). Raises NoFeasiblePoint when
    initialization fails.
    """
    init = initialize_feasible(ch, sp, rng, retries=ao.init_retries)
    ch_o, hbar = init.ch, init.hbar
    b, p, v = init.solution.b, init.solution.p, init.solution.v
    K = ch.K
    dual = DualState.zeros(K)
    mse_cur = mse(b, hbar, p, sp.sigma2)

    trace = MseTrace()

    def record(t, accepted):
        rep = check_feasibility(Solution(b=b, p=p, v=v), hbar, sp)
        rate_vec = rates(b, hbar, p, sp.sigma2, sp.bandwidth_hz)
        trace.add(iter=t, mse=mse_cur, min_rate_bps=float(rate_vec.min()),
                  feasible=rep.feasible, accepted=accepted)

    record(0, (False, False, False))

    for t in range(1, ao.t0_max + 1):
        mse_prev = mse_cur
        acc_b = acc_p = acc_v = False

        try:
            b_new, dual_new, _, _ = solve_beamforming(hbar, p, sp, beam,
                                                      dual0=dual, b0=b)
        except linalg.SingularSystemError:
            b_new = None
        if b_new is not None:
            m_new = mse(b_new, hbar, p, sp.sigma2)
            rep = check_feasibility(Solution(b=b_new, p=p, v=v), hbar, sp)
            if rep.feasible and m_new <= mse_cur + 1e-9:
                b, dual, mse_cur, acc_b = b_new, dual_new, m_new, True

        ps = solve_power(build_power_program(b, hbar, sp), conic,
                         tighten=ao.tighten_power)
        if ps.status == "optimal":
            m_new = mse(b, hbar, ps.p, sp.sigma2)
            rep = check_feasibility(Solution(b=b, p=ps.p, v=v), hbar, sp)
            if rep.feasible and m_new <= mse_cur + 1e-9:
                p, mse_cur, acc_p = ps.p, m_new, True

        if ch_o.M > 0:
            v_new, acc_v = phase_step(b, p, ch_o, sp, v, conic, rng,
                                      ao.n_randomizations)
            if acc_v:
                v = v_new
                hbar = compose_hbar(ch_o, v)
                mse_cur = mse(b, hbar, p, sp.sigma2)

        record(t, (acc_b, acc_p, acc_v))
        if abs(mse_cur - mse_prev) <= ao.eps0:
            break

    return Solution(b=b, p=p, v=v), trace, init
