"""Geometry, fading channel generation, and effective-channel composition.

The simulated uplink has three channel legs: device to BS (Rician), device
to reflecting surface (Rayleigh), and surface to BS (Rician). Every entry
follows sqrt(PL(d)) * (sqrt(kappa/(1+kappa)) * LoS + sqrt(1/(1+kappa)) * CN(0,1))
with PL(d) = ref_gain * d^(-exp). Line-of-sight components are unit-modulus
steering ramps for half-wavelength uniform linear arrays.
"""

import numpy as np
from dataclasses import dataclass


@dataclass(frozen=True)
class Geometry:
    """Positions in meters: BS, surface, and K devices (rows)."""

    bs_pos: np.ndarray
    irs_pos: np.ndarray
    device_pos: np.ndarray  # (K, 3)

    def __post_init__(self):
        if self.device_pos.ndim != 2 or self.device_pos.shape[1] != 3:
            raise ValueError("device_pos must be (K, 3)")
        if self.device_pos.shape[0] < 1:
            raise ValueError("need at least one device")


@dataclass(frozen=True)
class FadingParams:
    rician_factor_direct: float = 3.0
    rician_factor_irs_bs: float = 3.0
    pathloss_exp_direct: float = 3.5
    pathloss_exp_device_irs: float = 2.2
    pathloss_exp_irs_bs: float = 2.2
    ref_gain_db: float = -30.0

    def __post_init__(self):
        for e in (self.pathloss_exp_direct, self.pathloss_exp_device_irs,
                  self.pathloss_exp_irs_bs):
            if not 1.5 <= e <= 6.0:
                raise ValueError(f"path-loss exponent {e} outside [1.5, 6]")
        if self.rician_factor_direct < 0 or self.rician_factor_irs_bs < 0:
            raise ValueError("Rician factors must be >= 0")

    @property
    def ref_gain(self):
        return 10.0 ** (self.ref_gain_db / 10.0)


@dataclass(frozen=True)
class ChannelSet:
    """One channel realization: h (K, Nr), g (K, M), G (M, Nr)."""

    h: np.ndarray
    g: np.ndarray
    G: np.ndarray

    @property
    def K(self):
        return self.h.shape[0]

    @property
    def Nr(self):
        return self.h.shape[1]

    @property
    def M(self):
        return self.G.shape[0]

    def reordered(self, order):
        """Channel set with devices relabeled along the given permutation."""
        order = np.asarray(order, dtype=int)
        return ChannelSet(h=self.h[order], g=self.g[order], G=self.G)


@dataclass(frozen=True)
class EffectiveChannels:
    """Composed device-to-BS channels and the SIC decoding order."""

    hbar: np.ndarray  # (K, Nr)
    order: np.ndarray  # permutation; order[i] = device decoded i-th


def sample_geometry(K, area_side, bs_pos, irs_pos, rng) -> Geometry:
    """Drop K devices uniformly on an area_side x area_side ground square."""
    if K < 1:
        raise ValueError("K must be >= 1")
    if area_side < 0:
        raise ValueError("area_side must be >= 0")
    xy = rng.uniform(0.0, area_side, size=(K, 2)) if area_side > 0 else np.zeros((K, 2))
    pos = np.concatenate([xy, np.zeros((K, 1))], axis=1)
    return Geometry(
        bs_pos=np.asarray(bs_pos, dtype=float),
        irs_pos=np.asarray(irs_pos, dtype=float),
        device_pos=pos,
    )


def _pathloss(ref_gain, dist, exponent):
    if dist <= 0:
        raise ValueError("zero distance between nodes")
    return ref_gain * dist ** (-exponent)


def _cn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _steer(n_elems, sin_theta):
    return np.exp(1j * np.pi * np.arange(n_elems) * sin_theta)


def _sin_dir(src, dst):
    # Direction cosine along the x axis of a ULA placed at dst, looking at src.
    d = np.linalg.norm(src - dst)
    return float((src[0] - dst[0]) / d)


def sample_channels(geom: Geometry, fading: FadingParams, Nr, M, rng) -> ChannelSet:
    """Draw one realization of all three channel legs.

    M = 0 means no reflecting surface: g and G come back empty and the
    effective channel reduces to the direct one.
    """
    if Nr < 1:
        raise ValueError("Nr must be >= 1")
    if M < 0:
        raise ValueError("M must be >= 0")
    K = geom.device_pos.shape[0]
    g0 = fading.ref_gain

    h = np.zeros((K, Nr), dtype=complex)
    for k in range(K):
        dev = geom.device_pos[k]
        d = np.linalg.norm(dev - geom.bs_pos)
        pl = _pathloss(g0, d, fading.pathloss_exp_direct)
        kap = fading.rician_factor_direct
        los = _steer(Nr, _sin_dir(dev, geom.bs_pos))
        h[k] = np.sqrt(pl) * (
            np.sqrt(kap / (1.0 + kap)) * los + np.sqrt(1.0 / (1.0 + kap)) * _cn(rng, Nr)
        )

    if M == 0:
        return ChannelSet(h=h, g=np.zeros((K, 0), dtype=complex),
                          G=np.zeros((0, Nr), dtype=complex))

    g = np.zeros((K, M), dtype=complex)
    for k in range(K):
        dev = geom.device_pos[k]
        d = np.linalg.norm(dev - geom.irs_pos)
        pl = _pathloss(g0, d, fading.pathloss_exp_device_irs)
        # Rayleigh leg: no line-of-sight component.
        g[k] = np.sqrt(pl) * _cn(rng, M)

    d_ib = np.linalg.norm(geom.irs_pos - geom.bs_pos)
    pl_ib = _pathloss(g0, d_ib, fading.pathloss_exp_irs_bs)
    kap = fading.rician_factor_irs_bs
    los_G = np.outer(
        _steer(M, _sin_dir(geom.bs_pos, geom.irs_pos)),
        _steer(Nr, _sin_dir(geom.irs_pos, geom.bs_pos)),
    )
    G = np.sqrt(pl_ib) * (
        np.sqrt(kap / (1.0 + kap)) * los_G + np.sqrt(1.0 / (1.0 + kap)) * _cn(rng, M, Nr)
    )
    return ChannelSet(h=h, g=g, G=G)


def reflect_operator(ch: ChannelSet):
    """Per-device reflection operators D_k = G^H diag(g_k), shape (K, Nr, M).

    The composed channel is then h_k + D_k v for a phase vector v, which is
    the form the phase-shift subproblem optimizes over.
    """
    # G^H diag(g_k) has columns G^H[:, m] * g_k[m].
    return ch.G.conj().T[None, :, :] * ch.g[:, None, :]


def compose_hbar(ch: ChannelSet, v):
    """Effective channels h_k + G^H diag(v) g_k without any reordering."""
    if ch.M == 0:
        return ch.h.copy()
    v = np.asarray(v, dtype=complex)
    if v.shape != (ch.M,):
        raise ValueError(f"phase vector must have length {ch.M}")
    return ch.h + (ch.g * v[None, :]) @ np.conj(ch.G)


def sic_order(hbar):
    """Decoding order: descending ||hbar_k||^2, ties to the lower index."""
    hbar = np.asarray(hbar)
    norms = np.sum(np.abs(hbar) ** 2, axis=1)
    # lexsort's last key is primary; negate for descending, index breaks ties.
    return np.lexsort((np.arange(len(norms)), -norms))


def effective_channel(ch: ChannelSet, v) -> EffectiveChannels:
    """Compose effective channels for unit-modulus phases and fix SIC order."""
    v = np.asarray(v, dtype=complex)
    if ch.M > 0 and np.max(np.abs(np.abs(v) - 1.0)) > 1e-9:
        raise ValueError("phase-shift entries must be unit modulus")
    hbar = compose_hbar(ch, v)
    return EffectiveChannels(hbar=hbar, order=sic_order(hbar))
