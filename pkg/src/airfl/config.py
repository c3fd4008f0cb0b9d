"""Run configuration: YAML parsing, unit conversion, validation.

dB and dBm values are converted to linear watts exactly once, here. All
fields have defaults matching the reference scenario (3 devices, 30
reflecting elements, 2 MHz bandwidth, 0.5 Mbps rate floor) so a config
file only lists what it changes.
"""

import yaml
from dataclasses import dataclass, replace

from .ao import AoSettings
from .beamforming import BeamSettings
from .channel import FadingParams
from .conic import ConicSettings
from .metrics import SystemParams


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


def dbm_to_watts(x):
    return 10.0 ** (x / 10.0) / 1000.0


@dataclass(frozen=True)
class RunConfig:
    K: int = 3
    Nr: int = 4
    M: int = 30
    irs_enabled: bool = True
    qos_enabled: bool = True
    seed: int = 1
    trials: int = 20

    area_side_m: float = 100.0
    bs_pos: tuple = (0.0, 0.0, 25.0)
    irs_pos: tuple = (25.0, 25.0, 20.0)

    ref_gain_db: float = -20.0
    pathloss_exp_direct: float = 3.0
    pathloss_exp_device_irs: float = 2.2
    pathloss_exp_irs_bs: float = 2.2
    rician_factor_direct: float = 3.0
    rician_factor_irs_bs: float = 3.0

    sigma2_dbm: float = -80.0
    bandwidth_hz: float = 2.0e6
    r_min_bps: float = 0.5e6
    p_max_dbm: float = 0.0
    p_gap_dbm: float = 10.0

    delta1: float = 0.05
    delta2: float = 0.05
    eps0: float = 1.0e-5
    eps1: float = 1.0e-5
    t0_max: int = 40
    t1_max: int = 10_000
    init_retries: int = 50
    n_randomizations: int = 50
    tighten_power: bool = False
    conic_eps: float = 1.0e-7
    conic_max_iter: int = 50_000
    sdr_eps: float = 1.0e-6
    sdr_max_iter: int = 4_000

    timing: str = "none"  # none | wall; wall breaks byte-reproducibility

    def __post_init__(self):
        if self.K < 1 or self.Nr < 1 or self.M < 0:
            raise ConfigError("K, Nr must be >= 1 and M >= 0")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        if self.bandwidth_hz <= 0 or self.r_min_bps < 0:
            raise ConfigError("bandwidth must be positive, r_min >= 0")
        if self.area_side_m < 0:
            raise ConfigError("area side must be >= 0")
        if self.timing not in ("none", "wall"):
            raise ConfigError("timing must be 'none' or 'wall'")
        for name in ("delta1", "delta2", "eps0", "eps1", "conic_eps", "sdr_eps"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("t0_max", "t1_max", "init_retries", "conic_max_iter", "sdr_max_iter"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")

    # derived, all linear units
    @property
    def sigma2(self):
        return dbm_to_watts(self.sigma2_dbm)

    @property
    def p_max(self):
        return dbm_to_watts(self.p_max_dbm)

    @property
    def p_gap(self):
        return dbm_to_watts(self.p_gap_dbm)

    @property
    def gamma_min(self):
        if not self.qos_enabled:
            return 0.0
        return 2.0 ** (self.r_min_bps / self.bandwidth_hz) - 1.0

    def system_params(self) -> SystemParams:
        r_min = self.r_min_bps if self.qos_enabled else 0.0
        return SystemParams.from_rates(
            sigma2=self.sigma2, bandwidth_hz=self.bandwidth_hz, r_min_bps=r_min,
            p_gap=self.p_gap, p_max=self.p_max)

    def fading_params(self) -> FadingParams:
        return FadingParams(
            rician_factor_direct=self.rician_factor_direct,
            rician_factor_irs_bs=self.rician_factor_irs_bs,
            pathloss_exp_direct=self.pathloss_exp_direct,
            pathloss_exp_device_irs=self.pathloss_exp_device_irs,
            pathloss_exp_irs_bs=self.pathloss_exp_irs_bs,
            ref_gain_db=self.ref_gain_db)

    def ao_settings(self) -> AoSettings:
        return AoSettings(t0_max=self.t0_max, eps0=self.eps0,
                          init_retries=self.init_retries,
                          n_randomizations=self.n_randomizations,
                          tighten_power=self.tighten_power)

    def beam_settings(self) -> BeamSettings:
        return BeamSettings(delta1=self.delta1, delta2=self.delta2,
                            eps1=self.eps1, t1_max=self.t1_max)

    def conic_settings(self) -> ConicSettings:
        return ConicSettings(max_iter=self.conic_max_iter, eps=self.conic_eps)

    def sdr_settings(self) -> ConicSettings:
        return ConicSettings(max_iter=self.sdr_max_iter, eps=self.sdr_eps)

    def with_updates(self, **kw) -> "RunConfig":
        return replace(self, **kw)


_SECTION_FIELDS = {
    "system": ("K", "Nr", "M", "irs_enabled", "qos_enabled"),
    "geometry": ("area_side_m", "bs_pos", "irs_pos"),
    "fading": ("ref_gain_db", "pathloss_exp_direct", "pathloss_exp_device_irs",
               "pathloss_exp_irs_bs", "rician_factor_direct", "rician_factor_irs_bs"),
    "radio": ("sigma2_dbm", "bandwidth_hz", "r_min_bps", "p_max_dbm", "p_gap_dbm"),
    "solver": ("delta1", "delta2", "eps0", "eps1", "t0_max", "t1_max",
               "init_retries", "n_randomizations", "tighten_power",
               "conic_eps", "conic_max_iter", "sdr_eps", "sdr_max_iter"),
}
_TOP_FIELDS = ("seed", "trials", "timing")


def config_from_dict(doc) -> RunConfig:
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    kw = {}
    known_sections = set(_SECTION_FIELDS) | set(_TOP_FIELDS)
    for key, val in doc.items():
        if key in _TOP_FIELDS:
            kw[key] = val
        elif key in _SECTION_FIELDS:
            if not isinstance(val, dict):
                raise ConfigError(f"section '{key}' must be a mapping")
            for name, v in val.items():
                if name not in _SECTION_FIELDS[key]:
                    raise ConfigError(f"unknown field '{name}' in section '{key}'")
                kw[name] = v
        else:
            raise ConfigError(f"unknown config key '{key}' "
                              f"(sections: {sorted(known_sections)})")
    if "bs_pos" in kw:
        kw["bs_pos"] = tuple(float(x) for x in kw["bs_pos"])
    if "irs_pos" in kw:
        kw["irs_pos"] = tuple(float(x) for x in kw["irs_pos"])
    try:
        return RunConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    try:
        with open(path) as f:
            doc = yaml.safe_load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    return config_from_dict(doc)


def derived_constants(cfg: RunConfig) -> dict:
    """Linear-unit constants the `check` subcommand prints."""
    return {
        "sigma2_w": cfg.sigma2,
        "p_max_w": cfg.p_max,
        "p_gap_w": cfg.p_gap,
        "gamma_min": cfg.gamma_min,
        "ref_gain_linear": cfg.fading_params().ref_gain,
        "r_min_bps": cfg.r_min_bps if cfg.qos_enabled else 0.0,
        "bandwidth_hz": cfg.bandwidth_hz,
    }
