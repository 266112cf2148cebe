"""Physical parameters of the ring source and detection chain, plus closed forms.

Units follow the field names: ``_nm``, ``_ghz``, ``_ps``, ``_mw``, ``_hz``, ``_s``.
Event times elsewhere in the package are integer picoseconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from scipy.special import erf

SPEED_OF_LIGHT = 299_792_458.0  # m/s
PS_PER_S = 10**12

#: fraction of a Gaussian peak inside +-1 sigma
ONE_SIGMA_FRACTION = float(erf(1.0 / math.sqrt(2.0)))


def db_to_transmittance(loss_db: float) -> float:
    """Power transmittance of a loss given in dB, ``10**(-loss_db/10)``."""
    if not loss_db >= 0:
        raise ValueError(f"loss must be non-negative dB, got {loss_db!r}")
    return 10.0 ** (-loss_db / 10.0)


def resonance_derived(loaded_q: float, center_wavelength_nm: float) -> tuple[float, float]:
    """Return ``(fwhm_ghz, lifetime_ps)`` of a resonance with loaded Q."""
    if not loaded_q > 0:
        raise ValueError("loaded Q must be positive")
    nu = SPEED_OF_LIGHT / (center_wavelength_nm * 1e-9)
    fwhm_hz = nu / loaded_q
    return fwhm_hz / 1e9, 1e12 / (2.0 * math.pi * fwhm_hz)


def brightness(pgr_hz: float, fwhm_ghz: float, power_mw: float | None = None):
    """Pair brightness per GHz, and per GHz per mW^2 when ``power_mw`` is given.

    Returns ``(pairs/s/GHz, pairs/s/GHz/mW^2)``; the second entry is ``None``
    when no power is supplied.
    """
    if not fwhm_ghz > 0:
        raise ValueError("linewidth must be positive")
    b = pgr_hz / fwhm_ghz
    if power_mw is None:
        return b, None
    if not power_mw > 0:
        raise ValueError("spectral brightness needs a positive pump power")
    return b, b / power_mw**2


@dataclass(frozen=True)
class ResonatorParams:
    loaded_q: float = 9.2e4
    intrinsic_q: float = 9.0e5
    center_wavelength_nm: float = 1550.0

    def __post_init__(self):
        if not 0 < self.loaded_q <= self.intrinsic_q:
            raise ValueError("need 0 < loaded_q <= intrinsic_q")

    @property
    def fwhm_ghz(self) -> float:
        return resonance_derived(self.loaded_q, self.center_wavelength_nm)[0]

    @property
    def lifetime_ps(self) -> float:
        return resonance_derived(self.loaded_q, self.center_wavelength_nm)[1]


def _idler_from_energy_conservation(pump_nm: float, signal_nm: float) -> float:
    return 1.0 / (2.0 / pump_nm - 1.0 / signal_nm)


@dataclass(frozen=True)
class WavelengthPlan:
    pump_nm: float = 1554.9
    signal_nm: float = 1535.5
    # 2/pump = 1/signal + 1/idler; the rounded lab value is 1574.7 nm
    idler_nm: float = field(default_factory=lambda: round(_idler_from_energy_conservation(1554.9, 1535.5), 3))
    tolerance_ghz: float = 2.1

    def __post_init__(self):
        if abs(self.mismatch_ghz) > self.tolerance_ghz:
            raise ValueError(
                f"2*nu_p - nu_s - nu_i = {self.mismatch_ghz:.2f} GHz exceeds {self.tolerance_ghz} GHz"
            )

    @property
    def mismatch_ghz(self) -> float:
        c = SPEED_OF_LIGHT * 1e9  # nm/s
        return c * (2.0 / self.pump_nm - 1.0 / self.signal_nm - 1.0 / self.idler_nm) / 1e9


@dataclass(frozen=True)
class ChannelLossBudget:
    coupling_db: float
    filter_db: float
    detector_efficiency: float

    def __post_init__(self):
        if self.coupling_db < 0 or self.filter_db < 0:
            raise ValueError("losses must be non-negative dB")
        if not 0 < self.detector_efficiency <= 1:
            raise ValueError("detector efficiency must be in (0, 1]")

    @property
    def total_transmittance(self) -> float:
        return db_to_transmittance(self.coupling_db + self.filter_db) * self.detector_efficiency


@dataclass(frozen=True)
class SourceParams:
    """Pair source and uncorrelated background.

    ``excess_ratio_*`` is the rate of unpaired photons reaching each output
    band per generated pair (so it scales with pump power squared, like the
    pairs). ``dark_count_rate_hz`` is a pump-independent rate per channel
    covering detector darks plus leakage.
    """

    pgr_coefficient_mhz_per_mw2: float = 149.0
    pump_power_mw: float = 0.0106
    dark_count_rate_hz: float = 2450.0
    excess_ratio_signal: float = 1.04
    excess_ratio_idler: float = 1.04
    pair_statistics: str = "poisson"

    def __post_init__(self):
        if self.pump_power_mw < 0:
            raise ValueError("pump power must be non-negative")
        if self.pgr_coefficient_mhz_per_mw2 < 0 or self.dark_count_rate_hz < 0:
            raise ValueError("rates must be non-negative")
        if self.excess_ratio_signal < 0 or self.excess_ratio_idler < 0:
            raise ValueError("excess ratios must be non-negative")
        if self.pair_statistics not in ("poisson", "isolated"):
            raise ValueError("pair_statistics must be 'poisson' or 'isolated'")


def pair_generation_rate(source: SourceParams) -> float:
    """On-chip pair rate in Hz, ``R * P**2``."""
    return source.pgr_coefficient_mhz_per_mw2 * 1e6 * source.pump_power_mw**2


@dataclass(frozen=True)
class TimingParams:
    jitter_sigma_ps: float = 54.0
    dead_time_ps: int = 0
    idler_delay_ps: int = 20_000
    hardware_bin_ps: int = 80
    isolation_ps: int = 100_000

    def __post_init__(self):
        if self.jitter_sigma_ps < 0 or self.dead_time_ps < 0:
            raise ValueError("jitter and dead time must be non-negative")
        if self.hardware_bin_ps <= 0:
            raise ValueError("hardware bin must be positive")


def _signal_budget():
    return ChannelLossBudget(coupling_db=3.5, filter_db=5.0, detector_efficiency=0.9)


def _idler_budget():
    return ChannelLossBudget(coupling_db=3.5, filter_db=7.2, detector_efficiency=0.9)


def _heralded_arm_budget():
    return ChannelLossBudget(coupling_db=3.5, filter_db=5.0, detector_efficiency=0.65)


@dataclass(frozen=True)
class ExperimentConfig:
    resonator: ResonatorParams = field(default_factory=ResonatorParams)
    wavelengths: WavelengthPlan = field(default_factory=WavelengthPlan)
    signal_loss: ChannelLossBudget = field(default_factory=_signal_budget)
    idler_loss: ChannelLossBudget = field(default_factory=_idler_budget)
    herald_split_b_loss: ChannelLossBudget = field(default_factory=_heralded_arm_budget)
    herald_split_c_loss: ChannelLossBudget = field(default_factory=_heralded_arm_budget)
    source: SourceParams = field(default_factory=SourceParams)
    timing: TimingParams = field(default_factory=TimingParams)
    herald_side: str = "idler"
    acquisition_time_s: float = 30.0
    rng_seed: int = 20180607

    def __post_init__(self):
        if not self.acquisition_time_s > 0:
            raise ValueError("acquisition time must be positive")
        if self.herald_side not in ("signal", "idler"):
            raise ValueError("herald_side must be 'signal' or 'idler'")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("seed must fit in 64 bits")

    def with_power(self, power_mw: float) -> "ExperimentConfig":
        return replace(self, source=replace(self.source, pump_power_mw=power_mw))

    def with_duration(self, seconds: float) -> "ExperimentConfig":
        return replace(self, acquisition_time_s=seconds)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, rng_seed=seed)

    @property
    def pair_rate_hz(self) -> float:
        return pair_generation_rate(self.source)

    @property
    def coincidence_sigma_ps(self) -> float:
        """Standard deviation of the signal-idler delay (ring kernel plus two jitters)."""
        tau = self.resonator.lifetime_ps
        return math.sqrt(2.0 * tau**2 + 2.0 * self.timing.jitter_sigma_ps**2)


# -- closed-form expectations ------------------------------------------------


def expected_pair_rates(cfg: ExperimentConfig) -> dict[str, float]:
    """Mean detected rates (Hz) for the two-channel pair experiment."""
    mu = cfg.pair_rate_hz
    src = cfg.source
    ts, ti = cfg.signal_loss.total_transmittance, cfg.idler_loss.total_transmittance
    d = src.dark_count_rate_hz
    return {
        "pair": mu,
        "signal": mu * ts * (1.0 + src.excess_ratio_signal) + d,
        "idler": mu * ti * (1.0 + src.excess_ratio_idler) + d,
        "coincidence": mu * ts * ti,
    }


def analytic_car(cfg: ExperimentConfig, sigma_ps: float | None = None, bin_width_ps: float = 0.0) -> float:
    """CAR for a +-1 sigma window around a Gaussian-shaped coincidence peak.

    Uses Poisson pair statistics: true coincidences in the window are
    ``0.683 * mu * ts * ti`` and accidentals ``N_s * N_i * 2 sigma``.
    A nonzero ``bin_width_ps`` adds the ``w^2/12`` quantization variance that
    a histogram of that bin width puts on the fitted peak width.
    """
    sigma_ps = cfg.coincidence_sigma_ps if sigma_ps is None else sigma_ps
    sigma_ps = math.sqrt(sigma_ps**2 + bin_width_ps**2 / 12.0)
    r = expected_pair_rates(cfg)
    acc = r["signal"] * r["idler"] * 2.0 * sigma_ps * 1e-12
    if acc == 0:
        return math.inf
    return ONE_SIGMA_FRACTION * r["coincidence"] / acc


def _herald_arms(cfg: ExperimentConfig):
    src = cfg.source
    if cfg.herald_side == "idler":
        return cfg.idler_loss, src.excess_ratio_idler, src.excess_ratio_signal
    return cfg.signal_loss, src.excess_ratio_signal, src.excess_ratio_idler


def expected_g2_rates(cfg: ExperimentConfig, window_ps: float = 5000.0) -> dict[str, float]:
    """Mean single, double and triple rates for the heralded (A; B, C) setup.

    The coincidence window has total width ``window_ps`` centred on each
    herald event; a Poisson background of rate ``r`` falls into it with
    probability ``r * window``.
    """
    herald_budget, beta_a, beta_h = _herald_arms(cfg)
    mu = cfg.pair_rate_hz
    d = cfg.source.dark_count_rate_hz
    w = window_ps * 1e-12
    tA = herald_budget.total_transmittance
    tB = 0.5 * cfg.herald_split_b_loss.total_transmittance
    tC = 0.5 * cfg.herald_split_c_loss.total_transmittance
    nA = mu * tA * (1.0 + beta_a) + d
    nB = mu * tB * (1.0 + beta_h) + d
    nC = mu * tC * (1.0 + beta_h) + d
    nAB = mu * tA * tB + nA * nB * w
    nAC = mu * tA * tC + nA * nC * w
    nABC = mu * tA * tB * nC * w + mu * tA * tC * nB * w + nA * nB * nC * w * w
    nBC = nB * nC * w
    return {"A": nA, "B": nB, "C": nC, "AB": nAB, "AC": nAC, "ABC": nABC, "BC": nBC}


def analytic_heralded_g2(cfg: ExperimentConfig, window_ps: float = 5000.0) -> float:
    r = expected_g2_rates(cfg, window_ps)
    if r["AB"] == 0 or r["AC"] == 0:
        return math.nan
    return r["ABC"] * r["A"] / (r["AB"] * r["AC"])


def analytic_klyshko(cfg: ExperimentConfig, window_ps: float = 5000.0) -> float:
    r = expected_g2_rates(cfg, window_ps)
    return r["AB"] / (r["A"] * cfg.herald_split_b_loss.detector_efficiency)


def power_for_pair_rate(cfg: ExperimentConfig, pair_rate_hz: float) -> float:
    return math.sqrt(pair_rate_hz / (cfg.source.pgr_coefficient_mhz_per_mw2 * 1e6))


def power_for_brightness(cfg: ExperimentConfig, pairs_per_s_per_ghz: float) -> float:
    """Pump power (mW) at which ``R P^2 / fwhm`` equals the requested brightness."""
    return power_for_pair_rate(cfg, pairs_per_s_per_ghz * cfg.resonator.fwhm_ghz)


def power_for_herald_rate(cfg: ExperimentConfig, herald_rate_hz: float) -> float:
    """Pump power (mW) giving the requested mean count rate on the herald detector."""
    herald_budget, beta_a, _ = _herald_arms(cfg)
    mu = (herald_rate_hz - cfg.source.dark_count_rate_hz) / (
        herald_budget.total_transmittance * (1.0 + beta_a)
    )
    if mu <= 0:
        raise ValueError("herald rate is below the dark-count floor")
    return power_for_pair_rate(cfg, mu)
