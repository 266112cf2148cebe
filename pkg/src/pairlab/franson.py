"""Folded and unfolded Franson interferometry at the histogram level.

Each photon passes a delay-line interferometer (DLI) built from two identical
couplers with power splitting ratio ``kappa`` and an arm delay ``1/FSR``.
Post-selecting one output port leaves a short-path and a long-path amplitude
per photon. Joint amplitudes then give three coincidence peaks at
``-dT, 0, +dT``: the two outer peaks hold short-long and long-short events,
and the central peak holds the interfering short-short and long-long events.

Only peak areas are modelled. Each phase point gets Gaussian-shaped peaks
(width from the pair kernel), a flat accidental floor and Poisson noise per
bin, which is the level the interferometer observables live on.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .analysis import Histogram
from .model import ExperimentConfig, power_for_pair_rate

VOLTS_PER_FRINGE_FOLDED = 3.86
VOLTS_PER_FRINGE_UNFOLDED = 7.82


def coupler_ratio(extinction_db: float) -> float:
    """Power coupling ratio of two identical DLI couplers giving this bar-port extinction.

    Bar-port amplitudes are ``1 - k`` and ``k``, so the extinction is
    ``1 / (1 - 2k)^2``. Infinite extinction means an exact 50/50 split.
    """
    if extinction_db < 0:
        raise ValueError("extinction must be non-negative dB")
    if math.isinf(extinction_db):
        return 0.5
    return 0.5 * (1.0 - 10.0 ** (-extinction_db / 20.0))


@dataclass(frozen=True)
class DliParams:
    fsr_ghz: float = 2.5
    extinction_db: float = 25.0
    phase: float = 0.0
    port: str = "cross"

    def __post_init__(self):
        if not self.fsr_ghz > 0:
            raise ValueError("FSR must be positive")
        if self.extinction_db < 0:
            raise ValueError("extinction must be non-negative dB")
        if self.port not in ("cross", "bar"):
            raise ValueError("port must be 'cross' or 'bar'")
        if not math.isfinite(self.phase):
            raise ValueError("phase must be finite")

    @property
    def delay_ps(self) -> float:
        return 1e3 / self.fsr_ghz

    @property
    def kappa(self) -> float:
        return coupler_ratio(self.extinction_db)

    def path_amplitudes(self) -> tuple[float, float]:
        """(short, long) field amplitudes at the post-selected port, phase excluded."""
        k = self.kappa
        if self.port == "cross":
            a = math.sqrt(k * (1.0 - k))
            return a, a
        return 1.0 - k, k


@dataclass(frozen=True)
class FransonConfig:
    base: ExperimentConfig = field(default_factory=ExperimentConfig)
    dli_signal: DliParams = field(default_factory=DliParams)
    dli_idler: DliParams = field(default_factory=DliParams)
    folded: bool = True
    v_true: float = 0.99
    pair_rate_hz: float = 68e3
    point_duration_s: float = 5.0
    bin_width_ps: int = 160
    half_span_ps: int = 4000

    def __post_init__(self):
        if not 0.0 <= self.v_true <= 1.0:
            raise ValueError("true visibility must lie in [0, 1]")
        if self.pair_rate_hz < 0 or not self.point_duration_s > 0:
            raise ValueError("need a non-negative pair rate and a positive point duration")
        if self.half_span_ps <= 0 or self.bin_width_ps <= 0:
            raise ValueError("histogram span and bin width must be positive")
        tau = self.base.resonator.lifetime_ps
        for dli in self.active_dlis:
            if dli.delay_ps < 3.0 * tau:
                warnings.warn(
                    f"DLI delay {dli.delay_ps:.0f} ps is under 3x the {tau:.0f} ps pair correlation time; "
                    "side and central peaks will overlap"
                )

    @property
    def active_dlis(self) -> tuple[DliParams, DliParams]:
        return (self.dli_signal, self.dli_signal) if self.folded else (self.dli_signal, self.dli_idler)

    @property
    def delay_ps(self) -> float:
        return self.dli_signal.delay_ps

    @property
    def experiment(self) -> ExperimentConfig:
        """Base config with the pump set to give ``pair_rate_hz``."""
        return self.base.with_power(power_for_pair_rate(self.base, self.pair_rate_hz))

    def with_phase(self, phase: float) -> "FransonConfig":
        """Set the swept phase: the shared DLI when folded, the signal DLI otherwise."""
        return replace(self, dli_signal=replace(self.dli_signal, phase=phase))

    def total_phase(self) -> float:
        if self.folded:
            return 2.0 * self.dli_signal.phase
        return self.dli_signal.phase + self.dli_idler.phase

    def voltage(self, phase: float) -> float:
        """Presentation-only heater voltage for a swept phase value."""
        if self.folded:
            return phase * VOLTS_PER_FRINGE_FOLDED / math.pi
        return phase * VOLTS_PER_FRINGE_UNFOLDED / (2.0 * math.pi)


def franson_path_weights(cfg: FransonConfig) -> tuple[float, float, float]:
    """Probabilities ``(short-long, long-short, central)`` for a detected pair.

    The central weight is ``|SS|^2 + |LL|^2 + 2 V |SS||LL| cos(Phi)``. With
    ideal couplers this is ``(1 + V cos Phi) / 8`` and each side is 1/16.
    """
    (s_s, s_l), (i_s, i_l) = (d.path_amplitudes() for d in cfg.active_dlis)
    ss, ll = s_s * i_s, s_l * i_l
    central = ss**2 + ll**2 + 2.0 * cfg.v_true * ss * ll * math.cos(cfg.total_phase())
    return (s_s * i_l) ** 2, (s_l * i_s) ** 2, max(central, 0.0)


def _port_transmission(d: DliParams) -> float:
    """Fraction of single photons leaving the chosen port (no single-photon fringe)."""
    s, l = d.path_amplitudes()
    return s * s + l * l


@dataclass
class FransonSweep:
    folded: bool
    phases: np.ndarray
    voltages: np.ndarray
    total_phases: np.ndarray
    histograms: list[Histogram]
    singles_signal: np.ndarray
    singles_idler: np.ndarray
    acquisition_s: float
    delay_ps: float

    def pairs(self) -> list[tuple[float, Histogram]]:
        return list(zip(self.phases.tolist(), self.histograms))

    def write(self, directory: str | Path, stem: str = "phase") -> list[Path]:
        """Write one histogram CSV per phase plus ``manifest.csv``; returns all paths."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        rows = [
            f"# folded = {int(self.folded)}",
            f"# delay_ps = {float(self.delay_ps)!r}",
            "index,phase_rad,voltage_v,acquisition_s,singles_signal,singles_idler,file",
        ]
        for k, h in enumerate(self.histograms):
            p = out / f"{stem}_{k:03d}.csv"
            h.to_csv(p)
            paths.append(p)
            rows.append(
                f"{k},{float(self.phases[k])!r},{float(self.voltages[k])!r},{float(self.acquisition_s)!r},"
                f"{int(self.singles_signal[k])},{int(self.singles_idler[k])},{p.name}"
            )
        m = out / "manifest.csv"
        m.write_text("\n".join(rows) + "\n")
        return paths + [m]


def read_sweep(manifest: str | Path) -> FransonSweep:
    """Inverse of :meth:`FransonSweep.write`."""
    manifest = Path(manifest)
    meta, rows = {}, []
    for line in manifest.read_text().splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            meta[key.strip()] = value.strip()
        elif line.strip():
            rows.append(line)
    if not rows or not rows[0].startswith("index,phase_rad"):
        raise ValueError(f"{manifest}: not a sweep manifest")
    phases, volts, acq, s_sig, s_idl, hists = [], [], [], [], [], []
    for line in rows[1:]:
        _, ph, v, a, ss, si, name = line.split(",")
        phases.append(float(ph))
        volts.append(float(v))
        acq.append(float(a))
        s_sig.append(int(ss))
        s_idl.append(int(si))
        hists.append(Histogram.from_csv(manifest.parent / name))
    folded = meta.get("folded", "0") == "1"
    phases = np.array(phases)
    return FransonSweep(
        folded=folded,
        phases=phases,
        voltages=np.array(volts),
        total_phases=2.0 * phases if folded else np.full(phases.size, np.nan),
        histograms=hists,
        singles_signal=np.array(s_sig, dtype=np.int64),
        singles_idler=np.array(s_idl, dtype=np.int64),
        acquisition_s=acq[0] if acq else math.nan,
        delay_ps=float(meta.get("delay_ps", "nan")),
    )


def simulate_franson(cfg: FransonConfig, phase_grid: Sequence[float]) -> FransonSweep:
    """Synthesize one coincidence histogram and a pair of singles counts per phase.

    Point ``k`` draws from ``SeedSequence([seed, k])`` so any subset of the
    grid can be regenerated independently.
    """
    grid = np.asarray(phase_grid, dtype=float).ravel()
    if grid.size == 0:
        raise ValueError("phase grid is empty")
    if not np.all(np.isfinite(grid)):
        raise ValueError("phase grid must be finite")

    exp = cfg.experiment
    mu = cfg.pair_rate_hz
    src = exp.source
    ts, ti = exp.signal_loss.total_transmittance, exp.idler_loss.total_transmittance
    dli_s, dli_i = cfg.active_dlis
    ps_, pi_ = _port_transmission(dli_s), _port_transmission(dli_i)
    rate_s = mu * ts * (1.0 + src.excess_ratio_signal) * ps_ + src.dark_count_rate_hz
    rate_i = mu * ti * (1.0 + src.excess_ratio_idler) * pi_ + src.dark_count_rate_hz
    T = cfg.point_duration_s
    coinc = mu * ts * ti * T

    bw = cfg.bin_width_ps
    nb = 2 * (cfg.half_span_ps // bw) + 1
    origin = -(nb * bw) // 2
    edges = origin + bw * np.arange(nb + 1)
    sigma = exp.coincidence_sigma_ps
    dT = cfg.delay_ps
    shapes = [np.diff(norm.cdf(edges, loc=c, scale=sigma)) for c in (-dT, 0.0, dT)]
    floor = rate_s * rate_i * bw * 1e-12 * T

    hists, s_counts, i_counts, totals = [], [], [], []
    for k, phi in enumerate(grid):
        point = cfg.with_phase(float(phi))
        w_sl, w_ls, w_c = franson_path_weights(point)
        # the short-long pair arrives with the idler late, i.e. at +dT
        mean = floor + coinc * (w_ls * shapes[0] + w_c * shapes[1] + w_sl * shapes[2])
        rng = np.random.default_rng(np.random.SeedSequence([exp.rng_seed, k]))
        hists.append(Histogram(bw, int(origin), rng.poisson(mean), T))
        s_counts.append(rng.poisson(rate_s * T))
        i_counts.append(rng.poisson(rate_i * T))
        totals.append(point.total_phase())

    return FransonSweep(
        folded=cfg.folded,
        phases=grid,
        voltages=np.array([cfg.voltage(p) for p in grid]),
        total_phases=np.array(totals),
        histograms=hists,
        singles_signal=np.array(s_counts, dtype=np.int64),
        singles_idler=np.array(i_counts, dtype=np.int64),
        acquisition_s=T,
        delay_ps=dT,
    )


def expected_period(folded: bool) -> float:
    """Fringe period in the swept DLI phase."""
    return math.pi if folded else 2.0 * math.pi


__all__ = [
    "DliParams",
    "FransonConfig",
    "FransonSweep",
    "VOLTS_PER_FRINGE_FOLDED",
    "VOLTS_PER_FRINGE_UNFOLDED",
    "coupler_ratio",
    "expected_period",
    "franson_path_weights",
    "read_sweep",
    "simulate_franson",
]
