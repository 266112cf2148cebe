"""Whole measurement runs (simulate, histogram, analyze) and power sweeps.

Runs are accumulated over independent one-second segments so that long or
bright acquisitions stay within memory. Every sweep point is seeded from
``(seed, point index)``; the result does not depend on ``jobs``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .analysis import (
    Histogram,
    NoPeakError,
    TripleCoincidenceCounts,
    build_start_stop_histogram,
    compute_car,
    count_triples,
    fit_coincidence_peak,
    fit_power_sweep,
    gaussian_area,
    heralded_g2,
    log_log_slope,
    peak_fwhm_ps,
    UndefinedG2Error,
)
from .fitting import FitResult
from .model import ExperimentConfig
from .sim import derive_seed, iter_chunks, simulate_heralded_g2, simulate_pairs

PAIR_COLUMNS = (
    "power_mw", "duration_s", "signal_rate", "signal_rate_sigma", "idler_rate", "idler_rate_sigma",
    "coincidence_rate", "coincidence_rate_sigma", "car", "car_sigma", "fwhm_ps",
)
G2_COLUMNS = (
    "power_mw", "duration_s", "herald_rate", "g2", "g2_sigma",
    "klyshko", "klyshko_sigma", "klyshko_alt", "klyshko_alt_sigma",
)


@dataclass
class PairMeasurement:
    power_mw: float
    duration_s: float
    signal_counts: int
    idler_counts: int
    histogram: Histogram

    def rate(self, which: str) -> tuple[float, float]:
        n = self.signal_counts if which == "signal" else self.idler_counts
        return n / self.duration_s, math.sqrt(max(n, 1)) / self.duration_s

    def row(self) -> dict[str, float]:
        r = dict.fromkeys(PAIR_COLUMNS, math.nan)
        r.update(power_mw=self.power_mw, duration_s=self.duration_s)
        r["signal_rate"], r["signal_rate_sigma"] = self.rate("signal")
        r["idler_rate"], r["idler_rate_sigma"] = self.rate("idler")
        try:
            peak = fit_coincidence_peak(self.histogram)
        except NoPeakError:
            return r
        car = compute_car(self.histogram, peak)
        area, err = gaussian_area(peak, self.histogram.bin_width_ps)
        r.update(
            coincidence_rate=area / self.duration_s,
            coincidence_rate_sigma=err / self.duration_s,
            car=car.car,
            car_sigma=car.sigma,
            fwhm_ps=peak_fwhm_ps(peak),
        )
        return r


def measure_pairs(cfg: ExperimentConfig, *, chunk_s: float = 1.0, bin_width_ps: int = 160,
                  span_ps: int = 100_000) -> PairMeasurement:
    hist, n_s, n_i = None, 0, 0
    for st in iter_chunks(simulate_pairs, cfg, chunk_s):
        h = build_start_stop_histogram(st, "signal", "idler", bin_width_ps, span_ps, cfg.timing.hardware_bin_ps)
        hist = h if hist is None else hist + h
        n_s += st.channel_times("signal").size
        n_i += st.channel_times("idler").size
    return PairMeasurement(cfg.source.pump_power_mw, cfg.acquisition_time_s, n_s, n_i, hist)


def measure_g2(cfg: ExperimentConfig, *, window_ps: float = 5000.0, convention: str = "herald",
               chunk_s: float = 1.0) -> TripleCoincidenceCounts:
    total = None
    for st in iter_chunks(simulate_heralded_g2, cfg, chunk_s):
        t = count_triples(st, window_ps, convention=convention)
        total = t if total is None else total + t
    return total


def g2_row(cfg: ExperimentConfig, counts: TripleCoincidenceCounts) -> dict[str, float]:
    r = dict.fromkeys(G2_COLUMNS, math.nan)
    r.update(power_mw=cfg.source.pump_power_mw, duration_s=counts.duration_s, herald_rate=counts.N_A)
    try:
        g = heralded_g2(counts, cfg.herald_split_b_loss.detector_efficiency)
    except UndefinedG2Error:
        return r
    r.update(
        g2=g.g2, g2_sigma=g.sigma, klyshko=g.klyshko, klyshko_sigma=g.klyshko_sigma,
        klyshko_alt=g.klyshko_alt, klyshko_alt_sigma=g.klyshko_alt_sigma,
    )
    return r


def _point(task):
    kind, cfg, window_ps, out_dir, index = task
    if kind == "pairs":
        row = measure_pairs(cfg).row()
        cols = PAIR_COLUMNS
    else:
        row = g2_row(cfg, measure_g2(cfg, window_ps=window_ps))
        cols = G2_COLUMNS
    if out_dir is not None:
        path = Path(out_dir) / f"point_{index:03d}.csv"
        tmp = path.with_name(path.name + f".tmp{os.getpid()}")
        tmp.write_text(",".join(cols) + "\n" + ",".join(repr(float(row[c])) for c in cols) + "\n")
        os.replace(tmp, path)
    return row


def run_sweep(kind: str, cfg: ExperimentConfig, powers_mw: Sequence[float], *, jobs: int = 1,
              window_ps: float = 5000.0, out_dir: str | Path | None = None) -> list[dict[str, float]]:
    """Simulate and analyze each power; ``kind`` is ``'pairs'`` or ``'g2'``."""
    if kind not in ("pairs", "g2"):
        raise ValueError("sweep kind must be 'pairs' or 'g2'")
    if len(powers_mw) == 0:
        raise ValueError("empty power grid")
    tasks = [
        (kind, cfg.with_power(float(p)).with_seed(derive_seed(cfg.rng_seed, 1, i)), window_ps, out_dir, i)
        for i, p in enumerate(powers_mw)
    ]
    if jobs <= 1:
        return [_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_point, tasks))


def write_sweep_csv(path: str | Path, rows: list[dict[str, float]]) -> None:
    cols = list(rows[0])
    lines = [",".join(cols)] + [",".join(repr(float(r[c])) for c in cols) for r in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def read_sweep_csv(path: str | Path) -> list[dict[str, float]]:
    lines = [l for l in Path(path).read_text().splitlines() if l and not l.startswith("#")]
    cols = lines[0].split(",")
    return [dict(zip(cols, map(float, l.split(",")))) for l in lines[1:]]


def fit_pgr(rows, cfg: ExperimentConfig) -> tuple[float, float, FitResult]:
    """On-chip ``R`` (MHz/mW^2) from a coincidence-rate sweep, unscaled by both channel transmittances."""
    pts = [(r["power_mw"], r["coincidence_rate"], r["coincidence_rate_sigma"]) for r in rows
           if math.isfinite(r["coincidence_rate"]) and r["coincidence_rate_sigma"] > 0]
    fit = fit_power_sweep(pts, "quadratic")
    scale = cfg.signal_loss.total_transmittance * cfg.idler_loss.total_transmittance * 1e6
    return fit["coefficient"] / scale, fit.err("coefficient") / scale, fit


def fit_g2_sigmoid(rows) -> FitResult:
    pts = [(r["power_mw"], r["g2"], r["g2_sigma"]) for r in rows if math.isfinite(r["g2"]) and r["g2_sigma"] > 0]
    return fit_power_sweep(pts, "sigmoid")


def singles_slope(rows, channel: str = "signal", dark: tuple[float, float] = (0.0, 0.0)) -> FitResult:
    """Log-log exponent of singles versus power after subtracting a dark-run rate ``(rate, sigma)``."""
    P = np.array([r["power_mw"] for r in rows])
    y = np.array([r[f"{channel}_rate"] for r in rows]) - dark[0]
    s = np.hypot([r[f"{channel}_rate_sigma"] for r in rows], dark[1])
    return log_log_slope(P, y, s)
