"""Pair-source characterization: singles scaling, pair generation rate and CAR.

Sweeps the pump power, fits the coincidence rate to R P^2 to get the on-chip
pair generation coefficient, then compares Monte-Carlo CAR with the closed
form. Runs in about half a minute.

    python3 demos/source_characterization.py
"""

import numpy as np

from pairlab import ExperimentConfig
from pairlab.analysis import compute_car
from pairlab.experiments import fit_pgr, measure_pairs, run_sweep, singles_slope
from pairlab.model import analytic_car, brightness, power_for_brightness

cfg = ExperimentConfig().with_duration(10)
print(f"ring: Q = {cfg.resonator.loaded_q:.3g}, linewidth {cfg.resonator.fwhm_ghz:.3f} GHz, "
      f"tau = {cfg.resonator.lifetime_ps:.1f} ps")
print(f"channel transmittance: signal {cfg.signal_loss.total_transmittance:.4f}, "
      f"idler {cfg.idler_loss.total_transmittance:.4f}")

# 1. sweep. Every point gets its own seed derived from the config seed.
powers = [0.005, 0.01, 0.02, 0.05, 0.1, 0.2]
rows = run_sweep("pairs", cfg, powers)
dark = measure_pairs(cfg.with_power(0.0))

print("\n P (uW)   signal (Hz)   idler (Hz)   coinc (Hz)      CAR")
for r in rows:
    print(f"{1e3 * r['power_mw']:7.1f} {r['signal_rate']:13.0f} {r['idler_rate']:12.0f} "
          f"{r['coincidence_rate']:12.1f} {r['car']:8.0f}")

for ch in ("signal", "idler"):
    fit = singles_slope(rows, ch, dark.rate(ch))
    print(f"{ch} singles exponent after dark subtraction: {fit['exponent']:.4f} +- {fit.err('exponent'):.4f}")

R, sR, fit = fit_pgr(rows, cfg)
print(f"pair generation coefficient R = {R:.1f} +- {sR:.1f} MHz/mW^2 (configured {cfg.source.pgr_coefficient_mhz_per_mw2:g})")

# 2. CAR at two brightness settings, against the binned closed form
print("\n brightness      P (uW)    CAR (MC)           analytic")
for b, T in ((8e3, 300), (550e3, 30)):
    c = cfg.with_power(power_for_brightness(cfg, b)).with_duration(T)
    h = measure_pairs(c, chunk_s=10).histogram
    car = compute_car(h)
    print(f"{b:10.0f} {1e3 * c.source.pump_power_mw:10.2f} {car.car:9.0f} +- {car.sigma:<7.0f} "
          f"{analytic_car(c, bin_width_ps=h.bin_width_ps):9.0f}")

# spectral brightness does not depend on power
b, spectral = brightness(cfg.pair_rate_hz, cfg.resonator.fwhm_ghz, cfg.source.pump_power_mw)
print(f"\nspectral brightness {spectral:.3g} pairs/s/GHz/mW^2")
print("CAR window width:", np.round(2 * car.peak_fit["sigma"], 1), "ps")
