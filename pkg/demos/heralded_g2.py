"""Heralded single photons: g2(0) against pump power and the Klyshko efficiency.

The idler heralds (channel A), the signal is split 50/50 onto two
detectors (B and C). Triples inside a 5 ns window measure multi-pair
contamination, which grows with power like aP^2/(1 + aP^2).

    python3 demos/heralded_g2.py
"""

from pairlab import ExperimentConfig
from pairlab.analysis import heralded_g2
from pairlab.experiments import fit_g2_sigmoid, measure_g2, run_sweep
from pairlab.model import analytic_heralded_g2, analytic_klyshko, power_for_herald_rate

cfg = ExperimentConfig()

for rate in (18e3, 340e3):
    c = cfg.with_power(power_for_herald_rate(cfg, rate)).with_duration(60 if rate < 1e5 else 10)
    g = heralded_g2(measure_g2(c, chunk_s=5))
    print(f"herald rate {g.heralding_rate / 1e3:6.1f} kHz (P = {1e3 * c.source.pump_power_mw:.1f} uW): "
          f"g2 = {g.g2:.4f} +- {g.sigma:.4f}  (closed form {analytic_heralded_g2(c):.4f})")
    print(f"    Klyshko {100 * g.klyshko:.2f} +- {100 * g.klyshko_sigma:.2f} %, "
          f"from triples {100 * g.klyshko_alt:.2f} +- {100 * g.klyshko_alt_sigma:.2f} %, "
          f"closed form {100 * analytic_klyshko(c):.2f} %")

powers = [0.02, 0.05, 0.08, 0.11, 0.14]
rows = run_sweep("g2", cfg.with_duration(10), powers)
print("\n P (uW)   herald (kHz)    g2")
for r in rows:
    print(f"{1e3 * r['power_mw']:7.0f} {r['herald_rate'] / 1e3:12.1f} {r['g2']:9.4f} +- {r['g2_sigma']:.4f}")
fit = fit_g2_sigmoid(rows)
print(f"sigmoid coefficient a = {fit['a']:.2f} +- {fit.err('a'):.2f} mW^-2")
