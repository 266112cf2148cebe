import math
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from pairlab.config import (
    CONFIG_ENV_VAR,
    ConfigError,
    default_config_path,
    dump_config,
    load_config,
    parse_config,
)
from pairlab.model import (
    ChannelLossBudget,
    ExperimentConfig,
    ResonatorParams,
    SourceParams,
    WavelengthPlan,
    analytic_car,
    analytic_heralded_g2,
    analytic_klyshko,
    brightness,
    db_to_transmittance,
    expected_g2_rates,
    expected_pair_rates,
    pair_generation_rate,
    power_for_brightness,
    power_for_herald_rate,
    resonance_derived,
)

# -- frozen oracle values (closed-form arithmetic done by hand) ---------------------
# 10**-0.35 and 10**-0.72
T_3P5_DB = 0.446683592
T_7P2_DB = 0.190546072
# c / 1550 nm = 193.4145 THz; / 9.2e4 = 2.10233 GHz; 1/(2 pi 2.10233 GHz) = 75.704 ps
FWHM_GHZ = 2.102331
LIFETIME_PS = 75.7040


@pytest.mark.parametrize("db, t", [(0.0, 1.0), (3.5, T_3P5_DB), (7.2, T_7P2_DB)])
def test_db_to_transmittance(db, t):
    assert db_to_transmittance(db) == pytest.approx(t, rel=1e-8)


def test_db_rounded_examples():
    assert round(db_to_transmittance(3.5), 4) == 0.4467
    assert round(db_to_transmittance(7.2), 4) == 0.1905


@pytest.mark.parametrize("bad", [-0.1, float("nan")])
def test_negative_loss_rejected(bad):
    with pytest.raises(ValueError):
        db_to_transmittance(bad)


@pytest.mark.parametrize("power, rate", [(0.0, 0.0), (1.0, 149e6), (0.01, 14.9e3)])
def test_pair_generation_rate(power, rate):
    src = SourceParams(pgr_coefficient_mhz_per_mw2=149.0, pump_power_mw=power)
    assert pair_generation_rate(src) == pytest.approx(rate, rel=1e-12, abs=1e-12)


@settings(max_examples=50)
@given(p=st.floats(0, 10))
def test_pair_rate_is_exactly_quadratic(p):
    a = pair_generation_rate(SourceParams(pump_power_mw=p))
    b = pair_generation_rate(SourceParams(pump_power_mw=2 * p))
    assert b == pytest.approx(4 * a, rel=1e-12, abs=1e-300)


def test_resonance_derived_values():
    fwhm, tau = resonance_derived(9.2e4, 1550.0)
    assert fwhm == pytest.approx(FWHM_GHZ, rel=1e-5)
    assert tau == pytest.approx(LIFETIME_PS, rel=1e-5)
    assert fwhm == pytest.approx(2.1, rel=0.01)
    assert tau == pytest.approx(76.0, rel=0.01)


def test_doubling_q_halves_linewidth():
    assert resonance_derived(1.84e5, 1550.0)[0] == pytest.approx(resonance_derived(9.2e4, 1550.0)[0] / 2, rel=1e-12)


@settings(max_examples=50)
@given(q=st.floats(1e3, 1e7), lam=st.floats(400, 2000))
def test_resonance_round_trip(q, lam):
    fwhm, tau = resonance_derived(q, lam)
    assert fwhm * 1e9 * tau * 1e-12 * 2 * math.pi == pytest.approx(1.0, rel=1e-9)


def test_resonator_invariants():
    r = ResonatorParams()
    assert r.fwhm_ghz * (r.center_wavelength_nm * 1e-9 / 299_792_458.0) * 1e9 * r.loaded_q == pytest.approx(1.0, rel=0.01)
    with pytest.raises(ValueError):
        ResonatorParams(loaded_q=1e6, intrinsic_q=9e5)


@pytest.mark.parametrize("pgr, b", [(16.8e3, 8e3), (0.0, 0.0), (1.155e6, 550e3)])
def test_brightness_examples(pgr, b):
    assert brightness(pgr, 2.1)[0] == pytest.approx(b, rel=1e-9, abs=1e-12)


def test_spectral_brightness_definition_and_value():
    cfg = ExperimentConfig()
    b, spectral = brightness(cfg.pair_rate_hz, cfg.resonator.fwhm_ghz, cfg.source.pump_power_mw)
    assert spectral == pytest.approx(b / cfg.source.pump_power_mw**2)
    # 149e6 / 2.1023 = 7.087e7 pairs/s/GHz/mW^2 whatever the power
    assert spectral == pytest.approx(7.087e7, rel=1e-3)


def test_zero_power_spectral_brightness_rejected():
    with pytest.raises(ValueError):
        brightness(100.0, 2.1, 0.0)
    with pytest.raises(ValueError):
        brightness(100.0, 0.0)


def test_wavelength_plan_energy_conservation():
    plan = WavelengthPlan()
    # the idler is stored to 1 pm, which leaves a few tens of MHz
    assert abs(plan.mismatch_ghz) < 0.1
    assert plan.idler_nm == pytest.approx(1574.796, abs=1e-3)
    # the rounded lab value misses by about 12 GHz, more than one linewidth
    with pytest.raises(ValueError):
        WavelengthPlan(idler_nm=1574.7)
    assert abs(WavelengthPlan(idler_nm=1574.7, tolerance_ghz=15.0).mismatch_ghz) == pytest.approx(11.7, abs=0.2)


def test_loss_budget():
    b = ChannelLossBudget(3.5, 5.0, 0.9)
    assert b.total_transmittance == pytest.approx(10 ** -0.85 * 0.9)
    assert 0 < b.total_transmittance <= 1
    for bad in ((-1, 0, 0.5), (0, -1, 0.5), (0, 0, 0.0), (0, 0, 1.2)):
        with pytest.raises(ValueError):
            ChannelLossBudget(*bad)


@settings(max_examples=60)
@given(losses=st.lists(st.floats(0, 20), min_size=1, max_size=6))
def test_transmittance_chain_is_order_independent(losses):
    prod = 1.0
    for l in losses:
        prod *= db_to_transmittance(l)
    for perm in (losses[::-1], sorted(losses)):
        other = 1.0
        for l in perm:
            other *= db_to_transmittance(l)
        assert other == pytest.approx(prod, rel=1e-12)
    assert db_to_transmittance(sum(losses)) == pytest.approx(prod, rel=1e-12)


@settings(max_examples=40)
@given(extra=st.floats(0, 10), which=st.sampled_from(["signal_loss", "idler_loss", "herald_split_b_loss"]))
def test_more_loss_never_raises_expected_rates(extra, which):
    cfg = ExperimentConfig().with_power(0.05)
    worse = replace(cfg, **{which: replace(getattr(cfg, which), filter_db=getattr(cfg, which).filter_db + extra)})
    for f in (expected_pair_rates, expected_g2_rates):
        a, b = f(cfg), f(worse)
        for k in a:
            assert b[k] <= a[k] * (1 + 1e-12)


def test_experiment_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(acquisition_time_s=0)
    with pytest.raises(ValueError):
        ExperimentConfig(herald_side="pump")
    with pytest.raises(ValueError):
        SourceParams(pump_power_mw=-1)
    with pytest.raises(ValueError):
        SourceParams(pair_statistics="thermal")


def test_coincidence_width():
    cfg = ExperimentConfig()
    # sqrt(2 tau^2 + 2 jitter^2) with tau = 75.70 ps, jitter = 54 ps
    assert cfg.coincidence_sigma_ps == pytest.approx(131.50, abs=0.05)


# frozen closed-form working points of the calibrated default config
def test_analytic_car_working_points():
    cfg = ExperimentConfig()
    low = cfg.with_power(power_for_brightness(cfg, 8e3))
    high = cfg.with_power(power_for_brightness(cfg, 550e3))
    assert low.source.pump_power_mw == pytest.approx(0.010624, rel=1e-4)
    assert high.source.pump_power_mw == pytest.approx(0.088092, rel=1e-4)
    assert analytic_car(low) == pytest.approx(12290, rel=0.005)
    assert analytic_car(high) == pytest.approx(527.9, rel=0.005)


def test_analytic_g2_working_points():
    cfg = ExperimentConfig()
    lo = cfg.with_power(power_for_herald_rate(cfg, 18e3))
    hi = cfg.with_power(power_for_herald_rate(cfg, 340e3))
    assert expected_g2_rates(lo)["A"] == pytest.approx(18e3)
    assert analytic_heralded_g2(lo) == pytest.approx(0.0060, abs=3e-4)
    assert analytic_heralded_g2(hi) == pytest.approx(0.0857, abs=1e-3)
    assert analytic_klyshko(lo) == pytest.approx(0.030, abs=1e-3)
    assert analytic_klyshko(hi) == pytest.approx(0.036, abs=1e-3)


def test_binned_car_widens_the_window():
    cfg = ExperimentConfig().with_power(0.05)
    s = cfg.coincidence_sigma_ps
    wide = math.sqrt(s**2 + 160**2 / 12)
    assert analytic_car(cfg, bin_width_ps=160) == pytest.approx(analytic_car(cfg) * s / wide, rel=1e-12)
    assert analytic_car(cfg, bin_width_ps=0) == analytic_car(cfg)


def test_analytic_car_decreases_with_power():
    cfg = ExperimentConfig()
    cars = [analytic_car(cfg.with_power(p)) for p in (0.01, 0.02, 0.05, 0.1, 0.2)]
    assert all(a > b for a, b in zip(cars, cars[1:]))


# -- config files --------------------------------------------------------------------


def test_config_round_trip():
    cfg = ExperimentConfig().with_power(0.123).with_seed(7)
    assert parse_config(dump_config(cfg)) == cfg


def test_shipped_default_file_matches_builtin_values():
    assert load_config(default_config_path()) == ExperimentConfig()


def test_env_var_fallback(tmp_path, monkeypatch):
    p = tmp_path / "c.ini"
    p.write_text("[source]\npump_power_mw = 0.05\n[experiment]\nrng_seed = 3\n")
    monkeypatch.setenv(CONFIG_ENV_VAR, str(p))
    cfg = load_config()
    assert cfg.source.pump_power_mw == 0.05 and cfg.rng_seed == 3
    monkeypatch.delenv(CONFIG_ENV_VAR)
    assert load_config() == ExperimentConfig()


@pytest.mark.parametrize(
    "text",
    [
        "[nonsense]\na = 1\n",
        "[source]\nfoo = 1\n",
        "[source]\npump_power_mw = abc\n",
        "[source]\npump_power_mw = -1\n",
        "[experiment]\nherald_side = pump\n",
        "not an ini file",
    ],
)
def test_bad_config_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text)
