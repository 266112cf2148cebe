import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chi2, norm

from pairlab.analysis import fit_three_peaks, franson_visibility, singles_modulation
from pairlab.franson import (
    DliParams,
    FransonConfig,
    coupler_ratio,
    expected_period,
    franson_path_weights,
    read_sweep,
    simulate_franson,
)

IDEAL = DliParams(extinction_db=math.inf)
FOLDED_GRID = np.linspace(0, 2 * np.pi, 24, endpoint=False)


def ideal(v=1.0, phase=0.0, folded=False, **kw):
    return FransonConfig(dli_signal=replace(IDEAL, phase=phase), dli_idler=IDEAL, folded=folded, v_true=v, **kw)


def runs_test_p(residuals) -> float:
    """Two-sided Wald-Wolfowitz runs test on the signs of ``residuals``."""
    s = np.asarray(residuals) > 0
    n1, n2 = int(s.sum()), int((~s).sum())
    runs = 1 + int(np.sum(s[1:] != s[:-1]))
    n = n1 + n2
    mean = 2 * n1 * n2 / n + 1
    var = 2 * n1 * n2 * (2 * n1 * n2 - n) / (n**2 * (n - 1))
    return float(2 * norm.sf(abs(runs - mean) / math.sqrt(var)))


# -- path weights ------------------------------------------------------------------


def test_destructive_interference():
    sl, ls, c = franson_path_weights(ideal(1.0, math.pi))
    assert c == pytest.approx(0.0, abs=1e-15)
    assert sl == pytest.approx(1 / 16) and ls == pytest.approx(1 / 16)


def test_central_to_side_ratio_is_four():
    sl, ls, c = franson_path_weights(ideal(1.0, 0.0))
    assert c == pytest.approx(1 / 4)
    assert c / sl == pytest.approx(4.0)


@settings(max_examples=60)
@given(v=st.floats(0, 1), phi=st.floats(-10, 10))
def test_ideal_central_weight(v, phi):
    sl, ls, c = franson_path_weights(ideal(v, phi))
    assert c == pytest.approx((1 + v * math.cos(phi)) / 8, abs=1e-15)
    assert sl == ls == pytest.approx(1 / 16)


@settings(max_examples=40)
@given(phi=st.floats(-10, 10))
def test_folded_doubles_the_phase(phi):
    folded = replace(ideal(1.0, phi, folded=True))
    unfolded = ideal(1.0, 2 * phi)
    assert franson_path_weights(folded)[2] == pytest.approx(franson_path_weights(unfolded)[2], abs=1e-12)
    assert expected_period(True) == pytest.approx(0.5 * expected_period(False))


def test_folded_ignores_idler_dli():
    a = FransonConfig(folded=True, dli_idler=DliParams(phase=1.0, extinction_db=3.0))
    b = FransonConfig(folded=True)
    assert franson_path_weights(a) == franson_path_weights(b)


def test_finite_extinction_perturbs_split():
    assert coupler_ratio(math.inf) == 0.5
    k = coupler_ratio(25.0)
    assert k == pytest.approx(0.5 * (1 - 10 ** (-1.25)))
    # bar port amplitudes give back the extinction
    assert 10 * math.log10(1 / (1 - 2 * k) ** 2) == pytest.approx(25.0)
    bar = DliParams(port="bar")
    s, l = bar.path_amplitudes()
    assert s != l
    sl, ls, c = franson_path_weights(FransonConfig(dli_signal=bar, dli_idler=bar, folded=False, v_true=1.0))
    assert sl == pytest.approx(ls)
    # the real cross port keeps the two paths balanced
    s, l = DliParams().path_amplitudes()
    assert s == l


def test_delay_from_fsr():
    d = DliParams(fsr_ghz=2.5)
    assert d.delay_ps == pytest.approx(400.0)
    assert d.delay_ps * 1e-12 * d.fsr_ghz * 1e9 == pytest.approx(1.0, abs=1e-9)


def test_dli_validation():
    for kw in ({"fsr_ghz": 0}, {"extinction_db": -1}, {"port": "drop"}, {"phase": math.nan}):
        with pytest.raises(ValueError):
            DliParams(**kw)
    with pytest.raises(ValueError):
        FransonConfig(v_true=1.2)


def test_short_delay_warns():
    with pytest.warns(UserWarning, match="pair correlation time"):
        FransonConfig(dli_signal=DliParams(fsr_ghz=10.0))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        FransonConfig()


# -- simulated sweeps ------------------------------------------------------------------------


@pytest.fixture(scope="module")
def folded_sweep():
    return simulate_franson(FransonConfig(), FOLDED_GRID)


@pytest.fixture(scope="module")
def folded_areas(folded_sweep):
    return [fit_three_peaks(h, 400.0) for h in folded_sweep.histograms]


def test_peaks_at_plus_minus_delay(folded_sweep):
    h = folded_sweep.histograms[6]  # phase pi/2: all three peaks present
    fit = fit_three_peaks(h, 400.0).fit
    assert abs(fit["center"]) < 20
    assert fit["separation"] == pytest.approx(400.0, abs=20)


def test_sweep_shape_and_determinism(folded_sweep):
    assert len(folded_sweep.histograms) == 24
    again = simulate_franson(FransonConfig(), FOLDED_GRID)
    assert all(np.array_equal(a.counts, b.counts) for a, b in zip(folded_sweep.histograms, again.histograms))
    np.testing.assert_allclose(folded_sweep.total_phases, 2 * FOLDED_GRID)
    # any single point can be regenerated on its own
    one = simulate_franson(FransonConfig(), FOLDED_GRID[:3])
    assert np.array_equal(one.histograms[2].counts, folded_sweep.histograms[2].counts)


def test_zero_visibility_gives_constant_central_area():
    sweep = simulate_franson(FransonConfig(v_true=0.0), FOLDED_GRID)
    a = np.array([fit_three_peaks(h, 400.0).center for h in sweep.histograms])
    s = np.array([fit_three_peaks(h, 400.0).center_sigma for h in sweep.histograms])
    stat = np.sum(((a - np.average(a, weights=1 / s**2)) / s) ** 2)
    assert chi2.sf(stat, a.size - 1) > 0.01


def test_side_peaks_are_phase_invariant(folded_areas):
    for side in ("left", "right"):
        a = np.array([getattr(p, side) for p in folded_areas])
        s = np.array([getattr(p, side + "_sigma") for p in folded_areas])
        stat = np.sum(((a - np.average(a, weights=1 / s**2)) / s) ** 2)
        assert chi2.sf(stat, a.size - 1) > 0.01, side


def test_central_fringe_residuals_are_white(folded_sweep):
    v = franson_visibility(folded_sweep.pairs(), 400.0, expected_period=math.pi)
    resid = v.central_areas - v.sinusoid_fit.predict(v.phases)
    assert runs_test_p(resid) > 0.05


def test_energy_bookkeeping_at_quarter_fringe():
    cfg = FransonConfig(folded=False)
    cfg = replace(cfg, dli_idler=replace(cfg.dli_idler, phase=0.0))
    sweep = simulate_franson(cfg, [math.pi / 2])
    p = fit_three_peaks(sweep.histograms[0], 400.0)
    side = p.left + p.right
    err = math.sqrt(p.left_sigma**2 + p.right_sigma**2 + p.center_sigma**2)
    assert p.left + p.center + p.right == pytest.approx(2 * side, abs=3 * err)


def test_singles_are_flat(folded_sweep):
    for counts in (folded_sweep.singles_signal, folded_sweep.singles_idler):
        m = singles_modulation(folded_sweep.phases, counts, math.pi)
        assert m.consistent_with_zero


def test_noiseless_perfect_fringe():
    # very long points make Poisson noise negligible against the fit tolerance
    cfg = FransonConfig(v_true=1.0, point_duration_s=5e4, dli_signal=IDEAL, dli_idler=IDEAL)
    v = franson_visibility(simulate_franson(cfg, FOLDED_GRID).pairs(), 400.0, expected_period=math.pi)
    assert v.v_fit == pytest.approx(1.0, abs=0.01)
    assert v.phase_period == pytest.approx(math.pi, rel=0.005)


def test_unfolded_period_is_twice_folded():
    grid = np.linspace(0, 4 * np.pi, 24, endpoint=False)
    fold = franson_visibility(simulate_franson(FransonConfig(), FOLDED_GRID).pairs(), 400.0,
                              expected_period=math.pi)
    cfg = replace(FransonConfig(folded=False), base=FransonConfig().base.with_seed(77))
    unf = franson_visibility(simulate_franson(cfg, grid).pairs(), 400.0, expected_period=2 * math.pi)
    ratio = fold.phase_period / unf.phase_period
    assert ratio == pytest.approx(0.5, rel=0.02)


def test_grid_validation():
    with pytest.raises(ValueError):
        simulate_franson(FransonConfig(), [])
    with pytest.raises(ValueError):
        simulate_franson(FransonConfig(), [0.0, math.inf])
    # phases outside [0, 4 pi) are fine
    assert len(simulate_franson(FransonConfig(), [-20.0, 50.0]).histograms) == 2


def test_write_and_read_back(tmp_path, folded_sweep):
    paths = folded_sweep.write(tmp_path)
    assert len(paths) == 25 and paths[-1].name == "manifest.csv"
    back = read_sweep(paths[-1])
    assert back.folded and back.delay_ps == 400.0
    np.testing.assert_array_equal(back.phases, folded_sweep.phases)
    np.testing.assert_array_equal(back.singles_idler, folded_sweep.singles_idler)
    assert all(np.array_equal(a.counts, b.counts) for a, b in zip(back.histograms, folded_sweep.histograms))


def test_voltage_axis_is_linear_in_phase():
    f = FransonConfig()
    assert f.voltage(math.pi) == pytest.approx(3.86)
    u = FransonConfig(folded=False)
    assert u.voltage(2 * math.pi) == pytest.approx(7.82)
