import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chi2_contingency

from pairlab.analysis import build_start_stop_histogram, count_triples
from pairlab.experiments import measure_pairs
from pairlab.model import (
    ChannelLossBudget,
    ExperimentConfig,
    expected_g2_rates,
    expected_pair_rates,
    power_for_brightness,
)
from pairlab.sim import (
    EventBudgetError,
    G2_CHANNELS,
    TagStream,
    derive_seed,
    iter_chunks,
    merge_streams,
    simulate_heralded_g2,
    simulate_pairs,
    thin_stream,
)

LOSSLESS = ChannelLossBudget(0.0, 0.0, 1.0)


def quiet(cfg: ExperimentConfig) -> ExperimentConfig:
    """No unpaired photons and no dark counts."""
    return replace(cfg, source=replace(cfg.source, dark_count_rate_hz=0.0, excess_ratio_signal=0.0, excess_ratio_idler=0.0))


def _check_stream(s: TagStream):
    assert np.all(np.diff(s.times) >= 0)
    if len(s):
        assert s.times[0] >= 0 and s.times[-1] <= s.duration_ps
    assert set(np.unique(s.channels).tolist()) <= set(s.channel_map)


def test_zero_power_and_no_darks_gives_empty_stream():
    cfg = quiet(ExperimentConfig().with_power(0.0).with_duration(5))
    assert len(simulate_pairs(cfg)) == 0
    assert len(simulate_heralded_g2(cfg)) == 0


def test_singles_rate_matches_expectation_at_default_power():
    cfg = ExperimentConfig().with_duration(100)
    s = simulate_pairs(cfg)
    _check_stream(s)
    exp = expected_pair_rates(cfg)
    for ch in ("signal", "idler"):
        n = s.channel_times(ch).size
        mean = exp[ch] * 100
        assert abs(n - mean) < 3 * math.sqrt(mean), ch


@pytest.mark.parametrize("power", [0.01, 0.03, 0.08])
def test_singles_rate_law_over_power_grid(power):
    cfg = ExperimentConfig().with_power(power).with_duration(5).with_seed(derive_seed(1, int(power * 1e4)))
    s = simulate_pairs(cfg)
    exp = expected_pair_rates(cfg)
    for ch in ("signal", "idler"):
        mean = exp[ch] * 5
        assert mean >= 1e4
        assert abs(s.channel_times(ch).size - mean) < 4 * math.sqrt(mean)


def test_determinism_and_seed_sensitivity():
    cfg = ExperimentConfig().with_power(0.03).with_duration(1)
    a, b = simulate_pairs(cfg), simulate_pairs(cfg)
    assert a == b
    assert np.array_equal(a.times, b.times)
    assert simulate_pairs(cfg.with_seed(1)) != a
    g1, g2 = simulate_heralded_g2(cfg), simulate_heralded_g2(cfg)
    assert g1 == g2


def test_event_cap():
    cfg = ExperimentConfig().with_power(0.1).with_duration(10)
    with pytest.raises(EventBudgetError):
        simulate_pairs(cfg, max_events=1000)
    with pytest.raises(EventBudgetError):
        simulate_heralded_g2(cfg, max_events=1000)


def _lossless_isolated(duration_s=0.2, power=0.05):
    cfg = ExperimentConfig(
        signal_loss=LOSSLESS,
        idler_loss=LOSSLESS,
        herald_split_b_loss=LOSSLESS,
        herald_split_c_loss=LOSSLESS,
    ).with_power(power).with_duration(duration_s)
    cfg = quiet(cfg)
    return replace(cfg, source=replace(cfg.source, pair_statistics="isolated"))


def test_single_photon_is_never_split():
    cfg = _lossless_isolated()
    s = simulate_heralded_g2(cfg)
    a, b, c = (s.channel_times(r) for r in ("herald_a", "heralded_b", "heralded_c"))
    assert a.size > 1000
    assert a.size == b.size + c.size
    t = count_triples(s, 5000)
    assert t.n_ab + t.n_ac == t.n_a
    assert t.n_abc == 0


def test_exactly_one_pair():
    cfg = _lossless_isolated(duration_s=1e-5, power=0.001)
    cfg = replace(cfg, timing=replace(cfg.timing, isolation_ps=0))
    for seed in range(40):
        s = simulate_heralded_g2(cfg.with_seed(seed))
        if len(s) == 2:
            roles = sorted(s.channel_map[c] for c in s.channels.tolist())
            assert roles[0] == "herald_a" and roles[1] in ("heralded_b", "heralded_c")


def test_dead_time_enforced():
    cfg = ExperimentConfig().with_power(0.1).with_duration(0.2)
    cfg = replace(cfg, timing=replace(cfg.timing, dead_time_ps=50_000))
    s = simulate_pairs(cfg)
    for ch in (0, 1):
        assert np.diff(s.channel_times(ch)).min() >= 50_000


def test_thinning_commutes_with_loss():
    base = quiet(ExperimentConfig()).with_power(0.05).with_duration(20)
    lossy = replace(base, signal_loss=replace(base.signal_loss, detector_efficiency=0.45))
    full = replace(base, signal_loss=replace(base.signal_loss, detector_efficiency=0.9))
    direct = simulate_pairs(lossy)
    thinned = thin_stream(simulate_pairs(full.with_seed(99)), "signal", 0.5, seed=5)

    na, nb = direct.channel_times("signal").size, thinned.channel_times("signal").size
    assert abs(na - nb) < 4 * math.sqrt(na + nb)

    ha = build_start_stop_histogram(direct, "signal", "idler", span_ps=40_000)
    hb = build_start_stop_histogram(thinned, "signal", "idler", span_ps=40_000)
    peak = slice(20_000 // 160 - 4, 20_000 // 160 + 4)
    table = np.vstack([ha.counts[peak], hb.counts[peak]])
    assert chi2_contingency(table)[1] > 0.001


def test_heralded_rates_match_closed_form_at_three_powers():
    cfg = ExperimentConfig()
    for i, p in enumerate((0.06, 0.09, 0.12)):
        c = cfg.with_power(p).with_duration(2).with_seed(derive_seed(7, i))
        t = count_triples(simulate_heralded_g2(c), 5000)
        exp = expected_g2_rates(c)
        for key in ("A", "B", "C", "AB", "AC", "ABC", "BC"):
            n = getattr(t, f"n_{key.lower()}")
            mean = exp[key] * 2
            assert abs(n - mean) < 4 * math.sqrt(mean) + 1, (p, key, n, mean)


def test_low_power_g2_is_small():
    from pairlab.analysis import heralded_g2
    from pairlab.experiments import measure_g2
    from pairlab.model import power_for_herald_rate

    cfg = ExperimentConfig()
    c = cfg.with_power(power_for_herald_rate(cfg, 18e3)).with_duration(300)
    g = heralded_g2(measure_g2(c, chunk_s=50))
    assert g.g2 < 0.01


def test_merge_identity_and_ordering():
    empty = TagStream(np.zeros(0), np.zeros(0), 1000, {0: "x"})
    s = TagStream([1, 1], [5, 9], 1000, {1: "y"})
    assert merge_streams(empty, s) == TagStream([1, 1], [5, 9], 1000, {0: "x", 1: "y"})
    a = TagStream([0], [700], 1000, {0: "x"})
    b = TagStream([1], [300], 1000, {1: "y"})
    m = merge_streams(a, b)
    assert m.times.tolist() == [300, 700] and m.channels.tolist() == [1, 0]
    tie = merge_streams(TagStream([1], [5], 10, {1: "y"}), TagStream([0], [5], 10, {0: "x"}))
    assert tie.channels.tolist() == [0, 1]


def test_merge_rejects_overlap_and_duration_mismatch():
    a = TagStream([0], [1], 10, {0: "x"})
    with pytest.raises(ValueError):
        merge_streams(a, TagStream([0], [2], 10, {0: "x"}))
    with pytest.raises(ValueError):
        merge_streams(a, TagStream([1], [2], 11, {1: "y"}))


@settings(max_examples=50, deadline=None)
@given(
    ta=st.lists(st.integers(0, 10**6), max_size=200),
    tb=st.lists(st.integers(0, 10**6), max_size=200),
)
def test_merge_preserves_counts(ta, tb):
    a = TagStream(np.zeros(len(ta)), sorted(ta), 10**6, {0: "x"})
    b = TagStream(np.ones(len(tb)), sorted(tb), 10**6, {1: "y"})
    m = merge_streams(a, b)
    assert len(m) == len(a) + len(b)
    _check_stream(m)
    assert sorted(m.channel_times(0).tolist()) == sorted(ta)


def test_tagstream_validation():
    with pytest.raises(ValueError):
        TagStream([0, 0], [5, 3], 10, {0: "x"})
    with pytest.raises(ValueError):
        TagStream([0], [11], 10, {0: "x"})
    with pytest.raises(ValueError):
        TagStream([2], [1], 10, {0: "x"})


def test_g2_channel_map():
    s = simulate_heralded_g2(ExperimentConfig().with_duration(0.01))
    assert s.channel_map == G2_CHANNELS
    _check_stream(s)


def test_chunks_cover_the_acquisition_and_are_reproducible():
    cfg = ExperimentConfig().with_power(0.02).with_duration(2.5)
    parts = list(iter_chunks(simulate_pairs, cfg, 1.0))
    assert [p.duration_s for p in parts] == [1.0, 1.0, 0.5]
    again = list(iter_chunks(simulate_pairs, cfg, 1.0))
    assert all(x == y for x, y in zip(parts, again))
    m = measure_pairs(cfg)
    assert m.signal_counts == sum(p.channel_times("signal").size for p in parts)


def test_coincidence_peak_sits_at_idler_delay():
    cfg = ExperimentConfig().with_power(power_for_brightness(ExperimentConfig(), 550e3)).with_duration(2)
    h = build_start_stop_histogram(simulate_pairs(cfg), "signal", "idler")
    assert abs(h.centers[np.argmax(h.counts)] - cfg.timing.idler_delay_ps) <= 160
