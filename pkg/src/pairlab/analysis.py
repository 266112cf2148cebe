"""Measurement procedures on time-tag streams and histograms.

Start-stop histograms, coincidence-peak fits, CAR with off-peak uncertainty,
herald-anchored double/triple coincidence counting, heralded g2(0) and
Klyshko efficiency, power-sweep fits and Franson visibility extraction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .fitting import FWHM_PER_SIGMA, FitResult, nlls_fit, poisson_sigma
from .model import ONE_SIGMA_FRACTION, PS_PER_S
from .sim import TagStream

BELL_THRESHOLD = 1.0 / math.sqrt(2.0)


class AnalysisError(RuntimeError):
    """An analysis step could not produce a meaningful result."""


class NoPeakError(AnalysisError):
    pass


class UndefinedG2Error(AnalysisError):
    pass


class FitFailure(AnalysisError):
    pass


# -- histograms ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Histogram:
    bin_width_ps: int
    origin_ps: int
    counts: np.ndarray
    acquisition_time_s: float

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("histogram needs at least one bin")
        if self.bin_width_ps <= 0:
            raise ValueError("bin width must be positive")
        if np.any(c < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", c.astype(np.int64))

    @property
    def edges(self) -> np.ndarray:
        return self.origin_ps + self.bin_width_ps * np.arange(self.counts.size + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.origin_ps + self.bin_width_ps * (np.arange(self.counts.size) + 0.5)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "Histogram") -> "Histogram":
        """Accumulate two acquisitions with identical binning."""
        if (self.bin_width_ps, self.origin_ps, self.counts.size) != (other.bin_width_ps, other.origin_ps, other.counts.size):
            raise ValueError("histograms have different binning")
        return Histogram(self.bin_width_ps, self.origin_ps, self.counts + other.counts,
                         self.acquisition_time_s + other.acquisition_time_s)

    def to_csv(self, path: str | Path) -> None:
        header = (
            f"# bin_width_ps = {self.bin_width_ps}\n"
            f"# origin_ps = {self.origin_ps}\n"
            f"# acquisition_s = {float(self.acquisition_time_s)!r}\n"
            "bin_start_ps,count\n"
        )
        body = "".join(f"{s},{c}\n" for s, c in zip(self.edges[:-1].tolist(), self.counts.tolist()))
        Path(path).write_text(header + body)

    @classmethod
    def from_csv(cls, path: str | Path) -> "Histogram":
        meta, starts, counts = {}, [], []
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                meta[key.strip()] = value.strip()
            elif line.startswith("bin_start_ps"):
                continue
            else:
                s, c = line.split(",")
                starts.append(int(s))
                counts.append(int(c))
        if not starts:
            raise ValueError(f"{path}: no histogram rows")
        starts = np.asarray(starts)
        width = int(meta.get("bin_width_ps", starts[1] - starts[0] if starts.size > 1 else 0))
        return cls(width, int(starts[0]), np.asarray(counts), float(meta.get("acquisition_s", "nan")))


def build_start_stop_histogram(
    stream: TagStream,
    start_ch: str | int,
    stop_ch: str | int,
    bin_width_ps: int = 160,
    span_ps: int = 100_000,
    hardware_bin_ps: int = 80,
) -> Histogram:
    """Histogram of ``t_stop - t_start`` for every start and every stop in ``[t, t + span)``.

    Delays are first binned at the hardware resolution, then groups of
    ``bin_width_ps // hardware_bin_ps`` adjacent hardware bins are summed.
    """
    if bin_width_ps % hardware_bin_ps:
        raise ValueError("bin width must be a multiple of the hardware bin")
    if span_ps % bin_width_ps:
        raise ValueError("span must be a multiple of the bin width")
    if len(stream) and np.any(np.diff(stream.times) < 0):
        raise ValueError("stream is not time-sorted")
    starts = stream.channel_times(start_ch)
    stops = stream.channel_times(stop_ch)
    lo = np.searchsorted(stops, starts, side="left")
    hi = np.searchsorted(stops, starts + span_ps, side="left")
    n = hi - lo
    total = int(n.sum())
    n_hw = span_ps // hardware_bin_ps
    if total:
        has = n > 0
        n, lo, s = n[has], lo[has], starts[has]
        offsets = np.arange(total) - np.repeat(np.cumsum(n) - n, n)
        delays = stops[np.repeat(lo, n) + offsets] - np.repeat(s, n)
        hw = np.bincount(delays // hardware_bin_ps, minlength=n_hw)
    else:
        hw = np.zeros(n_hw, np.int64)
    group = bin_width_ps // hardware_bin_ps
    counts = hw.reshape(-1, group).sum(axis=1)
    return Histogram(bin_width_ps, 0, counts, stream.duration_s)


# -- coincidence peak and CAR ---------------------------------------------------


def _off_peak(h: Histogram, center: float, half_width: float) -> np.ndarray:
    return h.counts[np.abs(h.centers - center) > half_width]


def fit_coincidence_peak(h: Histogram, exclusion_bins: int = 10) -> FitResult:
    """Gaussian-plus-floor fit of the histogram's coincidence peak.

    Raises :class:`NoPeakError` unless the tallest bin exceeds the off-peak
    mean by five off-peak standard deviations. The fit is repeated with
    weights from the first solution, which removes the downward bias that
    count-based weights give to low floors. Bin errors are Poisson, so the
    covariance is not rescaled by the reduced chi-square.
    """
    x = h.centers.astype(float)
    y = h.counts.astype(float)
    k = int(np.argmax(y))
    off = _off_peak(h, x[k], exclusion_bins * h.bin_width_ps)
    if off.size < 5 or y[k] <= 0 or y[k] <= off.mean() + 5.0 * off.std(ddof=1):
        raise NoPeakError("no coincidence peak above the accidental floor")

    best = None
    for floor0 in sorted({float(np.median(off)), float(y.min())}):
        near = np.abs(x - x[k]) <= 5 * h.bin_width_ps
        excess = np.clip(y[near] - floor0, 0.0, None)
        if excess.sum() > 0:
            m = np.average(x[near], weights=excess)
            s0 = math.sqrt(max(np.average((x[near] - m) ** 2, weights=excess), (h.bin_width_ps / 2) ** 2))
        else:
            s0 = h.bin_width_ps
        init = [y[k] - floor0, x[k], s0, floor0]
        fit = nlls_fit("gaussian", x, y, poisson_sigma(y), init, absolute_sigma=True)
        if not fit.converged:
            continue
        fit = nlls_fit("gaussian", x, y, poisson_sigma(fit.predict(x)), fit.values, absolute_sigma=True)
        if fit.converged and (best is None or fit.chi2 < best.chi2):
            best = fit
    if best is None:
        raise NoPeakError("coincidence peak fit did not converge")
    best.values[2] = abs(best.values[2])
    return best


def peak_fwhm_ps(fit: FitResult) -> float:
    return float(FWHM_PER_SIGMA * abs(fit["sigma"]))


def gaussian_area(fit: FitResult, bin_width_ps: float) -> tuple[float, float]:
    """Area (counts) of a fitted ``gaussian`` peak above the floor, with its 1-sigma error."""
    a, s = fit["amplitude"], abs(fit["sigma"])
    k = math.sqrt(2.0 * math.pi) / bin_width_ps
    area = k * a * s
    J = np.array([k * s, 0.0, k * a, 0.0])
    return area, float(math.sqrt(max(J @ fit.covariance @ J, 0.0)))


@dataclass
class CarResult:
    C: float
    A: float
    car: float
    sigma: float
    window: tuple[float, float]
    peak_fit: FitResult
    sigma_C: float = 0.0
    sigma_A: float = 0.0
    lower_bound: bool = False


def compute_car(h: Histogram, peak: FitResult | None = None, exclusion_sigmas: float = 10.0) -> CarResult:
    """CAR = C/A inside the window ``center +- sigma`` of the fitted peak.

    C integrates the fitted Gaussian above the floor over the window; A is the
    fitted floor times the window width. The uncertainty of A is the relative
    scatter (std/mean) of off-peak bins, propagated with the fit error of C.
    """
    if peak is None:
        peak = fit_coincidence_peak(h)
    c, s, floor = peak["center"], abs(peak["sigma"]), peak["floor"]
    area, area_err = gaussian_area(peak, h.bin_width_ps)
    C = ONE_SIGMA_FRACTION * area
    sigma_C = ONE_SIGMA_FRACTION * area_err
    width_bins = 2.0 * s / h.bin_width_ps
    off = _off_peak(h, c, max(exclusion_sigmas * s, 5 * h.bin_width_ps)).astype(float)
    A = floor * width_bins
    lower_bound = False
    if A <= 0:
        # not a single accidental in the window; quote CAR against one count
        A, lower_bound = 1.0, True
    rel_A = off.std(ddof=1) / off.mean() if off.size > 1 and off.mean() > 0 else 1.0
    sigma_A = rel_A * A
    car = C / A
    sigma = car * math.sqrt((sigma_C / C) ** 2 + rel_A**2) if C > 0 else math.inf
    return CarResult(C, A, car, sigma, (c - s, c + s), peak, sigma_C, sigma_A, lower_bound)


# -- heralded g2 -----------------------------------------------------------------


@dataclass(frozen=True)
class TripleCoincidenceCounts:
    """Counts (not rates) from herald-anchored coincidence logic; rates via ``rate()``."""

    n_a: int
    n_b: int
    n_c: int
    n_ab: int
    n_ac: int
    n_abc: int
    n_bc: int
    window_ps: float
    duration_s: float

    def __post_init__(self):
        if min(self.n_a, self.n_ab, self.n_ac, self.n_abc, self.n_bc) < 0:
            raise ValueError("counts must be non-negative")
        if self.n_ab > self.n_a or self.n_ac > self.n_a or self.n_abc > min(self.n_ab, self.n_ac):
            raise ValueError("inconsistent coincidence counts")

    def rate(self, name: str) -> float:
        return getattr(self, f"n_{name.lower()}") / self.duration_s

    def __add__(self, other: "TripleCoincidenceCounts") -> "TripleCoincidenceCounts":
        if self.window_ps != other.window_ps:
            raise ValueError("cannot add counts taken with different windows")
        keys = ("n_a", "n_b", "n_c", "n_ab", "n_ac", "n_abc", "n_bc")
        summed = {k: getattr(self, k) + getattr(other, k) for k in keys}
        return TripleCoincidenceCounts(**summed, window_ps=self.window_ps, duration_s=self.duration_s + other.duration_s)

    @property
    def N_A(self) -> float:
        return self.rate("a")

    @property
    def N_AB(self) -> float:
        return self.rate("ab")

    @property
    def N_AC(self) -> float:
        return self.rate("ac")

    @property
    def N_ABC(self) -> float:
        return self.rate("abc")

    @property
    def N_BC(self) -> float:
        return self.rate("bc")


def _has_partner(ref: np.ndarray, other: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """For each ``t`` in ref, whether ``other`` has an event in ``[t + lo, t + hi]``."""
    a = np.searchsorted(other, ref + lo, side="left")
    b = np.searchsorted(other, ref + hi, side="right")
    return b > a


def count_triples(
    stream: TagStream,
    window_ps: float = 5000.0,
    *,
    a: str | int = "herald_a",
    b: str | int = "heralded_b",
    c: str | int = "heralded_c",
    convention: str = "herald",
) -> TripleCoincidenceCounts:
    """Hardware-style double and triple coincidence counts.

    ``convention='herald'``: every A event opens a window of total width
    ``window_ps`` centred on itself; N_AB counts A events with at least one B
    inside, N_ABC those with both a B and a C inside. For uncorrelated
    channels this gives ``N_ABC ~ r_A r_B r_C w^2``.
    ``convention='symmetric'``: the window is ``+-window_ps`` (total width
    ``2 w``), so uncorrelated triples scale as ``4 r_A r_B r_C w^2``.
    N_BC always counts B events with a C within the same half-width.
    """
    if window_ps <= 0:
        raise ValueError("window must be positive")
    if convention == "herald":
        half = window_ps / 2.0
    elif convention == "symmetric":
        half = float(window_ps)
    else:
        raise ValueError("convention must be 'herald' or 'symmetric'")
    ids = []
    for role in (a, b, c):
        try:
            cid = stream.channel_id(role)
        except KeyError:
            raise ValueError(f"stream has no channel {role!r}") from None
        if cid not in stream.channel_map:
            raise ValueError(f"stream has no channel {role!r}")
        ids.append(cid)
    tA, tB, tC = (stream.times[stream.channels == i] for i in ids)
    ab = _has_partner(tA, tB, -half, half)
    ac = _has_partner(tA, tC, -half, half)
    bc = _has_partner(tB, tC, -half, half)
    return TripleCoincidenceCounts(
        n_a=int(tA.size),
        n_b=int(tB.size),
        n_c=int(tC.size),
        n_ab=int(ab.sum()),
        n_ac=int(ac.sum()),
        n_abc=int((ab & ac).sum()),
        n_bc=int(bc.sum()),
        window_ps=float(window_ps) if convention == "herald" else 2.0 * window_ps,
        duration_s=stream.duration_s,
    )


@dataclass
class G2Result:
    g2: float
    sigma: float
    heralding_rate: float
    klyshko: float
    klyshko_sigma: float
    klyshko_alt: float
    klyshko_alt_sigma: float


def heralded_g2(t: TripleCoincidenceCounts, detector_efficiency: float = 0.65) -> G2Result:
    """``g2 = N_ABC N_A / (N_AB N_AC)`` with Poisson errors, plus two Klyshko estimates.

    The primary Klyshko efficiency is ``N_AB / (N_A D)``. The alternative
    uses the triples among B-C coincidences: each such coincidence comes
    from two photons whose partners can each fire A, so
    ``N_ABC / N_BC - r_A w = 2 p`` with ``p`` the chance a B photon is
    heralded, and then ``klyshko_alt = N_B p / (N_A D)``.
    No truncation at zero is applied anywhere.
    """
    if t.n_ab == 0 or t.n_ac == 0:
        raise UndefinedG2Error("no double coincidences; g2 is undefined")
    scale = t.n_a / (t.n_ab * t.n_ac)
    g2 = t.n_abc * scale
    if t.n_abc > 0:
        sigma = g2 * math.sqrt(1 / t.n_abc + 1 / t.n_a + 1 / t.n_ab + 1 / t.n_ac)
    else:
        sigma = scale  # one-count scale when no triples were seen
    D = detector_efficiency
    p = t.n_ab / t.n_a
    klyshko = p / D
    klyshko_sigma = math.sqrt(p * (1 - p) / t.n_a) / D
    if t.n_bc > 0:
        acc = t.N_A * t.window_ps * 1e-12
        ratio = t.n_abc / t.n_bc
        p_alt = (ratio - acc) / 2.0
        klyshko_alt = t.n_b * p_alt / (t.n_a * D)
        rel = math.sqrt(1 / max(t.n_abc, 1) + 1 / t.n_bc) * ratio / max(ratio - acc, 1e-300)
        klyshko_alt_sigma = abs(klyshko_alt) * rel if t.n_abc else t.n_b / (2 * t.n_bc * t.n_a * D)
    else:
        klyshko_alt, klyshko_alt_sigma = math.nan, math.nan
    return G2Result(g2, sigma, t.N_A, klyshko, klyshko_sigma, klyshko_alt, klyshko_alt_sigma)


# -- power sweeps ---------------------------------------------------------------------


def fit_power_sweep(points: Sequence[tuple[float, float, float]], model: str = "quadratic") -> FitResult:
    """Weighted fit of ``y = R P^2`` (``quadratic``) or ``y = aP^2/(1+aP^2)`` (``sigmoid``)."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] < 3:
        raise ValueError("need at least three (P, y, sigma_y) points")
    P, y, s = arr.T
    if np.any(s <= 0):
        raise ValueError("sigma_y must be positive")
    if np.ptp(P) == 0:
        raise ValueError("degenerate sweep: all powers are equal")
    w = 1.0 / s**2
    if model == "quadratic":
        init = [float(np.sum(w * y * P**2) / np.sum(w * P**4))]
    elif model == "sigmoid":
        ok = (y > 0) & (y < 1) & (P > 0)
        init = [float(np.median(y[ok] / (1 - y[ok]) / P[ok] ** 2))] if ok.any() else [1.0]
    else:
        raise ValueError("model must be 'quadratic' or 'sigmoid'")
    return nlls_fit(model, P, y, s, init)


def log_log_slope(power, rate, rate_sigma) -> FitResult:
    """Power-law exponent of ``rate = k P^n`` by weighted nonlinear fit."""
    P = np.asarray(power, float)
    r = np.asarray(rate, float)
    s = np.asarray(rate_sigma, float)
    n0, lk0 = np.polyfit(np.log(P), np.log(r), 1)
    return nlls_fit("power_law", P, r, s, [math.exp(lk0), n0])


# -- Franson visibility -------------------------------------------------------------------


@dataclass
class PeakAreas:
    left: float
    center: float
    right: float
    left_sigma: float
    center_sigma: float
    right_sigma: float
    fit: FitResult


def fit_three_peaks(h: Histogram, delay_ps: float, sigma_ps: float | None = None) -> PeakAreas:
    """Three Gaussians of common width at ``c - delay``, ``c``, ``c + delay`` plus a floor."""
    x = h.centers.astype(float)
    y = h.counts.astype(float)
    bw = h.bin_width_ps
    center0 = float(x[np.argmin(np.abs(x))]) if x[0] <= 0 <= x[-1] else float(x[np.argmax(y)])
    far = np.abs(x - center0) > delay_ps + 6 * (sigma_ps or 150.0)
    floor0 = float(np.mean(y[far])) if far.any() else float(y.min())
    s0 = sigma_ps or 0.4 * delay_ps

    def area_near(mu):
        near = np.abs(x - mu) <= max(s0, bw)
        return max(float(np.sum(y[near] - floor0)) / (near.sum() or 1) * s0 * math.sqrt(2 * math.pi), 1.0)

    init = [area_near(center0 - delay_ps), area_near(center0), area_near(center0 + delay_ps),
            center0, float(delay_ps), s0, max(floor0, 1e-3)]
    init = [v * (bw if i < 3 else 1.0) for i, v in enumerate(init)]
    fit = nlls_fit("triple_gaussian", x, y, poisson_sigma(y), init, absolute_sigma=True)
    if fit.converged:
        fit = nlls_fit("triple_gaussian", x, y, poisson_sigma(fit.predict(x)), fit.values, absolute_sigma=True)
    if not fit.converged:
        raise FitFailure(f"triple-Gaussian fit did not converge: {fit.message}")
    errs = fit.std_errs
    return PeakAreas(
        fit["area_left"] / bw,
        fit["area_center"] / bw,
        fit["area_right"] / bw,
        errs["area_left"] / bw,
        errs["area_center"] / bw,
        errs["area_right"] / bw,
        fit,
    )


@dataclass
class VisibilityResult:
    v_data: float
    v_data_sigma: float
    v_fit: float
    v_fit_sigma: float
    phase_period: float
    phase_period_sigma: float
    phase_offset: float
    phases: np.ndarray
    central_areas: np.ndarray
    central_sigmas: np.ndarray
    side_areas: np.ndarray
    side_sigmas: np.ndarray
    sinusoid_fit: FitResult | None = None
    excluded: list[int] = field(default_factory=list)


def _dft_init(x, y, period):
    k = 2 * np.pi / period
    z = np.sum((y - y.mean()) * np.exp(-1j * k * x)) * 2 / x.size
    A = float(y.mean())
    return [A, float(abs(z)) / A if A else 0.0, float(period), float(np.angle(z))]


def fit_fringe(x, y, sigma, expected_period: float) -> FitResult:
    """Sinusoid fit ``A (1 + V cos(2 pi x / T + phi))``; best of a few period guesses."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    best = None
    for period in (expected_period, expected_period / 2, expected_period * 2):
        fit = nlls_fit("sinusoid", x, y, sigma, _dft_init(x, y, period), absolute_sigma=True)
        if fit.converged and (best is None or fit.chi2 < best.chi2):
            best = fit
    if best is None:
        raise FitFailure("fringe fit did not converge")
    if best["visibility"] < 0:
        best.values[1] *= -1
        best.values[3] += math.pi
    if best["period"] < 0:
        best.values[2] *= -1
        best.values[3] *= -1
    best.values[3] = math.remainder(best.values[3], 2 * math.pi)
    return best


def franson_visibility(
    hists: Sequence[tuple[float, Histogram]],
    delay_ps: float = 400.0,
    *,
    expected_period: float = 2 * math.pi,
    sigma_ps: float | None = None,
    max_excluded_fraction: float = 0.3,
) -> VisibilityResult:
    """Fringe visibility of the central Franson peak over a phase sweep.

    ``v_data`` is ``(max - min)/(max + min)`` of the fitted central areas;
    ``v_fit`` is the visibility of a sinusoid fitted to them. Points whose
    three-peak fit fails are dropped with a warning; dropping more than
    ``max_excluded_fraction`` of the sweep raises :class:`FitFailure`.
    """
    if len(hists) < 5:
        raise ValueError("need at least five phase points")
    phases, areas, excluded = [], [], []
    for i, (phi, h) in enumerate(hists):
        try:
            areas.append(fit_three_peaks(h, delay_ps, sigma_ps))
            phases.append(float(phi))
        except FitFailure as exc:
            warnings.warn(f"phase point {i} excluded: {exc}")
            excluded.append(i)
    if len(excluded) > max_excluded_fraction * len(hists):
        raise FitFailure(f"{len(excluded)} of {len(hists)} phase points failed to fit")
    x = np.asarray(phases)
    c = np.array([a.center for a in areas])
    cs = np.array([a.center_sigma for a in areas])
    side = np.array([[a.left, a.right] for a in areas])
    side_s = np.array([[a.left_sigma, a.right_sigma] for a in areas])

    i_max, i_min = int(np.argmax(c)), int(np.argmin(c))
    hi, lo = c[i_max], c[i_min]
    v_data = (hi - lo) / (hi + lo)
    d_hi = 2 * lo / (hi + lo) ** 2
    d_lo = -2 * hi / (hi + lo) ** 2
    v_data_sigma = math.hypot(d_hi * cs[i_max], d_lo * cs[i_min])

    fit = fit_fringe(x, c, np.maximum(cs, 1.0), expected_period)
    return VisibilityResult(
        v_data=float(v_data),
        v_data_sigma=float(v_data_sigma),
        v_fit=fit["visibility"],
        v_fit_sigma=fit.err("visibility"),
        phase_period=fit["period"],
        phase_period_sigma=fit.err("period"),
        phase_offset=fit["phase"],
        phases=x,
        central_areas=c,
        central_sigmas=cs,
        side_areas=side,
        side_sigmas=side_s,
        sinusoid_fit=fit,
        excluded=excluded,
    )


@dataclass(frozen=True)
class BellVerdict:
    passed: bool
    value: float
    sigma: float
    margin_sigma: float
    threshold: float = BELL_THRESHOLD


def bell_threshold(v: VisibilityResult, use: str = "data") -> BellVerdict:
    """Entanglement witness: pass when ``V - sigma > 1/sqrt(2)``."""
    value, sigma = (v.v_data, v.v_data_sigma) if use == "data" else (v.v_fit, v.v_fit_sigma)
    margin = (value - BELL_THRESHOLD) / sigma if sigma > 0 else math.copysign(math.inf, value - BELL_THRESHOLD)
    if sigma == 0 and value == BELL_THRESHOLD:
        margin = 0.0
    return BellVerdict(bool(value - sigma > BELL_THRESHOLD), value, sigma, margin)


@dataclass(frozen=True)
class Modulation:
    depth: float
    sigma: float
    mean: float

    @property
    def consistent_with_zero(self) -> bool:
        return self.depth < 3.0 * self.sigma


def singles_modulation(phases, counts, period: float) -> Modulation:
    """Depth of a ``cos`` component of the given period in singles counts (linear LSQ, Poisson weights)."""
    x = np.asarray(phases, float)
    y = np.asarray(counts, float)
    s = poisson_sigma(y)
    k = 2 * np.pi / period
    X = np.column_stack([np.ones_like(x), np.cos(k * x), np.sin(k * x)]) / s[:, None]
    coef, *_ = np.linalg.lstsq(X, y / s, rcond=None)
    cov = np.linalg.inv(X.T @ X)
    A, b, c = coef
    depth = math.hypot(b, c) / A
    sigma = math.sqrt(0.5 * (cov[1, 1] + cov[2, 2])) / A
    return Modulation(depth, sigma, A)


def rate_from_counts(counts: int, duration_s: float) -> tuple[float, float]:
    return counts / duration_s, math.sqrt(max(counts, 1)) / duration_s


__all__ = [
    "AnalysisError",
    "BellVerdict",
    "CarResult",
    "FitFailure",
    "G2Result",
    "Histogram",
    "Modulation",
    "NoPeakError",
    "PeakAreas",
    "TripleCoincidenceCounts",
    "UndefinedG2Error",
    "VisibilityResult",
    "bell_threshold",
    "build_start_stop_histogram",
    "compute_car",
    "count_triples",
    "fit_coincidence_peak",
    "fit_fringe",
    "fit_power_sweep",
    "fit_three_peaks",
    "franson_visibility",
    "gaussian_area",
    "heralded_g2",
    "log_log_slope",
    "peak_fwhm_ps",
    "rate_from_counts",
    "singles_modulation",
    "PS_PER_S",
]
