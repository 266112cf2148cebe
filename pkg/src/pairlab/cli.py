"""Command-line front end.

    pairlab simulate pairs|g2|franson ...
    pairlab analyze histogram|car|g2|franson|sweep ...
    pairlab report MANIFEST [MANIFEST ...]

Physical flags take explicit units (``--power 10.6uW``, ``--duration 30s``,
``--window 5ns``, ``--herald-rate 18kHz``, ``--idler-phase 90deg``); a bare
number is rejected. The config file comes from ``--config`` or
``$PAIRLAB_CONFIG``; ``--print-config`` prints the resolved config with all
overrides applied and exits.

Exit codes: 0 success, 2 bad usage / config / input format, 3 I/O error,
4 analysis failure (no peak, undefined g2, fit did not converge).
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import math
import os
import re
import shlex
import sys
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    AnalysisError,
    Histogram,
    bell_threshold,
    build_start_stop_histogram,
    compute_car,
    count_triples,
    fit_coincidence_peak,
    franson_visibility,
    heralded_g2,
    peak_fwhm_ps,
    singles_modulation,
)
from .config import ConfigError, dump_config, load_config
from .experiments import fit_g2_sigmoid, fit_pgr, run_sweep, write_sweep_csv
from .franson import DliParams, FransonConfig, expected_period, read_sweep, simulate_franson
from .model import power_for_herald_rate
from .sim import EventBudgetError, simulate_heralded_g2, simulate_pairs
from .tagfile import MAGIC, TagFileError, read_tags, write_tags

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_ANALYSIS = 0, 2, 3, 4
MANIFEST_SUFFIX = ".manifest"


class FormatError(ValueError):
    """Input file is not of the expected kind."""


# -- unit-suffixed quantities --------------------------------------------------

_UNITS = {
    "power": ({"W": 1e3, "mW": 1.0, "uW": 1e-3, "µW": 1e-3, "nW": 1e-6}, "mW"),
    "time": ({"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9, "ps": 1e-12}, "s"),
    "frequency": ({"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9}, "Hz"),
    "angle": ({"rad": 1.0, "deg": math.pi / 180.0, "pi": math.pi}, "rad"),
}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-zµ]+)\s*$")


def parse_quantity(text: str, kind: str) -> float:
    """``'10.6uW'`` -> 0.0106 (mW); returns the value in the kind's base unit."""
    table, base = _UNITS[kind]
    m = _QUANTITY.match(text)
    if not m:
        raise argparse.ArgumentTypeError(
            f"{text!r}: expected a number with a {kind} unit ({', '.join(table)})"
        )
    value, unit = float(m.group(1)), m.group(2)
    if unit not in table:
        raise argparse.ArgumentTypeError(f"{text!r}: unknown {kind} unit {unit!r}; use one of {', '.join(table)}")
    return value * table[unit]


def _qty(kind):
    def convert(text):
        return parse_quantity(text, kind)

    convert.__name__ = kind
    return convert


def _ps(text: str) -> int:
    return int(round(parse_quantity(text, "time") * 1e12))


_ps.__name__ = "time"


def _power_list(text: str) -> list[float]:
    return [parse_quantity(p, "power") for p in text.split(",") if p.strip()]


_power_list.__name__ = "power list"


def _positive_int(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


def _seed(text: str) -> int:
    n = int(text)
    if not 0 <= n < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return n


# -- files --------------------------------------------------------------------------


def sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _atomic(path: Path, write) -> Path:
    """Call ``write(tmp)`` then rename over ``path``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    try:
        write(tmp)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()
    return path


def write_manifest(path: Path, *, kind: str, argv, cfg, outputs, started, run=None, metrics=None, inputs=None) -> Path:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["run"] = {
        "kind": kind,
        "command": shlex.join(["pairlab", *argv]),
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "code_version": f"pairlab {__version__}",
        **{k: str(v) for k, v in (run or {}).items()},
    }
    base = path.parent
    cp["outputs"] = {os.path.relpath(p, base): sha256(p) for p in outputs}
    if inputs:
        cp["inputs"] = {os.path.relpath(p, base): sha256(p) for p in inputs}
    if metrics:
        cp["metrics"] = {name: f"{float(value)!r} {float(sigma)!r} {units}" for name, value, sigma, units in metrics}
    snap = configparser.ConfigParser(interpolation=None)
    snap.optionxform = str
    snap.read_string(dump_config(cfg))
    for section in snap.sections():
        cp[f"config.{section}"] = dict(snap[section])

    def write(tmp):
        with open(tmp, "w") as f:
            cp.write(f)

    return _atomic(path, write)


def read_manifest(path: str | Path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path) as f:
            cp.read_file(f)
    except configparser.Error as exc:
        raise FormatError(f"{path}: not a run manifest ({exc})") from None
    if not cp.has_section("run"):
        raise FormatError(f"{path}: not a run manifest")
    return cp


def _input_run_info(path: Path) -> dict[str, str]:
    """``[run]`` of the manifest next to an input file, if any."""
    m = Path(str(path) + MANIFEST_SUFFIX)
    if not m.exists():
        return {}
    try:
        cp = read_manifest(m)
    except FormatError:
        return {}
    return {k: cp["run"][k] for k in ("pump_power_mw", "duration_s", "seed") if k in cp["run"]}


def load_tags(path: Path, channels: int | None = None):
    with open(path, "rb") as f:
        head = f.read(len(MAGIC))
    if head != MAGIC:
        raise FormatError(f"{path}: not a time-tag file")
    stream, header = read_tags(path)
    if channels is not None and header.channel_count != channels:
        raise FormatError(f"{path}: expected a {channels}-channel tag file, found {header.channel_count}")
    return stream


def _histogram(stream, start, stop, bin_ps, span_ps, hardware_bin_ps) -> Histogram:
    try:
        return build_start_stop_histogram(stream, start, stop, bin_ps, span_ps, hardware_bin_ps)
    except KeyError as exc:
        raise FormatError(f"no channel {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_histogram_input(path: Path, bin_ps: int, span_ps: int, hardware_bin_ps: int) -> Histogram:
    """Histogram CSV as is, or a two-channel tag file histogrammed start=signal, stop=idler."""
    with open(path, "rb") as f:
        head = f.read(len(MAGIC))
    if head == MAGIC:
        stream = load_tags(path, 2)
        return _histogram(stream, 0, 1, bin_ps, span_ps, hardware_bin_ps)
    try:
        return Histogram.from_csv(path)
    except (ValueError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: neither a tag file nor a histogram CSV ({exc})") from None


# -- output helpers ------------------------------------------------------------------


def metric_lines(metrics) -> str:
    return "".join(f"{name} {value:.10g} {sigma:.4g} {units}\n" for name, value, sigma, units in metrics)


def _emit(args, metrics, extra_lines: str = "") -> list[Path]:
    text = metric_lines(metrics) + extra_lines
    sys.stdout.write(text)
    if args.out is None:
        return []
    out = Path(args.out)
    return [_atomic(out, lambda tmp: tmp.write_text(text))]


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


NAN = float("nan")

# -- commands ------------------------------------------------------------------------


def cmd_simulate_tags(args, cfg) -> int:
    started = _now()
    sim = simulate_pairs if args.experiment == "pairs" else simulate_heralded_g2
    stream = sim(cfg)
    out = Path(args.out)
    _atomic(out, lambda tmp: write_tags(tmp, stream, seed=cfg.rng_seed))
    rates = {f"rate_{role}_hz": repr(stream.count_rate(ch)) for ch, role in stream.channel_map.items()}
    write_manifest(
        Path(str(out) + MANIFEST_SUFFIX),
        kind=f"simulate-{args.experiment}",
        argv=args.argv,
        cfg=cfg,
        outputs=[out],
        started=started,
        run={
            "pump_power_mw": repr(cfg.source.pump_power_mw),
            "duration_s": repr(cfg.acquisition_time_s),
            "seed": cfg.rng_seed,
            "events": len(stream),
            **rates,
        },
    )
    print(f"wrote {len(stream)} events to {out}")
    return EXIT_OK


def _franson_config(args, cfg) -> FransonConfig:
    return FransonConfig(
        base=cfg,
        dli_signal=DliParams(fsr_ghz=args.fsr / 1e9, extinction_db=args.extinction_db),
        dli_idler=DliParams(fsr_ghz=args.fsr / 1e9, extinction_db=args.extinction_db, phase=args.idler_phase),
        folded=args.folded,
        v_true=args.v_true,
        pair_rate_hz=args.pair_rate,
        point_duration_s=args.point_duration,
    )


def cmd_simulate_franson(args, cfg) -> int:
    started = _now()
    fc = _franson_config(args, cfg)
    span = args.span if args.span is not None else 2.0 * expected_period(fc.folded)
    grid = np.arange(args.phases) * span / args.phases
    sweep = simulate_franson(fc, grid)
    out = Path(args.out)
    paths = sweep.write(out)
    write_manifest(
        out / f"run{MANIFEST_SUFFIX}",
        kind="simulate-franson",
        argv=args.argv,
        cfg=cfg,
        outputs=paths,
        started=started,
        run={
            "folded": fc.folded,
            "phases": args.phases,
            "pair_rate_hz": repr(fc.pair_rate_hz),
            "pump_power_mw": repr(fc.experiment.source.pump_power_mw),
            "point_duration_s": repr(fc.point_duration_s),
            "v_true": repr(fc.v_true),
            "seed": cfg.rng_seed,
        },
    )
    print(f"wrote {len(sweep.histograms)} histograms and manifest.csv to {out}")
    return EXIT_OK


def cmd_analyze_histogram(args, cfg) -> int:
    started = _now()
    path = Path(args.input)
    stream = load_tags(path)
    start = args.start if args.start is not None else 0
    stop = args.stop if args.stop is not None else 1
    start, stop = (int(x) if str(x).isdigit() else x for x in (start, stop))
    h = _histogram(stream, start, stop, args.bin, args.span, cfg.timing.hardware_bin_ps)
    out = Path(args.out)
    _atomic(out, h.to_csv)
    write_manifest(
        Path(str(out) + MANIFEST_SUFFIX), kind="analyze-histogram", argv=args.argv, cfg=cfg,
        outputs=[out], inputs=[path], started=started, run=_input_run_info(path),
    )
    print(f"histogram_total {h.total} nan counts")
    return EXIT_OK


def cmd_analyze_car(args, cfg) -> int:
    started = _now()
    path = Path(args.input)
    h = load_histogram_input(path, args.bin, args.span, cfg.timing.hardware_bin_ps)
    peak = fit_coincidence_peak(h)
    car = compute_car(h, peak)
    metrics = [
        ("car", car.car, car.sigma, "ratio"),
        ("coincidences", car.C, car.sigma_C, "counts"),
        ("accidentals", car.A, car.sigma_A, "counts"),
        ("peak_center", peak["center"], peak.err("center"), "ps"),
        ("peak_fwhm", peak_fwhm_ps(peak), 2.3548200450309493 * peak.err("sigma"), "ps"),
        ("window_lo", car.window[0], NAN, "ps"),
        ("window_hi", car.window[1], NAN, "ps"),
        ("car_lower_bound", float(car.lower_bound), NAN, "flag"),
    ]
    outs = _emit(args, metrics)
    if outs:
        write_manifest(
            Path(str(args.out) + MANIFEST_SUFFIX), kind="analyze-car", argv=args.argv, cfg=cfg,
            outputs=outs, inputs=[path], started=started, metrics=metrics, run=_input_run_info(path),
        )
    return EXIT_OK


def cmd_analyze_g2(args, cfg) -> int:
    started = _now()
    path = Path(args.input)
    stream = load_tags(path, 3)
    t = count_triples(stream, args.window, convention=args.convention)
    d = args.detector_efficiency if args.detector_efficiency is not None else cfg.herald_split_b_loss.detector_efficiency
    g = heralded_g2(t, d)
    metrics = [
        ("g2", g.g2, g.sigma, "1"),
        ("herald_rate", g.heralding_rate, math.sqrt(t.n_a) / t.duration_s, "Hz"),
        ("klyshko", g.klyshko, g.klyshko_sigma, "1"),
        ("klyshko_alt", g.klyshko_alt, g.klyshko_alt_sigma, "1"),
    ] + [(f"N_{k}", t.rate(k), math.sqrt(getattr(t, f"n_{k.lower()}")) / t.duration_s, "Hz")
         for k in ("A", "B", "C", "AB", "AC", "ABC", "BC")]
    outs = _emit(args, metrics)
    if outs:
        write_manifest(
            Path(str(args.out) + MANIFEST_SUFFIX), kind="analyze-g2", argv=args.argv, cfg=cfg,
            outputs=outs, inputs=[path], started=started, metrics=metrics, run=_input_run_info(path),
        )
    return EXIT_OK


def cmd_analyze_franson(args, cfg) -> int:
    started = _now()
    path = Path(args.input)
    if path.is_dir():
        path = path / "manifest.csv"
    try:
        sweep = read_sweep(path)
    except (ValueError, UnicodeDecodeError) as exc:
        raise FormatError(str(exc)) from None
    folded = sweep.folded if args.folded is None else args.folded
    delay = args.delay if args.delay is not None else sweep.delay_ps
    if not math.isfinite(delay):
        delay = 400.0
    period = args.period if args.period is not None else expected_period(folded)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        v = franson_visibility(sweep.pairs(), delay, expected_period=period)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    verdict = bell_threshold(v, "data")
    mod_s = singles_modulation(sweep.phases, sweep.singles_signal, period)
    mod_i = singles_modulation(sweep.phases, sweep.singles_idler, period)
    metrics = [
        ("v_data", v.v_data, v.v_data_sigma, "1"),
        ("v_fit", v.v_fit, v.v_fit_sigma, "1"),
        ("phase_period", v.phase_period, v.phase_period_sigma, "rad"),
        ("phase_offset", v.phase_offset, v.sinusoid_fit.err("phase"), "rad"),
        ("singles_modulation_signal", mod_s.depth, mod_s.sigma, "1"),
        ("singles_modulation_idler", mod_i.depth, mod_i.sigma, "1"),
        ("excluded_points", float(len(v.excluded)), NAN, "count"),
    ]
    line = (
        f"verdict entanglement_witness {'PASS' if verdict.passed else 'FAIL'} "
        f"v_data={verdict.value:.4f}+-{verdict.sigma:.4f} threshold={verdict.threshold:.4f} "
        f"margin={verdict.margin_sigma:.1f}sigma\n"
    )
    outs = _emit(args, metrics, line)
    if outs:
        fringe = Path(str(args.out) + ".fringe.csv")

        def write(tmp):
            rows = ["phase_rad,voltage_v,central,central_sigma,left,right,singles_signal,singles_idler"]
            kept = [i for i in range(len(sweep.histograms)) if i not in v.excluded]
            for j, i in enumerate(kept):
                vals = (sweep.phases[i], sweep.voltages[i], v.central_areas[j], v.central_sigmas[j],
                        v.side_areas[j, 0], v.side_areas[j, 1])
                rows.append(",".join(repr(float(x)) for x in vals)
                            + f",{int(sweep.singles_signal[i])},{int(sweep.singles_idler[i])}")
            tmp.write_text("\n".join(rows) + "\n")

        outs.append(_atomic(fringe, write))
        write_manifest(
            Path(str(args.out) + MANIFEST_SUFFIX), kind="analyze-franson", argv=args.argv, cfg=cfg,
            outputs=outs, inputs=[path], started=started, metrics=metrics,
            run={"folded": folded, "bell_pass": verdict.passed, "fringe_csv": fringe.name},
        )
    return EXIT_OK if verdict.passed or not args.require_pass else EXIT_ANALYSIS


def cmd_analyze_sweep(args, cfg) -> int:
    started = _now()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_sweep(args.kind, cfg, args.powers, jobs=args.jobs, window_ps=args.window, out_dir=out)
    table = out / "sweep.csv"
    _atomic(table, lambda tmp: write_sweep_csv(tmp, rows))
    if args.kind == "pairs":
        R, sR, fit = fit_pgr(rows, cfg)
        metrics = [("pgr_coefficient", R, sR, "MHz/mW^2"), ("fit_reduced_chi2", fit.reduced_chi2, NAN, "1")]
    else:
        fit = fit_g2_sigmoid(rows)
        metrics = [("g2_sigmoid_a", fit["a"], fit.err("a"), "mW^-2"), ("fit_reduced_chi2", fit.reduced_chi2, NAN, "1")]
    if not fit.converged:
        raise AnalysisError(f"sweep fit did not converge: {fit.message}")
    points = sorted(out.glob("point_*.csv"))
    text = metric_lines(metrics)
    sys.stdout.write(text)
    summary = _atomic(out / "metrics.txt", lambda tmp: tmp.write_text(text))
    write_manifest(
        out / f"run{MANIFEST_SUFFIX}", kind=f"sweep-{args.kind}", argv=args.argv, cfg=cfg,
        outputs=[table, summary, *points], started=started, metrics=metrics,
        run={"duration_s": repr(cfg.acquisition_time_s), "seed": cfg.rng_seed, "sweep_csv": table.name},
    )
    return EXIT_OK


# -- report ----------------------------------------------------------------------------


def _metric(cp, name):
    if not cp.has_option("metrics", name):
        return NAN, NAN
    value, sigma, *_ = cp["metrics"][name].split()
    return float(value), float(sigma)


def _csv_block(path: Path) -> list[str]:
    return [l for l in path.read_text().splitlines() if l and not l.startswith("#")]


def cmd_report(args, cfg) -> int:
    problems: list[str] = []
    sections: dict[str, list[str]] = {}

    def add(title, header, rows):
        block = sections.setdefault(title, [header])
        block.extend(rows)

    for m in args.manifests:
        mp = Path(m)
        if not mp.exists():
            problems.append(f"missing manifest {mp}")
            continue
        cp = read_manifest(mp)
        for rel, digest in (cp["outputs"].items() if cp.has_section("outputs") else []):
            p = mp.parent / rel
            if not p.exists():
                problems.append(f"{mp}: missing output {rel}")
            elif sha256(p) != digest:
                problems.append(f"{mp}: checksum mismatch for {rel}")
        run = cp["run"]
        kind = run.get("kind", "?")
        power = run.get("pump_power_mw", "nan")
        dur = run.get("duration_s", "nan")
        if kind in ("simulate-pairs", "simulate-g2"):
            rates = {k[5:-3]: v for k, v in run.items() if k.startswith("rate_")}
            add("Simulated singles (Fig. 2 style)", "kind,power_mw,duration_s,channel,rate_hz",
                [f"{kind},{power},{dur},{ch},{r}" for ch, r in rates.items()])
        elif kind == "analyze-car":
            car, s = _metric(cp, "car")
            fw, fs = _metric(cp, "peak_fwhm")
            add("CAR versus pump power", "power_mw,duration_s,car,car_sigma,fwhm_ps,fwhm_sigma_ps",
                [f"{power},{dur},{car!r},{s!r},{fw!r},{fs!r}"])
        elif kind == "analyze-g2":
            g, s = _metric(cp, "g2")
            na, _ = _metric(cp, "herald_rate")
            k, ks = _metric(cp, "klyshko")
            add("Heralded g2 versus pump power", "power_mw,herald_rate_hz,g2,g2_sigma,klyshko,klyshko_sigma",
                [f"{power},{na!r},{g!r},{s!r},{k!r},{ks!r}"])
        elif kind == "analyze-franson":
            vd, vds = _metric(cp, "v_data")
            vf, vfs = _metric(cp, "v_fit")
            per, pers = _metric(cp, "phase_period")
            add("Franson visibility", "manifest,folded,v_data,v_data_sigma,v_fit,v_fit_sigma,period_rad,period_sigma,bell_pass",
                [f"{mp.name},{run.get('folded')},{vd!r},{vds!r},{vf!r},{vfs!r},{per!r},{pers!r},{run.get('bell_pass')}"])
            fringe = mp.parent / run.get("fringe_csv", "")
            if run.get("fringe_csv") and fringe.exists():
                lines = _csv_block(fringe)
                add(f"Fringe data ({mp.name})", lines[0], lines[1:])
        elif kind.startswith("sweep-"):
            table = mp.parent / run.get("sweep_csv", "sweep.csv")
            if table.exists():
                lines = _csv_block(table)
                add(f"Power sweep ({kind[6:]})", lines[0], lines[1:])
            for name in cp["metrics"] if cp.has_section("metrics") else []:
                v, s = _metric(cp, name)
                add("Sweep fits", "manifest,parameter,value,sigma", [f"{mp.name},{name},{v!r},{s!r}"])
        else:
            add("Other runs", "manifest,kind", [f"{mp.name},{kind}"])

    text = f"# pairlab report ({len(args.manifests)} manifests)\n"
    for title, lines in sections.items():
        text += f"\n# {title}\n" + "\n".join(lines) + "\n"
    if problems:
        text += "\n# problems\n" + "\n".join(f"# {p}" for p in problems) + "\n"
        for p in problems:
            print(f"warning: {p}", file=sys.stderr)
    if args.out:
        _atomic(Path(args.out), lambda tmp: tmp.write_text(text))
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- parser -----------------------------------------------------------------------------


def _common(suppress: bool) -> argparse.ArgumentParser:
    d = argparse.SUPPRESS if suppress else None
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=d, help="config file (default: $PAIRLAB_CONFIG, then built-in values)")
    p.add_argument("--seed", type=_seed, default=d, help="RNG seed (default from config)")
    p.add_argument("--print-config", action="store_true", default=argparse.SUPPRESS if suppress else False,
                   help="print the resolved config and exit")
    return p


def _run_flags(p, *, power=True):
    if power:
        p.add_argument("--power", type=_qty("power"), help="pump power, e.g. 10.6uW or 0.1mW")
    p.add_argument("--duration", type=_qty("time"), help="acquisition time, e.g. 30s")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="pairlab", description=__doc__.split("\n\n")[0], parents=[_common(False)],
                                  formatter_class=argparse.RawDescriptionHelpFormatter)
    top.add_argument("--version", action="version", version=f"pairlab {__version__}")
    common = _common(True)
    cmds = top.add_subparsers(dest="command", metavar="{simulate,analyze,report}")

    sim = cmds.add_parser("simulate", help="generate time tags or Franson histograms")
    sims = sim.add_subparsers(dest="experiment", metavar="{pairs,g2,franson}", required=True)
    for name, helptext in (("pairs", "two-channel signal/idler tags"), ("g2", "three-channel heralded tags")):
        p = sims.add_parser(name, parents=[common], help=helptext)
        _run_flags(p)
        if name == "g2":
            p.add_argument("--herald-rate", type=_qty("frequency"), help="set pump power from a herald rate, e.g. 18kHz")
        p.add_argument("-o", "--out", required=True, help="output tag file")
        p.set_defaults(func=cmd_simulate_tags)
    p = sims.add_parser("franson", parents=[common], help="phase sweep of three-peak histograms")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--folded", dest="folded", action="store_true", default=True)
    g.add_argument("--unfolded", dest="folded", action="store_false")
    p.add_argument("--phases", type=_positive_int, default=24, help="number of phase points (default 24)")
    p.add_argument("--span", type=_qty("angle"), help="swept phase range (default: two fringes)")
    p.add_argument("--idler-phase", type=_qty("angle"), default=0.0, help="fixed idler DLI phase (unfolded)")
    p.add_argument("--point-duration", type=_qty("time"), default=5.0, help="acquisition per point (default 5s)")
    p.add_argument("--pair-rate", type=_qty("frequency"), default=68e3, help="on-chip pair rate (default 68kHz)")
    p.add_argument("--fsr", type=_qty("frequency"), default=2.5e9, help="DLI free spectral range (default 2.5GHz)")
    p.add_argument("--extinction-db", type=float, default=25.0, help="DLI extinction ratio in dB (default 25)")
    p.add_argument("--v-true", type=float, default=0.99, help="two-photon visibility of the source (default 0.99)")
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate_franson)

    an = cmds.add_parser("analyze", help="analyze tag files, histograms or sweeps")
    ans = an.add_subparsers(dest="analysis", metavar="{histogram,car,g2,franson,sweep}", required=True)
    p = ans.add_parser("histogram", parents=[common], help="start-stop histogram CSV from a tag file")
    p.add_argument("input")
    p.add_argument("--start", help="start channel id or role (default 0)")
    p.add_argument("--stop", help="stop channel id or role (default 1)")
    p.add_argument("--bin", type=_ps, default=160, help="bin width (default 160ps)")
    p.add_argument("--span", type=_ps, default=100_000, help="delay span (default 100ns)")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_analyze_histogram)

    p = ans.add_parser("car", parents=[common], help="CAR from a tag file or histogram CSV")
    p.add_argument("input")
    p.add_argument("--bin", type=_ps, default=160)
    p.add_argument("--span", type=_ps, default=100_000)
    p.add_argument("-o", "--out", help="also write metric lines (and a manifest) here")
    p.set_defaults(func=cmd_analyze_car)

    p = ans.add_parser("g2", parents=[common], help="heralded g2 and Klyshko efficiency from a 3-channel tag file")
    p.add_argument("input")
    p.add_argument("--window", type=_ps, default=5000, help="coincidence window (default 5ns)")
    p.add_argument("--convention", choices=("herald", "symmetric"), default="herald")
    p.add_argument("--detector-efficiency", type=float, help="heralded-arm detector efficiency (default from config)")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_analyze_g2)

    p = ans.add_parser("franson", parents=[common], help="visibility and threshold verdict from a Franson sweep")
    p.add_argument("input", help="sweep directory or its manifest.csv")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--folded", dest="folded", action="store_true", default=None)
    g.add_argument("--unfolded", dest="folded", action="store_false")
    p.add_argument("--delay", type=_qty("time"), help="DLI delay (default from the sweep manifest)")
    p.add_argument("--period", type=_qty("angle"), help="expected fringe period (default pi folded, 2pi unfolded)")
    p.add_argument("--require-pass", action="store_true", help="exit 4 when the threshold test fails")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_analyze_franson)

    p = ans.add_parser("sweep", parents=[common], help="simulate and analyze a power grid, then fit R or a")
    p.add_argument("--kind", choices=("pairs", "g2"), default="pairs")
    p.add_argument("--powers", type=_power_list, required=True, help="comma list, e.g. 5uW,10uW,50uW")
    _run_flags(p, power=False)
    p.add_argument("--window", type=_ps, default=5000, help="triple window for g2 sweeps (default 5ns)")
    p.add_argument("--jobs", type=_positive_int, default=1, help="parallel worker processes")
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.set_defaults(func=cmd_analyze_sweep)

    p = cmds.add_parser("report", parents=[common], help="summarize run manifests as plot-ready tables")
    p.add_argument("manifests", nargs="+")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_report)
    return top


def resolve_config(args):
    cfg = load_config(getattr(args, "config", None))
    if getattr(args, "delay", None) is not None and getattr(args, "analysis", None) == "franson":
        args.delay = args.delay * 1e12
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "duration", None) is not None:
        if not args.duration > 0:
            raise ConfigError("duration must be positive")
        cfg = cfg.with_duration(args.duration)
    power = getattr(args, "power", None)
    if power is not None and getattr(args, "herald_rate", None) is not None:
        raise ConfigError("give either --power or --herald-rate, not both")
    if getattr(args, "herald_rate", None) is not None:
        try:
            power = power_for_herald_rate(cfg, args.herald_rate)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if power is not None:
        if power < 0:
            raise ConfigError("pump power must be non-negative")
        cfg = cfg.with_power(power)
    return cfg


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = argv
    try:
        cfg = resolve_config(args)
        if getattr(args, "print_config", False):
            sys.stdout.write(dump_config(cfg))
            return EXIT_OK
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        return args.func(args, cfg)
    except (ConfigError, FormatError, TagFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EventBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AnalysisError as exc:
        print(f"analysis failed: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
