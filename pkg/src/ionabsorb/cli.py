"""Command-line entry point: ``ionabsorb <subcommand> [--config NAME] [--seed N] [--out DIR]``.

Exit codes: 0 ok, 1 usage, 2 input/config parse failure, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .analysis.correlate import g2
from .analysis.fitting import FitError, fit_exponential
from .analysis.jumps import MixtureFitError, analyze_jumps, dark_period_durations
from .config import ConfigError, ExperimentConfig, load_config
from .protocols import (run_entanglement_scan, run_polarization_scan, run_quantum_jump_experiment,
                        run_spectroscopy_scan)
from .sim import simulate
from .timetags import FLUORESCENCE, HERALD, StreamFormatError, TimeTagStream, read_stream, write_stream
from .transfer import transfer_fidelity_experiment

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def write_json(obj, path: Path) -> None:
    text = json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")


def write_csv(header, rows, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _config(args, kind: str) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig({"experiment": {"kind": kind}})
    if args.seed is not None:
        if args.seed < 0:
            raise UsageError("--seed must be >= 0")
        cfg = cfg.with_seed(args.seed)
    return cfg


def _stream(args, cfg) -> TimeTagStream:
    if getattr(args, "input", None):
        return read_stream(args.input)
    stream, _ = simulate(cfg.trajectory())
    return stream


def cmd_simulate(args, cfg, out: Path) -> None:
    traj = cfg.trajectory()
    n = cfg["experiment"]["trajectories"]
    summary = []
    for k in range(n):
        stream, log = simulate(replace(traj, trajectory=k))
        tag = "" if n == 1 else f"_{k:03d}"
        write_stream(stream, out / f"stream{tag}.ttag")
        log.to_csv(out / f"truth{tag}.csv")
        summary.append({"trajectory": k, "duration": traj.duration,
                        "counts": {str(ch): int(stream.ticks(ch).size) for ch in stream.channels},
                        "transitions": len(log)})
    write_json({"scheme": traj.scheme, "master_seed": traj.master_seed, "trajectories": summary},
               out / "simulate.json")


def cmd_jumps(args, cfg, out: Path) -> None:
    stream = _stream(args, cfg)
    a = cfg.analysis()
    res = analyze_jumps(stream, FLUORESCENCE, a.t_b, a.N)
    d = dark_period_durations(res.off_times, res.on_times)
    report = {"mean_bright": res.mean_bright, "mean_dark": res.mean_dark, "n_threshold": res.n_th,
              "tau_threshold": res.tau_th, "n_on": int(res.on_times.size), "n_off": int(res.off_times.size),
              "ambiguous_windows": res.ambiguous, "n_dark_periods": int(d.size)}
    if d.size:
        f = fit_exponential(d)
        report.update(tau=f["tau"], tau_error=f.errors["tau"])
    write_json(report, out / "jumps.json")
    rows = sorted([("dark_to_bright", t) for t in res.on_times] + [("bright_to_dark", t) for t in res.off_times],
                  key=lambda r: r[1])
    write_csv(("direction", "time_s"), rows, out / "jumps.csv")
    write_csv(("duration_s",), [(x,) for x in d], out / "dark_periods.csv")


def cmd_g2(args, cfg, out: Path) -> None:
    if not args.input:
        raise UsageError("g2 needs --input STREAM")
    stream = read_stream(args.input)
    a = cfg.analysis()
    width = args.bin_width if args.bin_width is not None else a.g2_bin
    span = args.lag_range if args.lag_range is not None else a.g2_range
    tick = stream.tick
    if args.first_photons:
        res = analyze_jumps(stream, args.b, a.t_b, a.N)
        h = g2(stream.times(args.a), res.on_times, width, span)
        scale = 1.0
    else:
        w_ticks = width / tick
        if abs(w_ticks - round(w_ticks)) > 1e-9 * max(1.0, w_ticks) or round(w_ticks) < 1:
            raise UsageError("bin width must be a whole number of ticks")
        w_ticks = int(round(w_ticks))
        k = int(math.floor(span / width + 1e-9))
        h = g2(stream.ticks(args.a), stream.ticks(args.b), w_ticks, k * w_ticks)
        scale = tick
    lags = h.lags * scale
    write_csv(("lag_s", "count"), zip(lags.tolist(), h.counts.tolist()), out / "g2.csv")
    rep = {"bin_width_s": h.bin_width * scale, "bins_per_side": h.n_side, "background": h.background,
           "peak_lag_s": h.peak_lag * scale, "peak_counts": h.peak_counts, "zero_lag_counts": h.at_zero(),
           "channels": [args.a, args.b], "first_photons": bool(args.first_photons)}
    if h.background > 0:
        rep["significance"] = h.significance
    write_json(rep, out / "g2.json")


def _scan_rows(points):
    return [(p.setting, p.x, p.raw, p.background, p.net, p.error) for p in points]


_SCAN_HEADER = ("setting", "x", "raw", "background", "net", "error")


def cmd_polar_scan(args, cfg, out: Path) -> None:
    sign = +1 if cfg["scan"]["preparation"] == "sigma-" else -1
    rep = run_polarization_scan(cfg.pulsed(), list(cfg["scan"]["settings"]), sign)
    write_json(rep.as_dict(), out / "polar_scan.json")
    write_csv(_SCAN_HEADER, _scan_rows(rep.points), out / "polar_scan.csv")


def cmd_spectrum(args, cfg, out: Path) -> None:
    rep = run_spectroscopy_scan(cfg.pulsed(), cfg["scan"]["filter_detunings"])
    write_json(rep.as_dict(), out / "spectrum.json")
    rows = [row for pts in rep.points.values() for row in _scan_rows(pts)]
    write_csv(_SCAN_HEADER, rows, out / "spectrum.csv")


def cmd_entangle_scan(args, cfg, out: Path) -> None:
    state = cfg.source().pair_state
    bases = [args.basis] if args.basis else [cfg["scan"]["basis"]]
    if args.basis == "all":
        bases = ["RL", "HV", "DA"]
    summary = {}
    rows = []
    for b in bases:
        rep = run_entanglement_scan(cfg.pulsed(), b, cfg["scan"]["hwp_angles"], state)
        summary[b] = rep.as_dict()
        rows += [(b,) + r for r in _scan_rows(rep.points)]
    write_json(summary, out / "entangle_scan.json")
    write_csv(("basis",) + _SCAN_HEADER, rows, out / "entangle_scan.csv")


def cmd_transfer(args, cfg, out: Path) -> None:
    from .sim import stream_rng
    tc = cfg.transfer()
    rep = transfer_fidelity_experiment(tc, cfg["transfer"]["n_inputs"], stream_rng(cfg.master_seed, 0, 100))
    d = rep.as_dict()
    d["config"] = dict(cfg["transfer"])
    write_json(d, out / "transfer.json")
    write_csv(("fidelity",), [(f,) for f in rep.fidelities], out / "transfer_fidelities.csv")


def cmd_report(args, cfg, out: Path) -> None:
    rep = run_quantum_jump_experiment(cfg.jump_experiment())
    write_json(rep.as_dict(), out / "report.json")
    write_csv(("lag_s", "count"), rep.curve(), out / "report_g2.csv")


COMMANDS = {
    "simulate": cmd_simulate, "jumps": cmd_jumps, "g2": cmd_g2, "polar-scan": cmd_polar_scan,
    "spectrum": cmd_spectrum, "entangle-scan": cmd_entangle_scan, "transfer": cmd_transfer,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ionabsorb", description="Single-ion photon absorption simulator and analyzer.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="config file, or a name in $IONABSORB_CONFIG_DIR / the presets")
        s.add_argument("--seed", type=int, help="override experiment.master_seed")
        s.add_argument("--out", default=".", help="output directory (default: current)")
        if name in ("jumps", "g2"):
            s.add_argument("--input", help="time-tag stream file")
        if name == "g2":
            s.add_argument("--a", type=int, default=HERALD, help="start channel (default herald)")
            s.add_argument("--b", type=int, default=FLUORESCENCE, help="stop channel (default fluorescence)")
            s.add_argument("--bin-width", type=float, help="bin width, s")
            s.add_argument("--lag-range", type=float, help="half range, s")
            s.add_argument("--first-photons", action="store_true",
                           help="correlate with extracted dark->bright photons of channel b")
        if name == "entangle-scan":
            s.add_argument("--basis", choices=["RL", "HV", "DA", "all"])
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
        cfg = _config(args, args.command)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, cfg, out)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, StreamFormatError, FileNotFoundError, UnicodeDecodeError) as e:
        print(f"ionabsorb: {e}", file=sys.stderr)
        return EXIT_PARSE
    except (FitError, MixtureFitError, FloatingPointError, ValueError, np.linalg.LinAlgError) as e:
        print(f"ionabsorb: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
