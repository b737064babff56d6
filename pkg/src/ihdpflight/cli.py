"""Command-line interface: run, batch, compare, spectrum.

Output paths are resolved against the IHDPFLIGHT_OUT environment variable
(default: current directory).  Config precedence, lowest to highest:
built-in defaults, command-line flags, --config JSON file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .analysis import fft_magnitude
from .harness import ConfigError, MODES, RunConfig, compare, load_trace_csv, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3

_RUN_FLAGS = [
    # (flag, config field, type)
    ("--mode", "mode", str),
    ("--duration", "duration", float),
    ("--dt", "dt", float),
    ("--seed", "seed", int),
    ("--ref-amplitude", "ref_amplitude", float),
    ("--ref-period", "ref_period", float),
    ("--init-range", "init_range", float),
    ("--warmup-steps", "warmup_steps", int),
    ("--snapshot-stride", "snapshot_stride", int),
    ("--rls-forgetting", "rls_forgetting", float),
    ("--rls-p0", "rls_p0", float),
    ("--filter-zeta", "filter_zeta", float),
    ("--filter-omega-n", "filter_omega_n", float),
]


def _add_config_flags(parser: argparse.ArgumentParser, with_seed: bool = True) -> None:
    for flag, dest, typ in _RUN_FLAGS:
        if dest == "seed" and not with_seed:
            continue
        kwargs = {"dest": dest, "type": typ, "default": None}
        if dest == "mode":
            kwargs["choices"] = MODES
        parser.add_argument(flag, **kwargs)
    parser.add_argument("--config", default=None, metavar="FILE",
                        help="JSON file of RunConfig fields; overrides flags. "
                             "Nested 'higher'/'lower' dicts override agent fields.")


def _build_config(args: argparse.Namespace, with_seed: bool = True) -> RunConfig:
    data = {}
    for _, dest, _typ in _RUN_FLAGS:
        if not with_seed and dest == "seed":
            continue
        val = getattr(args, dest)
        if val is not None:
            data[dest] = val
    if args.config is not None:
        try:
            with open(args.config) as fh:
                file_data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
        if not isinstance(file_data, dict):
            raise ConfigError("config file must hold a JSON object")
        data.update(file_data)
    return RunConfig.from_dict(data)


def _out_base() -> Path:
    return Path(os.environ.get("IHDPFLIGHT_OUT", "."))

def _resolve(path_arg: str | None, default_name: str) -> Path:
    p = Path(path_arg) if path_arg else Path(default_name)
    return p if p.is_absolute() else _out_base() / p


def _print_run_summary(s: dict, wall: float, out_dir: Path | None) -> None:
    dest = f" -> {out_dir}" if out_dir else ""
    print(f"[{s['mode']} seed={s['seed']}] status={s['status']} "
          f"steps={s['n_steps']} rms_e_alpha_settled={s['rms_e_alpha_settled']:.4g} "
          f"mean|d qref|={s['mean_abs_increment_qref']:.4g} "
          f"wall={wall:.1f}s{dest}")


def _cmd_run(args: argparse.Namespace) -> int:
    config = _build_config(args)
    trace = run(config)
    out_dir = _resolve(args.out, f"run_{config.mode}_seed{config.seed}")
    trace.save(out_dir)
    _print_run_summary(trace.summary(), trace.wall_time, out_dir)
    return EXIT_OK if trace.status == "completed" else EXIT_DIVERGED


def _batch_worker(cfg_dict: dict, dest: str) -> tuple[dict, float]:
    """Run one seed and save its artifacts; safe to call in a child process."""
    trace = run(RunConfig.from_dict(cfg_dict))
    trace.save(Path(dest))
    return trace.summary(), trace.wall_time


def _cmd_batch(args: argparse.Namespace) -> int:
    config = _build_config(args, with_seed=False)
    out_dir = _resolve(args.out, f"batch_{config.mode}")
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [({**config.to_dict(), "seed": seed}, str(out_dir / f"seed{seed}"))
             for seed in args.seeds]
    jobs = args.jobs if args.jobs else min(len(tasks), os.cpu_count() or 1)
    if jobs <= 1:
        results = [_batch_worker(cfg, dest) for cfg, dest in tasks]
    else:
        # Runs are independent (one fresh RNG stream and model per seed), so
        # seeds execute in parallel and results are aggregated by seed key.
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_batch_worker, cfg, dest) for cfg, dest in tasks]
            results = [f.result() for f in futures]
    summaries = {}
    any_diverged = False
    for seed, (summary, wall) in zip(args.seeds, results):
        _print_run_summary(summary, wall, out_dir / f"seed{seed}")
        summaries[str(seed)] = summary
        any_diverged = any_diverged or summary["status"] != "completed"
    medians = {}
    for key in ("rms_e_alpha_settled", "rms_e_alpha", "mean_abs_increment_qref",
                "max_abs_increment_qref", "fraction_z_high_in_pm2"):
        medians[key] = float(np.median([s[key] for s in summaries.values()]))
    with open(out_dir / "aggregate.json", "w") as fh:
        json.dump({"seeds": list(args.seeds), "medians": medians,
                   "per_seed": summaries}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"batch medians: rms_e_alpha_settled={medians['rms_e_alpha_settled']:.4g} "
          f"mean|d qref|={medians['mean_abs_increment_qref']:.4g}")
    return EXIT_DIVERGED if any_diverged else EXIT_OK


def _cmd_compare(args: argparse.Namespace) -> int:
    traces = [load_trace_csv(p) for p in args.traces]
    labels = args.labels.split(",") if args.labels else [Path(p).parent.name or f"run{i}"
                                                         for i, p in enumerate(args.traces)]
    report = compare(traces, labels=labels, band=(args.band_lo, args.band_hi))
    text = report.to_text()
    out = _resolve(args.out, "compare.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    print(text, end="")
    print(f"-> {out}")
    return EXIT_OK


def _cmd_spectrum(args: argparse.Namespace) -> int:
    data = load_trace_csv(args.trace)
    if args.column not in data:
        raise ConfigError(f"column {args.column!r} not in trace "
                          f"(have: {', '.join(sorted(data))})")
    t = data["t"]
    if len(t) < 2:
        raise ConfigError("trace too short for a spectrum")
    fs = 1.0 / (t[1] - t[0])
    lo = int(np.searchsorted(t, args.t_start)) if args.t_start is not None else 0
    hi = int(np.searchsorted(t, args.t_end)) if args.t_end is not None else len(t)
    x = data[args.column][lo:hi]
    window = None if args.window == "none" else args.window
    spec = fft_magnitude(x, fs, window=window)
    out = _resolve(args.out, f"spectrum_{args.column}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(out, np.column_stack([spec.freqs, spec.magnitudes]), fmt="%.17g",
               delimiter=",", header="freq_hz,magnitude", comments="")
    if len(spec.magnitudes) > 1:
        k = 1 + int(np.argmax(spec.magnitudes[1:]))
        print(f"{args.column}: {len(x)} samples, peak (ex. DC) "
              f"{spec.magnitudes[k]:.6g} at {spec.freqs[k]:.3f} Hz -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ihdpflight",
        description="Cascaded online-learning flight-control simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one run and write its artifacts")
    _add_config_flags(p_run)
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.set_defaults(func=_cmd_run)

    p_batch = sub.add_parser("batch", help="run several seeds of one scenario")
    _add_config_flags(p_batch, with_seed=False)
    p_batch.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    p_batch.add_argument("--jobs", type=int, default=0,
                         help="worker processes (0 = one per seed, capped at CPU count)")
    p_batch.add_argument("--out", default=None, help="output directory")
    p_batch.set_defaults(func=_cmd_batch)

    p_cmp = sub.add_parser("compare", help="smoothness statistics across trace files")
    p_cmp.add_argument("traces", nargs="+", help="two or more trace.csv paths")
    p_cmp.add_argument("--labels", default=None, help="comma-separated run labels")
    p_cmp.add_argument("--band-lo", type=float, default=10.0)
    p_cmp.add_argument("--band-hi", type=float, default=40.0)
    p_cmp.add_argument("--out", default=None, help="output report path")
    p_cmp.set_defaults(func=_cmd_compare)

    p_spec = sub.add_parser("spectrum", help="magnitude spectrum of one trace column")
    p_spec.add_argument("trace", help="trace.csv path")
    p_spec.add_argument("--column", default="q_ref_filt")
    p_spec.add_argument("--t-start", type=float, default=None)
    p_spec.add_argument("--t-end", type=float, default=None)
    p_spec.add_argument("--window", choices=["none", "hann"], default="none")
    p_spec.add_argument("--out", default=None, help="output csv path")
    p_spec.set_defaults(func=_cmd_spectrum)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
