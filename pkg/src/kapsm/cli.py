"""Command-line front end: BER experiment sweeps, the benchmark ladder, and
file-based training/detection on recorded IQ data.

Subcommands::

    kapsm simulate --config run.ini [--out trials.csv] [--json] [--seed N] [--workers N]
    kapsm bench    --config run.ini [--out report.csv] [--json] [--seed N] [--workers N]
    kapsm detect   MODEL IQ OUT [--config run.ini] [--workers N]
    kapsm train    --config run.ini --iq FILE --pilots FILE --out MODEL

Exit codes are stable across subcommands: 0 success, 1 runtime failure
(including a benchmark checksum failure), 2 input or configuration error.

``simulate`` writes one CSV row per trial with the fixed header

    seed,K,M,scheme,epsilon,W,sigma_sq,w_L,w_G,noise_var,ber,atoms,detect_us

plus a per-cell aggregate (mean BER and +/-1 sample standard deviation over
the seeds of each scheme x antenna cell).  Because the trial schema is
pinned, aggregates are emitted separately: to ``OUT.summary.csv`` when
``--out`` is given, to stderr otherwise (``--json`` bundles both into one
document).  With a fixed config and seed every run is reproducible
byte-for-byte except the wall-clock ``detect_us`` column.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .apsm import train
from .bench import bench_detection, report_to_csv, report_to_json
from .config import ConfigError, RunConfig, load_config
from .engine import EngineConfig, batch_detect
from .kernels import zero_filter
from .modelio import (
    FileFormatError,
    load_iq,
    load_model,
    load_symbols,
    save_model,
    save_symbols,
)
from .noma import FrameSpec, draw_channel, noise_var_for_snr, run_trial

__all__ = ["main"]

TRIAL_COLUMNS = (
    "seed", "K", "M", "scheme", "epsilon", "W", "sigma_sq",
    "w_L", "w_G", "noise_var", "ber", "atoms", "detect_us",
)
SUMMARY_COLUMNS = ("scheme", "M", "K", "noise_var", "seeds", "ber_mean", "ber_sd")


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _rows_to_csv(columns, rows) -> str:
    lines = [",".join(columns)]
    lines.extend(",".join(_fmt(row[c]) for c in columns) for row in rows)
    return "\n".join(lines) + "\n"


def _write(text: str, out, stream) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        stream.write(text)


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        cfg = replace(cfg, seeds=(args.seed,))
    if args.workers is not None:
        cfg = replace(
            cfg,
            engine=replace(cfg.engine, workers=args.workers),
            bench=replace(cfg.bench, workers=(args.workers,)),
        )
    return cfg


def _powers(cfg: RunConfig) -> np.ndarray:
    if cfg.power_profile == "uniform":
        return np.ones(cfg.users)
    return np.asarray(cfg.power_profile, dtype=np.float64)


def _resolved_noise_var(cfg: RunConfig) -> float:
    if cfg.noise_var is not None:
        return cfg.noise_var
    return noise_var_for_snr(_powers(cfg), cfg.snr_db)


def cmd_simulate(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    noise_var = _resolved_noise_var(cfg)
    powers = _powers(cfg)
    p = cfg.apsm.params
    trials = []
    summary = []
    for si, scheme in enumerate(cfg.schemes):
        for m in cfg.antennas:
            bers = []
            for seed in cfg.seeds:
                rng = np.random.default_rng([seed, si, m])
                ch = draw_channel(cfg.users, m, powers, noise_var, rng)
                frame = FrameSpec(cfg.n_train, cfg.n_data, scheme, cfg.subcarriers, seed)
                rep = run_trial(ch, frame, cfg.apsm, cfg.engine, cfg.target_user, rng)
                bers.append(rep.ber)
                trials.append({
                    "seed": seed, "K": cfg.users, "M": m, "scheme": scheme,
                    "epsilon": cfg.apsm.epsilon, "W": cfg.apsm.window,
                    "sigma_sq": p.sigma_sq, "w_L": p.w_l, "w_G": p.w_g,
                    "noise_var": noise_var, "ber": rep.ber,
                    "atoms": rep.trained_atoms, "detect_us": rep.detect_us,
                })
            sd = float(np.std(bers, ddof=1)) if len(bers) > 1 else 0.0
            summary.append({
                "scheme": scheme, "M": m, "K": cfg.users, "noise_var": noise_var,
                "seeds": len(bers), "ber_mean": float(np.mean(bers)), "ber_sd": sd,
            })
    if args.json:
        doc = json.dumps({"trials": trials, "summary": summary}, indent=2) + "\n"
        _write(doc, args.out, sys.stdout)
    else:
        _write(_rows_to_csv(TRIAL_COLUMNS, trials), args.out, sys.stdout)
        summary_csv = _rows_to_csv(SUMMARY_COLUMNS, summary)
        if args.out:
            Path(str(args.out) + ".summary.csv").write_text(summary_csv, encoding="utf-8")
        else:
            sys.stderr.write(summary_csv)
    return 0


def cmd_bench(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    plan = cfg.bench
    report = bench_detection(
        plan.dict_sizes,
        plan.batch_sizes,
        plan.stages,
        plan.workers,
        plan.repeats,
        seed=cfg.seeds[0],
        antennas=plan.antennas,
        params=cfg.apsm.params,
        engine_template=cfg.engine,
    )
    text = report_to_json(report) if args.json else report_to_csv(report)
    _write(text, args.out, sys.stdout)
    if report.has_failures:
        bad = sorted({row.stage for row in report.rows if not row.ok})
        print(f"error: checksum mismatch against baseline for stage(s): {', '.join(bad)}",
              file=sys.stderr)
        return 1
    return 0


def cmd_detect(args) -> int:
    f, params = load_model(args.model)
    rx = load_iq(args.iq)
    if 2 * rx.shape[1] != f.dim:
        raise FileFormatError(
            f"{args.iq}: IQ stream has {rx.shape[1]} antennas but the model "
            f"expects {f.dim // 2}"
        )
    engine = load_config(args.config).engine if args.config else EngineConfig()
    if args.workers is not None:
        engine = replace(engine, workers=args.workers)
    save_symbols(args.out, batch_detect(f, rx, params, engine))
    return 0


def cmd_train(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    rx = load_iq(args.iq)
    pilots = load_symbols(args.pilots)
    if pilots.size == 0:
        raise FileFormatError(f"{args.pilots}: pilot stream is empty; nothing to train on")
    if pilots.size > rx.shape[0]:
        raise FileFormatError(
            f"{args.pilots}: {pilots.size} pilot symbols exceed the "
            f"{rx.shape[0]} IQ samples in {args.iq}"
        )
    f = train(zero_filter(2 * rx.shape[1]), zip(rx[: pilots.size], pilots), cfg.apsm)
    save_model(args.out, f, cfg.apsm.params)
    print(f"trained {f.n_atoms} atoms from {pilots.size} pilots -> {args.out}",
          file=sys.stderr)
    return 0


def _add_common(sub, config_required=True):
    if config_required:
        sub.add_argument("--config", required=True, help="run configuration file")
    sub.add_argument("--seed", type=int, default=None, help="override the config seed list")
    sub.add_argument("--workers", type=int, default=None, help="override worker count")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kapsm",
        description="Partially linear kernel multiuser detection: simulation, "
        "benchmarking, and file-based train/detect.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the BER trial matrix from a config")
    _add_common(sim)
    sim.add_argument("--out", default=None, help="trial CSV path (default stdout)")
    sim.add_argument("--json", action="store_true", help="emit JSON instead of CSV")
    sim.add_argument("--csv", action="store_true", help="emit CSV (default)")
    sim.set_defaults(func=cmd_simulate)

    ben = sub.add_parser("bench", help="time the engine optimization ladder")
    _add_common(ben)
    ben.add_argument("--out", default=None, help="report path (default stdout)")
    ben.add_argument("--json", action="store_true", help="emit JSON instead of CSV")
    ben.add_argument("--csv", action="store_true", help="emit CSV (default)")
    ben.set_defaults(func=cmd_bench)

    det = sub.add_parser("detect", help="detect symbols in an IQ file with a trained model")
    det.add_argument("model", help="model file")
    det.add_argument("iq", help="IQ sample file")
    det.add_argument("out", help="output symbol-estimate file")
    det.add_argument("--config", default=None, help="optional config for engine settings")
    det.add_argument("--seed", type=int, default=None, help=argparse.SUPPRESS)
    det.add_argument("--workers", type=int, default=None, help="override worker count")
    det.set_defaults(func=cmd_detect)

    tra = sub.add_parser("train", help="train a model from an IQ file plus known pilots")
    _add_common(tra)
    tra.add_argument("--iq", required=True, help="IQ sample file")
    tra.add_argument("--pilots", required=True, help="pilot symbols (raw f32 I,Q pairs)")
    tra.add_argument("--out", required=True, help="output model file")
    tra.set_defaults(func=cmd_train)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help, 2 for usage errors
        return 0 if exc.code in (0, None) else 2
    try:
        return args.func(args)
    except (ConfigError, FileFormatError, FileNotFoundError, IsADirectoryError,
            PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 — CLI boundary: map to exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
