"""Command-line front end.

Six subcommands wrap the experiment drivers:

    simulate   synthesize a template dataset and write it to disk
    train      fit the pipeline on a stored dataset, write a model file
    evaluate   score a stored model on the held-out split of a dataset
    timeline   six-point benchmark run with reboots and self-adjustment
    budget     cycle accounting of the streaming datapath
    sweep      pipeline accuracy across sampling densities

Every command writes a JSON summary; identical config and seed produce
byte-identical outputs (no timestamps, sorted keys, deterministic RNG).
Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from .adapt import write_adapt_log
from .classify import quantize_model
from .config import RunConfig, config_dict, load_config, override
from .errors import ConfigError, DataError, NumericError
from .harness import (
    confusion_matrix,
    cycle_budget,
    evaluate_model,
    fit_pipeline,
    run_timeline,
    sampling_sweep,
    simulate_templates,
    split_dataset,
    write_confusion_csv,
    write_sweep_csv,
    write_timeline_csv,
)
from .leaksim import AVR_TABLE
from .modelio import load_model, save_model
from .tracekit import load_dataset, save_dataset

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _resolve(config: RunConfig, path: str) -> str:
    return path if os.path.isabs(path) else os.path.join(config.out_dir, path)


def _write_summary(config: RunConfig, name: str, payload: dict,
                   verbose: bool) -> str:
    payload = dict(payload)
    payload["seed"] = config.seed
    payload["config"] = config_dict(config)
    path = os.path.join(config.out_dir, f"{name}_summary.json")
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    if verbose:
        print(f"wrote {path}", file=sys.stderr)
    return path


def cmd_simulate(config: RunConfig, verbose: bool) -> int:
    data = simulate_templates(config)
    path = _resolve(config, config.dataset_path)
    save_dataset(data, path)
    _write_summary(config, "simulate", {
        "command": "simulate",
        "dataset": path,
        "records": data.n_records,
        "window": config.window,
        "labels": len(data.labels),
    }, verbose)
    return EXIT_OK


def cmd_train(config: RunConfig, verbose: bool) -> int:
    data = load_dataset(_resolve(config, config.dataset_path))
    train, test = split_dataset(data, 0.1, config.seed)
    w_star = config.w_star if config.mode == "offline" \
        else config.realtime_w_star
    model = fit_pipeline(train, config, w_star=w_star)
    fixed = quantize_model(model, config.q) \
        if config.mode == "realtime-emu" else None
    path = _resolve(config, config.model_path)
    save_model(model, path, fixed)
    _write_summary(config, "train", {
        "command": "train",
        "model": path,
        "mode": config.mode,
        "n_train": train.n_records,
        "n_test_heldout": test.n_records,
        "w_star": w_star,
        "selector": config.selector,
        "classifier": config.classifier,
        "quantized": fixed is not None,
    }, verbose)
    return EXIT_OK


def cmd_evaluate(config: RunConfig, verbose: bool) -> int:
    data = load_dataset(_resolve(config, config.dataset_path))
    model, fixed = load_model(_resolve(config, config.model_path))
    _, test = split_dataset(data, 0.1, config.seed)
    use_fixed = fixed if config.mode == "realtime-emu" else None
    rate, pred, truth = evaluate_model(model, test, use_fixed)
    cm = confusion_matrix(truth, pred, model.table.labels)
    cm_path = os.path.join(config.out_dir, "confusion.csv")
    write_confusion_csv(cm, cm_path)
    _write_summary(config, "evaluate", {
        "command": "evaluate",
        "mode": config.mode,
        "recognition_rate": rate,
        "n_test": test.n_records,
        "confusion": cm_path,
        "fixed_point": use_fixed is not None,
    }, verbose)
    if verbose:
        print(f"recognition rate {rate:.4f} on {test.n_records} windows",
              file=sys.stderr)
    return EXIT_OK


def cmd_timeline(config: RunConfig, verbose: bool) -> int:
    report = run_timeline(config)
    csv_path = os.path.join(config.out_dir, "timeline.csv")
    write_timeline_csv(report, csv_path)
    for mode in sorted(report.logs):
        for bench in report.logs[mode]:
            log_path = os.path.join(config.out_dir,
                                    f"adapt_{mode}_{bench}.csv")
            write_adapt_log(report.logs[mode][bench], log_path)
    _write_summary(config, "timeline", {
        "command": "timeline",
        "theta": report.theta,
        "mean_rates": report.mean_rates,
        "rates": report.rates,
        "budget_total": report.budget.total,
        "budget_deadline": report.budget.deadline,
        "real_time": report.budget.real_time,
        "timeline_csv": csv_path,
    }, verbose)
    return EXIT_OK


def cmd_budget(config: RunConfig, verbose: bool) -> int:
    budget = cycle_budget(config.realtime_w_star, AVR_TABLE.n_groups,
                          max(AVR_TABLE.sizes), config.sampling_ratio,
                          config.clock_hz)
    for stage, cycles in budget.stages.items():
        print(f"{stage:>10}: {cycles:4d} cycles")
    print(f"{'total':>10}: {budget.total:4d} cycles "
          f"(deadline {budget.deadline})")
    print(f"{'verdict':>10}: {'real-time' if budget.real_time else 'too slow'}"
          f", {budget.throughput / 1e6:.2f}M windows/s")
    _write_summary(config, "budget", {
        "command": "budget",
        "stages": budget.stages,
        "total": budget.total,
        "deadline": budget.deadline,
        "real_time": budget.real_time,
        "throughput": budget.throughput,
    }, verbose)
    return EXIT_OK


def cmd_sweep(config: RunConfig, verbose: bool) -> int:
    report = sampling_sweep(config)
    csv_path = os.path.join(config.out_dir, "sweep.csv")
    write_sweep_csv(report, csv_path)
    _write_summary(config, "sweep", {
        "command": "sweep",
        "entries": [{"points_per_cycle": p, "window": w, "w_star": k,
                     "rate": r} for p, w, k, r in report.entries],
        "sweep_csv": csv_path,
    }, verbose)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "timeline": cmd_timeline,
    "budget": cmd_budget,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scdisasm",
        description="Dual-channel side-channel instruction disassembly "
                    "toolkit (synthetic traces).")
    parser.add_argument("--config", help="INI config file; defaults apply "
                                         "for missing keys")
    parser.add_argument("--seed", type=int, help="override the RNG seed")
    parser.add_argument("--out-dir", help="override the output directory")
    parser.add_argument("--verbose", action="store_true",
                        help="progress chatter on stderr")
    parser.add_argument("command", choices=sorted(COMMANDS),
                        help="what to run")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config) if args.config else RunConfig()
        config = override(config, seed=args.seed, out_dir=args.out_dir)
        os.makedirs(config.out_dir, exist_ok=True)
        return COMMANDS[args.command](config, args.verbose)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
