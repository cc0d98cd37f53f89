"""Command-line harness: generate | train | evaluate | report.

Exit codes: 0 success, 2 usage error (bad flags or values), 3 data error
(unreadable or malformed files), 4 numerical failure. The default seed
comes from the GKF_SEED environment variable when a command does not pass
--seed explicitly. Every run with the same flags and seed writes
byte-identical output files.
"""

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .errors import (
    DataFormatError,
    DimensionError,
    GeneratorInstabilityError,
    NumericalError,
    UnsupportedNoiseModeError,
)
from .experiment import EvalResult, evaluate, evaluate_oracle, format_report, report_csv, true_replica
from .gkf import GkfConfig, gkf_run
from .io import load_checkpoint, load_episode, save_checkpoint, save_episode
from .models import ReplicaModel, StgnnModel
from .simulate import config_from_dict, config_to_dict, generate_episode, lingss_config, nonlingss_config
from .training import TrainConfig, split_bounds, train

__all__ = ["main"]

_PRESETS = {"lingss": lingss_config, "nonlingss": nonlingss_config}


def _default_seed() -> int:
    raw = os.environ.get("GKF_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise DimensionError(f"GKF_SEED must be an integer, got {raw!r}")


def _write_json(path: str, data: dict) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- generate ---------------------------------------------------------------


def _cmd_generate(args) -> int:
    config = _PRESETS[args.preset]()
    if args.config:
        try:
            with open(args.config) as fh:
                overrides = json.load(fh)
        except FileNotFoundError as exc:
            raise DataFormatError(f"missing config file: {args.config}") from exc
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{args.config} is not valid JSON: {exc}") from exc
        merged = config_to_dict(config)
        merged.update(overrides)
        config = config_from_dict(merged)
    seed = args.seed if args.seed is not None else _default_seed()
    config = replace(config, seed=seed)
    if args.nodes is not None:
        config = replace(config, n_nodes=args.nodes)
    if args.steps is not None:
        config = replace(config, length=args.steps)

    episode = generate_episode(config)
    save_episode(episode, args.out)
    print(f"wrote episode {config.name!r} to {args.out}")
    print(f"  nodes={episode.n_nodes} steps={episode.length} edges={len(episode.topology.edges())}")
    print(f"  input ones-fraction={float(np.mean(episode.inputs)):.4f}")
    print(f"  state variance={float(np.var(episode.states)):.4f} output variance={float(np.var(episode.outputs)):.4f}")
    return 0


# -- train ------------------------------------------------------------------


def _init_model(args, episode, seed):
    if args.model == "replica":
        if args.init == "truth":
            return true_replica(episode)
        cfg = episode.config
        return ReplicaModel.random_init(
            episode.topology, seed, state_activation=cfg.state_activation, readout_activation=cfg.readout_activation
        )
    if args.init == "truth":
        raise DimensionError("--init truth only applies to --model replica")
    return StgnnModel(episode.topology, seed=seed)


def _metrics_csv(path: str, report) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,train_mse,val_mse\n")
        for i, (tr, va) in enumerate(zip(report.train_mse, report.val_mse), start=1):
            fh.write(f"{i},{tr:.17g},{va:.17g}\n")


def _run_suffix(path: str, run: int) -> str:
    root, ext = os.path.splitext(path)
    return f"{root}.run{run}{ext or '.json'}"


def _cmd_train(args) -> int:
    episode = load_episode(args.data)
    base_seed = args.seed if args.seed is not None else _default_seed()
    tc = TrainConfig(
        epochs=args.epochs, lr=args.lr, batch_size=args.batch_size, window=args.window, patience=args.patience
    )
    rows = []
    for run in range(args.runs):
        seed = base_seed + run
        model = _init_model(args, episode, seed)
        fitted, report = train(model, episode, replace(tc, seed=seed))
        row = evaluate(fitted, episode, kfr="both", model_name=f"{args.model}[seed={seed}]")
        rows.append(row)

        ckpt_path = args.out if args.runs == 1 else _run_suffix(args.out, run)
        extra = {
            "seed": seed,
            "train_config": {
                "epochs": tc.epochs, "lr": tc.lr, "batch_size": tc.batch_size,
                "window": tc.window, "patience": tc.patience,
            },
            "data": os.path.basename(os.path.normpath(args.data)),
            "best_epoch": report.best_epoch,
            "epochs_run": report.epochs_run,
        }
        save_checkpoint(fitted, ckpt_path, extra=extra)
        _metrics_csv(os.path.splitext(ckpt_path)[0] + ".metrics.csv", report)
        print(
            f"run {run}: seed={seed} epochs={report.epochs_run} best_epoch={report.best_epoch} "
            f"val={report.best_val_mse:.5f} -> {ckpt_path}"
        )

    print()
    print(format_report(rows), end="")
    if args.runs > 1:
        wo = np.array([r.mse_wo_kfr for r in rows])
        w = np.array([r.mse_w_kfr for r in rows])
        rpi = np.array([r.rpi_mean for r in rows])
        print()
        print(f"aggregate over {args.runs} runs (mean +- std):")
        print(f"  mse w/o kfr: {wo.mean():.4f} +- {wo.std(ddof=1):.4f}")
        print(f"  mse w/  kfr: {w.mean():.4f} +- {w.std(ddof=1):.4f}")
        print(f"  rpi: {100 * rpi.mean():.1f} +- {100 * rpi.std(ddof=1):.1f} %")
    return 0


# -- evaluate ---------------------------------------------------------------


def _cmd_evaluate(args) -> int:
    episode = load_episode(args.data)
    if args.oracle:
        row = evaluate_oracle(episode, args.oracle)
    else:
        if not args.checkpoint:
            raise DimensionError("evaluate needs --checkpoint (or --oracle exp|gt)")
        model, _meta = load_checkpoint(args.checkpoint)
        if model.n_nodes != episode.n_nodes:
            raise DataFormatError(
                f"checkpoint has {model.n_nodes} nodes but episode has {episode.n_nodes}"
            )
        row = evaluate(model, episode, kfr=args.kfr, warmup=args.warmup, model_name=args.name)
        if args.trace:
            cfg = GkfConfig.for_generator(episode.config)
            _, b = split_bounds(episode.length)
            seg = episode.slice(max(0, b - args.warmup), episode.length)
            trace = gkf_run(model, cfg, seg.inputs, seg.outputs, refine=args.kfr != "off")
            trace.to_csv(args.trace)
    print(format_report([row]), end="")
    if row.runtime_s is not None:
        print(f"runtime: {row.runtime_s:.2f}s")
    if args.out:
        _write_json(args.out, row.to_dict())
    return 0


# -- report -----------------------------------------------------------------


def _cmd_report(args) -> int:
    rows = []
    for path in args.rows or []:
        try:
            with open(path) as fh:
                rows.append(EvalResult.from_dict(json.load(fh)))
        except FileNotFoundError as exc:
            raise DataFormatError(f"missing row file: {path}") from exc
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path} is not valid JSON: {exc}") from exc
        except TypeError as exc:
            raise DataFormatError(f"{path}: bad row fields ({exc})") from exc

    if not rows and not args.episode:
        raise DimensionError("report needs at least one --row or an --episode trace export")

    if rows:
        table = format_report(rows)
        print(table, end="")
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(table)
        if args.csv:
            with open(args.csv, "w") as fh:
                fh.write(report_csv(rows))

    if args.episode:
        if not args.trace_out:
            raise DimensionError("--episode needs --trace-out PATH")
        episode = load_episode(args.episode)
        nodes = range(episode.n_nodes) if args.nodes is None else _parse_nodes(args.nodes, episode.n_nodes)
        with open(args.trace_out, "w") as fh:
            fh.write("t,node,input,state,output\n")
            for v in nodes:
                for t in range(episode.length):
                    state = f"{episode.states[t, v]:.17g}" if episode.states is not None else ""
                    fh.write(f"{t},{v},{episode.inputs[t, v]:.17g},{state},{episode.outputs[t, v]:.17g}\n")
        print(f"wrote node traces for {len(list(nodes))} nodes to {args.trace_out}")
    return 0


def _parse_nodes(spec: str, n: int) -> list:
    try:
        nodes = [int(tok) for tok in spec.split(",") if tok.strip() != ""]
    except ValueError:
        raise DimensionError(f"--nodes expects comma-separated integers, got {spec!r}")
    for v in nodes:
        if not 0 <= v < n:
            raise DimensionError(f"node {v} out of range for {n}-node episode")
    return nodes


# -- parser -----------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="graphkf", description="Graph state-space filtering experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic episode directory")
    g.add_argument("--preset", choices=sorted(_PRESETS), default="lingss")
    g.add_argument("--config", help="JSON file overriding preset fields")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--nodes", type=int, default=None)
    g.add_argument("--steps", type=int, default=None)
    g.add_argument("-o", "--out", required=True)
    g.set_defaults(fn=_cmd_generate)

    t = sub.add_parser("train", help="fit a model on an episode and checkpoint it")
    t.add_argument("--data", required=True, help="episode directory")
    t.add_argument("--model", choices=("replica", "stgnn"), default="replica")
    t.add_argument("--init", choices=("random", "truth"), default="random")
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--runs", type=int, default=1)
    t.add_argument("--epochs", type=int, default=100)
    t.add_argument("--lr", type=float, default=0.01)
    t.add_argument("--batch-size", type=int, default=32)
    t.add_argument("--window", type=int, default=12)
    t.add_argument("--patience", type=int, default=10)
    t.add_argument("-o", "--out", required=True, help="checkpoint path (JSON)")
    t.set_defaults(fn=_cmd_train)

    e = sub.add_parser("evaluate", help="score a checkpoint (or reference baseline) on an episode")
    e.add_argument("--data", required=True)
    e.add_argument("--checkpoint")
    e.add_argument("--kfr", choices=("on", "off", "both"), default="both")
    e.add_argument("--oracle", choices=("exp", "gt"), default=None)
    e.add_argument("--warmup", type=int, default=0)
    e.add_argument("--name", default=None, help="model tag in the report row")
    e.add_argument("--out", help="write the row as JSON")
    e.add_argument("--trace", help="write the filter trace CSV")
    e.set_defaults(fn=_cmd_evaluate)

    r = sub.add_parser("report", help="format rows into a table; export node traces")
    r.add_argument("--row", dest="rows", action="append", help="row JSON (repeatable)")
    r.add_argument("--out", help="write the text table")
    r.add_argument("--csv", help="write the rows as CSV")
    r.add_argument("--episode", help="episode directory for per-node trace export")
    r.add_argument("--nodes", help="comma-separated node ids (default: all)")
    r.add_argument("--trace-out", help="per-node trace CSV path")
    r.set_defaults(fn=_cmd_report)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (DimensionError, UnsupportedNoiseModeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (NumericalError, GeneratorInstabilityError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
