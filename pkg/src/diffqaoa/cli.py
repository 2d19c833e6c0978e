"""Command-line entry point: ``diffqaoa {gen-data,train,sample,eval,oracle}``.

Every subcommand writes into ``--out`` (a directory). ``--config FILE`` reads
a JSON object whose keys are option names (dashes or underscores) and
overrides the built-in defaults; explicit flags still win. ``--print-config``
dumps every default as such a file.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from diffqaoa import dataset, ddpm
from diffqaoa.errors import (
    CapacityError,
    DatasetError,
    ParameterError,
    ParseError,
    PersistenceError,
    TrainingDivergedError,
)
from diffqaoa.evaluate import CONVERGENCE_COLUMNS, INSTANCE_COLUMNS, EvalConfig, run_eval
from diffqaoa.graph import Graph, brute_force_maxcut
from diffqaoa.qaoa_opt import OptimizerConfig
from diffqaoa.rng import entropy_seed

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_INTERNAL = 4

CORPUS_FILE = "corpus.jsonl"
CHECKPOINT_FILE = "model.ckpt.json"
LOSS_FILE = "loss.csv"
SAMPLES_FILE = "samples.csv"

DEFAULTS: dict[str, dict] = {
    "gen-data": {
        "out": "runs/data", "count": 3500, "n_min": 4, "n_max": 8, "p_min": 0.3, "p_max": 0.75,
        "starts": 10, "iters": 500, "lr": 0.05, "adam_beta1": 0.9, "adam_beta2": 0.999,
        "adam_eps": 1e-8, "workers": 1,
    },
    "train": {
        "out": "runs/model", "corpus": "runs/data/" + CORPUS_FILE, "epochs": 100, "batch_size": 50,
        "lr": 1e-3, "steps": 100, "beta_start": 1e-4, "beta_end": 0.02, "hidden": 128,
        "ema_decay": 0.995,
    },
    "sample": {"out": "runs/samples", "checkpoint": "runs/model/" + CHECKPOINT_FILE, "count": 16,
               "normalized": False},
    "eval": {
        "out": "runs/eval", "checkpoint": "runs/model/" + CHECKPOINT_FILE, "suite": "standard",
        "count": 50, "n_min": 4, "n_max": 8, "p_min": 0.3, "p_max": 0.75,
        "large_sizes": "9,10,11,12,13,14,15,16", "samples_per_arm": 16, "refine_steps": 100,
        "lr": 0.05, "trace_instances": 5, "self_compare": False,
    },
    "oracle": {"graph": None, "out": None},
}


class UsageError(Exception):
    pass


def _say(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _resolve_seed(args) -> int:
    if args.seed is None:
        args.seed = entropy_seed()
        _say(f"no --seed given; using seed {args.seed}")
    return args.seed


# ---------------------------------------------------------------- subcommands


def cmd_gen_data(args) -> int:
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    seed = _resolve_seed(args)
    out = Path(args.out)
    cfg = OptimizerConfig(args.iters, args.lr, args.adam_beta1, args.adam_beta2, args.adam_eps)

    def progress(rec):
        if (rec.index + 1) % 10 == 0 or rec.index + 1 == args.count:
            _say(f"[gen-data] {rec.index + 1}/{args.count} n={rec.graph.n} "
                 f"E={rec.best_energy:.4f} ground={rec.ground_energy}")

    corpus = dataset.generate_corpus(
        args.count, (args.n_min, args.n_max), (args.p_min, args.p_max), cfg, seed,
        args.starts, out=out / CORPUS_FILE, workers=args.workers, progress=progress,
    )
    close = sum(r.best_energy <= 0.95 * r.ground_energy for r in corpus.records)
    print(json.dumps({
        "corpus": str(out / CORPUS_FILE),
        "manifest": str(dataset.manifest_path(out / CORPUS_FILE)),
        "records": len(corpus.records),
        "master_seed": seed,
        "within_5pct_of_ground": close / len(corpus.records),
    }, indent=2))
    return EXIT_OK


def cmd_train(args) -> int:
    seed = _resolve_seed(args)
    corpus = dataset.load_corpus(args.corpus)
    schedule = ddpm.build_schedule(args.steps, args.beta_start, args.beta_end)
    cfg = ddpm.TrainConfig(args.epochs, args.batch_size, args.lr, seed, args.hidden, args.ema_decay)
    model, history = ddpm.train(corpus.normalized(), schedule, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ddpm.save_checkpoint(model, schedule, out / CHECKPOINT_FILE)
    with open(out / LOSS_FILE, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "mean_loss"])
        for epoch, loss in enumerate(history, start=1):
            w.writerow([epoch, loss])
    _say(f"[train] {len(history)} epochs, final loss {history[-1]:.5f}")
    print(json.dumps({"checkpoint": str(out / CHECKPOINT_FILE), "loss_csv": str(out / LOSS_FILE),
                      "seed": seed, "final_loss": history[-1]}, indent=2))
    return EXIT_OK


def cmd_sample(args) -> int:
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    seed = _resolve_seed(args)
    model, schedule = ddpm.load_checkpoint(args.checkpoint)
    x = ddpm.sample(model, schedule, args.count, seed)
    if not args.normalized:
        x = dataset.denormalize_params(x)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / SAMPLES_FILE, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["gamma1", "gamma2", "gamma3", "beta1", "beta2", "beta3"])
        w.writerows(x.tolist())
    print(json.dumps({"samples": str(out / SAMPLES_FILE), "count": args.count, "seed": seed}))
    return EXIT_OK


def cmd_eval(args) -> int:
    seed = _resolve_seed(args)
    model, schedule = ddpm.load_checkpoint(args.checkpoint)
    if args.suite == "large":
        try:
            n_values = tuple(int(v) for v in args.large_sizes.split(","))
        except ValueError as exc:
            raise UsageError(f"--large-sizes: {exc}") from exc
        prefix = "fig8"
    else:
        n_values, prefix = None, "fig6"
    cfg = EvalConfig(
        count=args.count, n_range=(args.n_min, args.n_max), p_range=(args.p_min, args.p_max),
        n_values=n_values, samples_per_arm=args.samples_per_arm, refine_steps=args.refine_steps,
        learning_rate=args.lr, seed=seed, self_compare=args.self_compare,
        trace_instances=args.trace_instances,
    )

    def progress(r):
        ratio = "undefined" if r.ratio is None else f"{r.ratio:.3f}"
        _say(f"[eval] {r.index + 1}/{cfg.num_instances} n={r.graph.n} ground={r.ground_energy} "
             f"ddpm={r.best_energy_ddpm:.4f} random={r.best_energy_random:.4f} ratio={ratio}")

    report = run_eval(model, schedule, cfg, progress)
    paths = report.write(args.out, prefix)
    print(json.dumps({
        "files": {k: str(v) for k, v in paths.items()},
        "mean_ratio": report.mean_ratio(),
        "mean_ratio_by_size": {str(k): v for k, v in report.mean_ratio_by_size().items()},
        "bound_violations": report.bound_violations(),
    }, indent=2))
    return EXIT_OK


def cmd_oracle(args) -> int:
    if args.graph is None:
        raise UsageError("oracle needs --graph FILE")
    try:
        text = Path(args.graph).read_text(encoding="utf-8")
    except OSError as exc:
        raise PersistenceError(f"cannot read {args.graph}: {exc}") from exc
    try:
        d = json.loads(text)
        g = Graph.from_edges(int(d["n"]), d["edges"])
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParseError(f"{args.graph}: expected {{\"n\": int, \"edges\": [[i, j], ...]}}") from exc
    res = brute_force_maxcut(g)
    doc = {"n": g.n, "num_edges": g.num_edges, "max_cut": res.max_cut_value,
           "witness": "".join(map(str, res.witness)), "ground_energy": res.ground_energy}
    text = json.dumps(doc, indent=2)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "oracle.json").write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


# ---------------------------------------------------------------- parser

_EPILOGS = {
    "train": "Writes model.ckpt.json and loss.csv with columns: epoch, mean_loss.",
    "sample": "Writes samples.csv with columns: gamma1, gamma2, gamma3, beta1, beta2, beta3 "
              "(radians in [-pi, pi), or model space with --normalized).",
    "eval": ("Writes report.json plus, for --suite standard, fig6_instances.csv and "
             "fig7_convergence.csv (fig8_*.csv for --suite large). Instance columns: "
             + ", ".join(INSTANCE_COLUMNS) + ". Convergence columns: "
             + ", ".join(CONVERGENCE_COLUMNS) + ". ratio = best_energy_ddpm / best_energy_random, "
             "'undefined' unless both are negative."),
    "gen-data": "Writes corpus.jsonl (one record per line) and corpus.manifest.json; reruns resume.",
    "oracle": "Prints max cut, one optimal assignment (bit i = node i) and the ground energy.",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diffqaoa", description=__doc__.splitlines()[0])
    parser.add_argument("--print-config", action="store_true", help="dump all defaults as JSON and exit")
    sub = parser.add_subparsers(dest="command")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="RNG seed (random if omitted)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--config", help="JSON file overriding defaults")
    common.add_argument("--print-config", action="store_true", default=argparse.SUPPRESS,
                        help="dump all defaults as JSON and exit")

    p = sub.add_parser("gen-data", parents=[common], help="mine the training corpus",
                       epilog=_EPILOGS["gen-data"])
    p.add_argument("--count", type=int)
    p.add_argument("--n-min", type=int)
    p.add_argument("--n-max", type=int)
    p.add_argument("--p-min", type=float)
    p.add_argument("--p-max", type=float)
    p.add_argument("--starts", type=int, help="random restarts per graph")
    p.add_argument("--iters", type=int, help="Adam iterations per restart")
    p.add_argument("--lr", type=float)
    p.add_argument("--adam-beta1", type=float)
    p.add_argument("--adam-beta2", type=float)
    p.add_argument("--adam-eps", type=float)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", parents=[common], help="train the diffusion model",
                       epilog=_EPILOGS["train"])
    p.add_argument("--corpus")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--steps", type=int, help="diffusion steps T")
    p.add_argument("--beta-start", type=float)
    p.add_argument("--beta-end", type=float)
    p.add_argument("--hidden", type=int)
    p.add_argument("--ema-decay", type=float)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", parents=[common], help="draw initial angles from a checkpoint",
                       epilog=_EPILOGS["sample"])
    p.add_argument("--checkpoint")
    p.add_argument("--count", type=int)
    p.add_argument("--normalized", action="store_true", default=None)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", parents=[common], help="diffusion vs random initialization",
                       epilog=_EPILOGS["eval"])
    p.add_argument("--checkpoint")
    p.add_argument("--suite", choices=["standard", "large"])
    p.add_argument("--count", type=int, help="test graphs (standard suite)")
    p.add_argument("--n-min", type=int)
    p.add_argument("--n-max", type=int)
    p.add_argument("--p-min", type=float)
    p.add_argument("--p-max", type=float)
    p.add_argument("--large-sizes", help="comma-separated node counts (large suite)")
    p.add_argument("--samples-per-arm", type=int)
    p.add_argument("--refine-steps", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--trace-instances", type=int)
    p.add_argument("--self-compare", action="store_true", default=None,
                   help="reuse the random arm's candidates in the diffusion arm (ratios are 1)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("oracle", parents=[common], help="exact Max-Cut of a graph file",
                       epilog=_EPILOGS["oracle"])
    p.add_argument("--graph", help='JSON file {"n": int, "edges": [[i, j], ...]}')
    p.set_defaults(func=cmd_oracle)
    return parser


def _apply_defaults(args, command: str) -> None:
    merged = dict(DEFAULTS[command])
    if args.config:
        try:
            overrides = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise PersistenceError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config} is not valid JSON: {exc}") from exc
        if command in overrides and isinstance(overrides[command], dict):
            overrides = overrides[command]
        for key, value in overrides.items():
            key = key.replace("-", "_")
            if key == "seed":
                if args.seed is None:
                    args.seed = value
                continue
            if key not in merged:
                raise UsageError(f"unknown config key {key!r} for {command}")
            merged[key] = value
    for key, value in merged.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_config:
        print(json.dumps(DEFAULTS, indent=2))
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        _apply_defaults(args, args.command)
        return args.func(args)
    except (UsageError, CapacityError, ParameterError) as exc:
        _say(f"error: {exc}")
        return EXIT_USAGE
    except (DatasetError, OSError) as exc:
        _say(f"error: {exc}")
        return EXIT_IO
    except TrainingDivergedError as exc:
        _say(f"error: {exc}")
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        _say(f"internal error: {type(exc).__name__}: {exc}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
