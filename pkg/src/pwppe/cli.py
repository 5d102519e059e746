"""Command line entry point: ``pwppe <subcommand> ...``.

Exit codes: 0 ok, 2 configuration, 3 data/shape, 4 numerical (divergence,
degenerate fit), 5 I/O.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from . import pipeline
from .config import ExperimentConfig, load_config, parse_config
from .errors import PWPPEError

log = logging.getLogger("pwppe")


def _experiment(args):
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    for override in getattr(args, "set", None) or []:
        cfg = parse_config(cfg.dumps() + override + "\n", "--set")
    return cfg.validate()


def _train_config(args):
    cfg = _experiment(args).train
    changes = {k: v for k, v in {
        "iterations": args.iterations, "learning_rate": args.learning_rate,
        "batch_size": args.batch_size, "seed": args.seed, "optimizer": args.optimizer,
        "target_mse": args.target_mse,
    }.items() if v is not None}
    return replace(cfg, **changes).validate()


def cmd_synth(args):
    cfg = _experiment(args)
    if args.kind:
        cfg.synth_kind = args.kind
    if args.seed is not None:
        cfg.synth_seed = args.seed
    pipeline.synth(cfg, args.out)


def cmd_truth(args):
    pipeline.truth(args.stack, args.out)


def cmd_build(args):
    pipeline.build(args.stack, args.truth, args.mode, args.fraction, args.seed, args.out,
                   args.train_ratio, write_test=not args.no_test)


def cmd_train(args):
    pipeline.train_stage(args.dataset, _train_config(args), args.out, figures=not args.no_figures)


def cmd_solve(args):
    pipeline.solve(args.stack, args.weights, args.out, args.method, args.selftest_threshold)


def cmd_eval(args):
    cfg = _experiment(args)
    bands = tuple(float(b) for b in args.bands.split(",")) if args.bands else cfg.eval_bands
    variations = cfg.variations if args.sweep else None
    pipeline.evaluate(args.stack, args.truth, args.weights, args.out, args.holdout, args.row,
                      bands, variations, cfg.eval_seed, figures=not args.no_figures)


def cmd_repro(args):
    cfg = _experiment(args)
    results = pipeline.repro(cfg, args.out, figures=not args.no_figures)
    for name, ls, pp in results:
        print(f"{name:18s} PWLS mse {ls.mse:.4e}  PWPPE mse {pp.mse:.4e}  "
              f"PWPPE rms {pp.rms:.4f} rad")


def cmd_config(args):
    sys.stdout.write(_experiment(args).dumps())


def _add_config(p):
    p.add_argument("--config", help="key=value experiment config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one config key (repeatable)")


def build_parser():
    parser = argparse.ArgumentParser(prog="pwppe", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic fringe stack directory")
    _add_config(p)
    p.add_argument("--kind", choices=["binary", "sinusoidal"], help="override synth.kind")
    p.add_argument("--seed", type=int, help="override synth.seed (noise)")
    p.add_argument("--out", required=True, help="output stack directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("truth", help="plane-fitted ground-truth phase of a stack")
    p.add_argument("--stack", required=True, help="stack directory")
    p.add_argument("--out", required=True, help="output .pmap path")
    p.set_defaults(func=cmd_truth)

    p = sub.add_parser("build", help="build train/test datasets")
    p.add_argument("--stack", required=True, help="stack directory")
    p.add_argument("--truth", required=True, help="ground-truth .pmap")
    p.add_argument("--mode", choices=["plain", "augmented", "accelerated"], default="augmented",
                   help="input arrangement: as captured, all 12 shifted/reversed copies, "
                        "or rotated so the brightest sample leads")
    p.add_argument("--fraction", type=float, default=0.01, help="training sample fraction")
    p.add_argument("--seed", type=int, default=0, help="shuffle/split seed")
    p.add_argument("--train-ratio", type=float, default=0.5, help="share of pixels used for training")
    p.add_argument("--no-test", action="store_true", help="skip writing test.ds")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("train", help="train the network on a dataset file")
    _add_config(p)
    p.add_argument("--dataset", required=True, help="train.ds path")
    p.add_argument("--iterations", type=int, help="passes over the training set")
    p.add_argument("--learning-rate", type=float, help="optimizer step size")
    p.add_argument("--batch-size", type=int, help="samples per gradient step")
    p.add_argument("--seed", type=int, help="initialization and shuffling seed")
    p.add_argument("--optimizer", choices=["adam", "momentum", "sgd"], help="update rule")
    p.add_argument("--target-mse", type=float, help="early-stop threshold")
    p.add_argument("--no-figures", action="store_true", help="skip loss.png")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("solve", help="phase of a stack by PWPPE (default) or PWLS")
    p.add_argument("--stack", required=True, help="stack directory")
    p.add_argument("--weights", help="weight file (PWPPE only)")
    p.add_argument("--method", choices=["pwppe", "pwls"], default="pwppe", help="phase solver")
    p.add_argument("--selftest-threshold", type=float,
                   help="mask pixels with |self-test - 1| above this")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("eval", help="write the PWLS/PWPPE report set")
    _add_config(p)
    p.add_argument("--stack", required=True, help="stack directory")
    p.add_argument("--truth", required=True, help="ground-truth .pmap")
    p.add_argument("--weights", required=True, help="weight file")
    p.add_argument("--holdout", help="8-bit mask PGM restricting the metrics")
    p.add_argument("--row", type=int, help="row for the profile (default: middle)")
    p.add_argument("--bands", help="comma-separated self-test bands")
    p.add_argument("--sweep", action="store_true", help="also run the generalization sweep")
    p.add_argument("--no-figures", action="store_true", help="write CSV and PGM only")
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("repro", help="synth, truth, build, train and eval in one go")
    _add_config(p)
    p.add_argument("--no-figures", action="store_true", help="write CSV and PGM only")
    p.add_argument("--out", required=True, help="run directory")
    p.set_defaults(func=cmd_repro)

    p = sub.add_parser("config", help="print the effective experiment config")
    _add_config(p)
    p.set_defaults(func=cmd_config)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except PWPPEError as exc:
        print(f"pwppe {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
