"""Command line entry point: ``uncertain-batch {train,experiment,inspect,validate-config}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
"""

import argparse
import logging
import os
import sys

from .config import ExperimentConfig, config_to_text, load_config, validate_config
from .data import load_dataset
from .exceptions import ConfigError, DimensionError, DomainError, NumericError, ParseError
from .harness import _cell_dir, fold_plan, run_experiment, run_training, write_epoch_csv

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

logger = logging.getLogger("uncertain_batch")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="uncertain-batch",
        description="Multi-label MLP training with uncertainty-based mini-batch selection.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--dataset", help="dataset path (.mll)")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--selector", help="selector name, or a comma-separated list")
    common.add_argument("--jobs", type=int)
    common.add_argument("--epochs", type=int)
    common.add_argument("--dump", help="comma-separated subset of U,C,w,P")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    train = sub.add_parser("train", parents=[common], help="train one selector on one fold")
    train.add_argument("--fold", type=int, default=0)
    sub.add_parser("experiment", parents=[common], help="cross-validated selector comparison")
    insp = sub.add_parser("inspect", parents=[common], help="train one fold and dump U/C/w/P per epoch")
    insp.add_argument("--fold", type=int, default=0)
    sub.add_parser("validate-config", parents=[common], help="check a config and print it resolved")
    return parser


def resolve_config(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    pairs = []
    for flag, key in (("dataset", "dataset"), ("seed", "seed"), ("out", "out"),
                      ("selector", "selectors"), ("jobs", "jobs"), ("epochs", "epochs"),
                      ("dump", "dump")):
        v = getattr(args, flag)
        if v is not None:
            pairs.append((key, str(v)))
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        pairs.append((key, value))
    return cfg.with_overrides(pairs)


def _single_run(cfg, fold, dump):
    if fold not in range(cfg.k_folds):
        raise ConfigError(f"fold {fold} outside [0, {cfg.k_folds})")
    ds = load_dataset(cfg.dataset)
    plan = fold_plan(cfg, ds)
    selector = cfg.selectors[0]
    s0, window, lam = cfg.grid()[0]
    out = _cell_dir(cfg, s0, window, lam)
    os.makedirs(out, exist_ok=True)
    dump_dir = os.path.join(out, f"dumps_{selector}_{fold}") if dump else None
    res = run_training(cfg, ds, plan, fold, selector, s0, window, lam, dump_dir)
    write_epoch_csv(res.records, os.path.join(out, f"epochs_{selector}_{fold}.csv"))
    print(f"selector={selector} fold={fold} best_epoch={res.best_epoch}")
    for k, v in res.test.items():
        print(f"test_{k}={v:.6f}")
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(args)
        if args.command == "inspect" and not cfg.dump:
            cfg.dump = ["U", "C", "w", "P"]
        validate_config(cfg)
        if args.command == "validate-config":
            sys.stdout.write(config_to_text(cfg))
            return EXIT_OK
        if cfg.dataset is None:
            raise ConfigError("no dataset given (config key 'dataset' or --dataset)")
        if args.command in ("train", "inspect"):
            return _single_run(cfg, args.fold, dump=args.command == "inspect")
        rows, results = run_experiment(cfg)
        for row in rows:
            if row["fold"] == "mean":
                print(f"{row['selector']:>8} s0={row['s0']} T={row['window']} "
                      f"lambda1={row['lambda1']}: macro_auc={row['macro_auc']} "
                      f"ranking_loss={row['ranking_loss']} hamming_loss={row['hamming_loss']}")
        if any(r.status.startswith("numeric") for r in results):
            return EXIT_NUMERIC
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, DimensionError, DomainError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
