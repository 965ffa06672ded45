"""Command line: ``spkg {clean,train,eval,calibrate,bench}``.

Any subcommand accepts ``--config FILE`` holding ``key=value`` lines whose
keys are flag names (``neg-ratio=10``); flags given on the command line
override the file. Exit codes: 0 success, 1 usage or configuration error,
2 data error, 3 numeric failure.
"""

import argparse
import logging
import os
import sys

import numpy as np

from . import data as kgdata
from .bench import benchmark, write_bench_csv
from .errors import ConfigError, DataError, NumericalError
from .evaluation import (
    FilterIndex,
    calibration_metrics,
    format_rows,
    platt_apply,
    platt_fit,
    probability_histogram,
    ranking_metrics,
    triple_scores,
    write_probability_csv,
    write_report_csv,
)
from .models import ModelConfig, load_checkpoint, save_checkpoint, vocab_path
from .objectives import NEG, SP, ObjectiveConfig
from .synthetic import random_kg
from .trainer import VALID_MRR, VALID_NLL, TrainConfig, train, write_history_csv

logger = logging.getLogger("spkg")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
BOOL_FLAGS = {"labeled", "filtered", "constrain"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def read_config_file(path):
    """Turn ``key=value`` lines into argv tokens."""
    tokens = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip().replace("_", "-"), value.strip()
            if not sep or not key:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            if key in BOOL_FLAGS:
                if value.lower() in ("1", "true", "yes", "on"):
                    tokens.append(f"--{key}")
                elif value.lower() in ("0", "false", "no", "off"):
                    if key == "constrain":
                        tokens.append("--no-constrain")
                else:
                    raise ConfigError(f"{path}:{lineno}: {key} expects true or false")
            else:
                tokens += [f"--{key}", value]
    return tokens


def _expand_config(argv):
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise ConfigError("--config needs a file")
    path = argv[i + 1]
    rest = argv[:i] + argv[i + 2:]
    cmd = next((j for j, tok in enumerate(rest) if tok in COMMANDS), None)
    if cmd is None:
        raise ConfigError("--config must follow a subcommand")
    return rest[:cmd + 1] + read_config_file(path) + rest[cmd + 1:]


def _add_data_args(p, labeled=True):
    p.add_argument("--data-dir", help="directory with train.txt, valid.txt and test.txt")
    p.add_argument("--train", help="train split (overrides --data-dir)")
    p.add_argument("--valid", help="validation split (overrides --data-dir)")
    p.add_argument("--test", help="test split (overrides --data-dir)")
    if labeled:
        p.add_argument("--labeled", action="store_true",
                       help="valid/test files carry a fourth 1/-1 label column")


def _split_paths(args):
    defaults = kgdata.split_paths(args.data_dir) if args.data_dir else (None, None, None)
    paths = [getattr(args, name) or default for name, default in zip(("train", "valid", "test"), defaults)]
    for name, path in zip(("train", "valid", "test"), paths):
        if path is None:
            raise ConfigError(f"no {name} split given (use --data-dir or --{name})")
        if not os.path.isfile(path) or not os.access(path, os.R_OK):
            raise DataError(f"cannot read {name} split {path}")
    return paths


def _ensure_out_dir(path):
    os.makedirs(path, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise DataError(f"output directory {path} is not writable")
    return path


def build_parser():
    parser = _Parser(prog="spkg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("clean", help="drop valid/test triples with entities unseen in train")
    _add_data_args(p)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("train", help="train a model and write the best checkpoint")
    _add_data_args(p)
    p.add_argument("--model", choices=("distmult", "simple"), default="distmult")
    p.add_argument("--objective", choices=(NEG, SP), default=SP)
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--psi", type=float, default=0.0)
    p.add_argument("--cap-I", dest="cap", type=float, default=5.0)
    p.add_argument("--p", type=int, choices=(1, 2), default=None)
    p.add_argument("--neg-ratio", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=100)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--l2", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sp-scope", choices=("batch", "global"), default=None)
    p.add_argument("--selection", choices=(VALID_MRR, VALID_NLL), default=None)
    p.add_argument("--eval-every", type=int, default=1)
    p.add_argument("--constrain", action=argparse.BooleanOptionalAction, default=None,
                   help="tanh-cap the scores (default: on for sp, off for neg)")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("eval", help="ranking and/or calibration metrics of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    _add_data_args(p)
    p.add_argument("--metrics", choices=("ranking", "calibration", "both"), default="ranking")
    p.add_argument("--filtered", action="store_true",
                   help="also filter known triples (train, valid, test) when ranking")
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("calibrate", help="Platt-scale a checkpoint on labeled validation data")
    p.add_argument("--checkpoint", required=True)
    _add_data_args(p, labeled=False)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("bench", help="epoch time, negative sampling vs regularizer")
    _add_data_args(p, labeled=False)
    p.add_argument("--synthetic-entities", type=int, default=None)
    p.add_argument("--synthetic-triples", type=int, default=None)
    p.add_argument("--synthetic-relations", type=int, default=10)
    p.add_argument("--model", choices=("distmult", "simple"), default="simple")
    p.add_argument("--neg-ratios", default="1,10")
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=100)
    p.add_argument("--epochs-per-point", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="timing CSV path")
    return parser


# commands -------------------------------------------------------------------------------------


def cmd_clean(args):
    train_path, valid_path, test_path = _split_paths(args)
    out = _ensure_out_dir(args.out_dir)
    train = kgdata.read_records(train_path)
    if not train:
        raise DataError(f"{train_path}: training split is empty")
    valid = kgdata.read_records(valid_path, labeled=args.labeled)
    test = kgdata.read_records(test_path, labeled=args.labeled)
    _, _, report = kgdata.clean_dataset(train, valid, test)
    for path, records, name in ((valid_path, valid, "valid"), (test_path, test, "test")):
        mask = kgdata.clean_mask(train, records)
        with open(path, encoding="utf-8", newline="") as fh:
            lines = [line for line in fh if line.strip()]
        with open(os.path.join(out, f"{name}.txt"), "w", encoding="utf-8", newline="") as fh:
            fh.writelines(line for line, keep in zip(lines, mask) if keep)
    with open(train_path, "rb") as src, open(os.path.join(out, "train.txt"), "wb") as dst:
        dst.write(src.read())
    report.write_csv(os.path.join(out, "clean_report.csv"))
    summary = report.summary()
    with open(os.path.join(out, "clean_report.txt"), "w", encoding="utf-8") as fh:
        fh.write(summary + "\n")
    print(summary)
    return EXIT_OK


def train_config_from_args(args):
    """Validate flag combinations and build a :class:`TrainConfig`."""
    if args.objective == SP:
        if args.neg_ratio is not None:
            raise ConfigError("--neg-ratio only applies to --objective neg")
    else:
        for flag, value in (("--lambda", args.lam), ("--p", args.p), ("--sp-scope", args.sp_scope)):
            if value is not None:
                raise ConfigError(f"{flag} only applies to --objective sp")
    selection = args.selection or (VALID_NLL if args.labeled else VALID_MRR)
    if selection == VALID_NLL and not args.labeled:
        raise ConfigError("--selection valid_nll needs --labeled validation data")
    constrained = args.constrain if args.constrain is not None else args.objective == SP
    objective = ObjectiveConfig(
        mode=args.objective,
        neg_ratio=args.neg_ratio if args.neg_ratio is not None else 1,
        lam=args.lam if args.lam is not None else 0.1,
        p=args.p if args.p is not None else 1,
        scope=args.sp_scope or "batch",
    )
    model = ModelConfig(kind=args.model, dim=args.dim, cap=args.cap, psi=args.psi, seed=args.seed,
                        constrained=constrained)
    return TrainConfig(lr=args.lr, l2=args.l2, dropout=args.dropout, batch_size=args.batch_size,
                       epochs=args.epochs, seed=args.seed, objective=objective, model=model,
                       selection_metric=selection, eval_every=args.eval_every)


def cmd_train(args):
    config = train_config_from_args(args)
    paths = _split_paths(args)
    out = _ensure_out_dir(args.out_dir)
    dataset, skipped = kgdata.load_dataset(*paths, labeled=args.labeled)
    if any(skipped.values()):
        logger.warning("skipped records with unseen names: %s", skipped)
    ckpt = os.path.join(out, "model.ckpt")
    try:
        result = train(dataset, config)
    except NumericalError as exc:
        if exc.best_model is not None:
            save_checkpoint(exc.best_model, ckpt, dataset.vocabulary)
        raise
    save_checkpoint(result.best_model, ckpt, dataset.vocabulary)
    write_history_csv(os.path.join(out, "history.csv"), result.history)
    print(f"best epoch {result.best_epoch}; checkpoint {ckpt}")
    return EXIT_OK


def _load_model_and_data(args, labeled):
    if not os.path.isfile(args.checkpoint):
        raise DataError(f"cannot read checkpoint {args.checkpoint}")
    paths = _split_paths(args)
    model = load_checkpoint(args.checkpoint)
    vpath = vocab_path(args.checkpoint)
    if os.path.isfile(vpath):
        vocab = kgdata.Vocabulary.load(vpath)
    else:
        vocab = kgdata.build_vocabulary(kgdata.read_records(paths[0]))
    if (vocab.n_entities, vocab.n_relations) != (model.n_entities, model.n_relations):
        raise DataError("checkpoint and vocabulary sizes disagree")
    splits = []
    for path, lab in zip(paths, (False, labeled, labeled)):
        splits.append(kgdata.load_split(path, vocab, labeled=lab))
    dataset = kgdata.Dataset(vocab, splits[0].triples, splits[1].triples, splits[2].triples,
                             splits[1].labels, splits[2].labels)
    return model, dataset


def cmd_eval(args):
    want_rank = args.metrics in ("ranking", "both")
    want_cal = args.metrics in ("calibration", "both")
    if want_cal and not args.labeled:
        raise ConfigError("calibration metrics need a labeled test split (--labeled)")
    model, dataset = _load_model_and_data(args, labeled=args.labeled)
    out = _ensure_out_dir(args.out_dir)
    reports = []
    if want_rank:
        test = dataset.positives("test")
        fi = FilterIndex(dataset.known_triples()) if args.filtered else None
        reports.append(list(ranking_metrics(model, test, fi).rows()))
    if want_cal:
        if len(dataset.test) == 0:
            raise DataError("test split is empty")
        scores = triple_scores(model, dataset.test)
        cal = calibration_metrics(scores, dataset.test_labels, n_bins=args.bins)
        reports.append(list(cal.rows()))
        reports.append([("histogram", f"bin_{i}", c) for i, c in enumerate(cal.histogram)])
        _, probs = probability_histogram(scores, args.bins)
        write_probability_csv(os.path.join(out, "probabilities.csv"), probs, dataset.test_labels)
    write_report_csv(os.path.join(out, "eval_report.csv"), *reports)
    text = format_rows(*reports)
    with open(os.path.join(out, "eval_report.txt"), "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
    print(text)
    return EXIT_OK


def cmd_calibrate(args):
    args.labeled = True
    model, dataset = _load_model_and_data(args, labeled=True)
    if len(dataset.valid) == 0 or len(dataset.test) == 0:
        raise DataError("calibration needs non-empty labeled validation and test splits")
    valid_scores = triple_scores(model, dataset.valid)
    if len(np.unique(dataset.valid_labels)) < 2:
        raise DataError("validation split must contain both positive and negative labels")
    out = _ensure_out_dir(args.out_dir)
    params = platt_fit(valid_scores, dataset.valid_labels)
    test_scores = triple_scores(model, dataset.test)
    pre = calibration_metrics(test_scores, dataset.test_labels)
    calibrated = params.a * test_scores + params.b
    post = calibration_metrics(calibrated, dataset.test_labels)
    reports = [
        [("platt", "a", params.a), ("platt", "b", params.b), ("platt", "converged", int(params.converged))],
        list(pre.rows("pre_calibration")),
        list(post.rows("post_calibration")),
    ]
    write_report_csv(os.path.join(out, "calibration_report.csv"), *reports)
    write_probability_csv(os.path.join(out, "calibrated_probabilities.csv"),
                          platt_apply(params, test_scores), dataset.test_labels)
    text = format_rows(*reports)
    with open(os.path.join(out, "calibration_report.txt"), "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
    print(text)
    return EXIT_OK


def cmd_bench(args):
    try:
        ratios = [int(x) for x in args.neg_ratios.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad --neg-ratios {args.neg_ratios!r}") from None
    if not ratios or min(ratios) < 1:
        raise ConfigError("--neg-ratios needs positive integers")
    if args.synthetic_entities is not None:
        if args.synthetic_triples is None:
            raise ConfigError("--synthetic-entities needs --synthetic-triples")
        dataset = random_kg(args.synthetic_entities, args.synthetic_triples,
                            n_relations=args.synthetic_relations, seed=args.seed)
    else:
        dataset, _ = kgdata.load_dataset(*_split_paths(args))
    parent = os.path.dirname(os.path.abspath(args.out))
    _ensure_out_dir(parent)
    mcfg = ModelConfig(kind=args.model, dim=args.dim, seed=args.seed)
    rows = benchmark(dataset, mcfg, ratios, args.batch_size, args.epochs_per_point, args.seed)
    write_bench_csv(args.out, rows)
    for r in rows:
        print(f"n={r.neg_ratio}: neg {r.neg_epoch_ms:.1f} ms (sampling {r.neg_sampling_pct:.1f}%), "
              f"sp {r.sp_epoch_ms:.1f} ms, reduction {r.reduction_pct:.1f}%")
    return EXIT_OK


COMMANDS = {"clean": cmd_clean, "train": cmd_train, "eval": cmd_eval,
            "calibrate": cmd_calibrate, "bench": cmd_bench}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(_expand_config(argv))
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
