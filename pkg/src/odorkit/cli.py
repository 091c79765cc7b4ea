"""``odorkit`` command line: analyze, featurize, train, eval, gradcheck.

Exit codes: 0 success, 1 validation failure, 2 runtime or numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import analyze, config, dataset, gradcheck
from .featurize import FEATURE_NAMES, featurize_graphs
from .model import CheckpointError, Model, make_batch, load_checkpoint, save_checkpoint
from .numcore import sigmoid
from .train import NonFiniteLoss, fit

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class ValidationFailure(Exception):
    """Bad input detected before work starts; maps to exit code 1."""


def _out_dir(args) -> Path:
    out = Path(args.out_dir or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_clean(path):
    path = Path(path)
    if not path.is_file():
        raise ValidationFailure(f"IoError: cannot read dataset {path}")
    try:
        records = dataset.read_dataset(path)
    except dataset.MalformedCsv as exc:
        raise ValidationFailure(f"MalformedCsv in {path}: {exc}") from exc
    except (OSError, UnicodeDecodeError) as exc:
        raise ValidationFailure(f"IoError: {path}: {exc}") from exc
    return records, dataset.clean_dataset(records)


def _write_csv(path, header, rows):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def cmd_analyze(args) -> int:
    records, cleaned = _load_clean(args.dataset)
    out = _out_dir(args)
    dataset.write_cleaning_report(cleaned, out / "cleaning_report.csv")
    freqs = analyze.descriptor_frequencies(cleaned.kept)
    _write_csv(out / "frequencies.csv", ["label", "count"], freqs)
    dist = analyze.label_count_distribution(cleaned.kept)
    _write_csv(out / "label_counts.csv", ["n_labels", "molecules", "fraction"],
               [(k, n, f"{frac:.6f}") for k, (n, frac) in dist.items()])
    top_k = min(args.top_k, len(freqs))
    co = analyze.co_occurrence(cleaned.kept, top_k)
    _write_csv(out / "cooccurrence.csv", ["label", *co.labels],
               [(name, *map(int, row)) for name, row in zip(co.labels, co.counts)])
    print(f"{len(cleaned.kept)} molecules, {len(freqs)} descriptors "
          f"(rows {len(records)}, kept {len(cleaned.kept)}, dropped {len(cleaned.dropped)})")
    reasons: dict[str, int] = {}
    for d in cleaned.dropped:
        reasons[d.reason] = reasons.get(d.reason, 0) + 1
    for reason, n in sorted(reasons.items()):
        print(f"  dropped {reason}: {n}")
    return EXIT_OK


def cmd_featurize(args) -> int:
    _, cleaned = _load_clean(args.dataset)
    out = _out_dir(args)
    atoms, pooled = featurize_graphs(cleaned.graphs)
    _write_csv(out / "features.csv", ["row", "smiles", *FEATURE_NAMES],
               [(r, rec.smiles, *(repr(float(v)) for v in vec))
                for r, rec, vec in zip(cleaned.kept_rows, cleaned.kept, pooled)])
    if args.atoms:
        rows = []
        for r, mat in zip(cleaned.kept_rows, atoms):
            for k, vec in enumerate(mat):
                rows.append((r, k, *(repr(float(v)) for v in vec)))
        _write_csv(out / "atom_features.csv", ["row", "atom", *FEATURE_NAMES], rows)
    print(f"featurized {len(cleaned.kept)} molecules ({len(cleaned.dropped)} dropped)")
    return EXIT_OK


def _run_config(args) -> config.RunConfig:
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise config.ConfigError([f"--set expects key=value, got {item!r}"])
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.out_dir is not None:
        overrides["paths.out_dir"] = args.out_dir
    if getattr(args, "dataset", None):
        overrides["paths.dataset"] = args.dataset
    return config.load(args.config, overrides)


def cmd_train(args) -> int:
    cfg = _run_config(args)
    if not cfg.dataset:
        raise config.ConfigError(["paths.dataset is required (config file or --dataset)"])
    _, cleaned = _load_clean(cfg.dataset)
    if not cleaned.kept:
        raise ValidationFailure(f"no usable molecules in {cfg.dataset}")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset.write_cleaning_report(cleaned, out / "cleaning_report.csv")

    labels = dataset.label_vocabulary(cleaned.kept)
    Y = dataset.label_matrix(cleaned.kept, labels)
    data = make_batch(cleaned.graphs, Y, with_graph=cfg.model.mode == "graph")
    model = Model.create(cfg.model, labels)
    with (out / "train_log.jsonl").open("w", encoding="utf-8") as fh:
        result = fit(model, data, cfg.train, cfg.loss, seed=cfg.seed, log_file=fh)
    model.params = result.best_params
    ckpt = cfg.checkpoint_path
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, ckpt)
    if result.log:
        best = max(result.log, key=lambda r: r["val_f1"])
        print(f"trained {cfg.train.epochs} epochs on {len(result.train_idx)} molecules; "
              f"best val macro-F1 {best['val_f1']:.4f} at epoch {best['epoch']}")
    else:
        print("epochs=0: wrote initial checkpoint")
    print(f"checkpoint: {ckpt}")
    return EXIT_OK


def cmd_eval(args) -> int:
    ckpt = Path(args.checkpoint)
    if not ckpt.is_file():
        raise ValidationFailure(f"IoError: cannot read checkpoint {ckpt}")
    model = load_checkpoint(ckpt)
    _, cleaned = _load_clean(args.dataset)
    known = set(model.labels)
    unknown = sorted({lab for r in cleaned.kept for lab in r.labels if lab not in known})
    if unknown:
        raise ValidationFailure("label-set mismatch; labels not in checkpoint: " + ", ".join(unknown))
    if not cleaned.kept:
        raise ValidationFailure(f"no usable molecules in {args.dataset}")
    Y = dataset.label_matrix(cleaned.kept, model.labels)
    batch = make_batch(cleaned.graphs, Y, with_graph=model.config.mode == "graph")
    probs = sigmoid(model.predict_logits(batch))
    report = analyze.metrics_report(probs, Y, model.labels).as_dict()
    text = json.dumps(report, indent=2, sort_keys=True)
    out = _out_dir(args)
    (out / "metrics.json").write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    seed = 0 if args.seed is None else args.seed
    rows = gradcheck.run_suite(seed, sigma_prime=args.sigma_prime)
    width = max(len(r.item) for r in rows)
    print(f"{'item':<{width}}  max_rel_err  status")
    for r in rows:
        status = "PASS" if r.passed else "FAIL"
        if r.nudged:
            status += " (nudged)"
        print(f"{r.item:<{width}}  {r.max_rel_err:11.3e}  {status}")
    failed = [r for r in rows if not r.passed]
    print(f"{len(rows) - len(failed)}/{len(rows)} passed (tolerance {gradcheck.TOLERANCE:g})")
    return EXIT_RUNTIME if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value run configuration file")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out-dir", default=None)

    parser = argparse.ArgumentParser(prog="odorkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="clean a dataset and write label statistics")
    p.add_argument("dataset")
    p.add_argument("--top-k", type=int, default=50)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("featurize", parents=[common], help="write pooled (and per-atom) features")
    p.add_argument("dataset")
    p.add_argument("--atoms", action="store_true", help="also write atom_features.csv")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", parents=[common], help="train a model and write a checkpoint")
    p.add_argument("--dataset", default=None)
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="score a checkpoint on a dataset")
    p.add_argument("checkpoint")
    p.add_argument("dataset")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference check of all gradients")
    p.add_argument("--sigma-prime", type=float, default=1.0)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationFailure, config.ConfigError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NonFiniteLoss, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
