"""Command line interface: ``afsl {stats,synth,run,sweep,report,trainer-synthetic}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .datamodel import DatasetError, load_dataset, save_dataset, uniformity
from .metrics import format_percent


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.replace(",", " ").split()]


def _per_class(text: str | None, classes: int, default: int) -> tuple[int, ...]:
    if text is None:
        return (default,) * classes
    vals = _ints(text)
    if len(vals) == 1:
        vals = vals * classes
    if len(vals) != classes:
        raise SystemExit(f"expected 1 or {classes} counts, got {len(vals)}")
    return tuple(vals)


def cmd_stats(args) -> int:
    ds = load_dataset(args.dataset)
    ls = ds.label_set
    print(f"labels: {', '.join(ls.labels)}")
    print(f"multi_label: {'yes' if ls.multi_label else 'no'}")
    print(f"|L|: {len(ls)}")
    for split, n in ds.sizes().items():
        print(f"{split}: {n}")
    u_all = uniformity([s.gold_labels for s in ds.all_samples()], ls)
    u_train = uniformity([s.gold_labels for s in ds.train], ls)
    print(f"U%: {format_percent(u_all.uniformity)}")
    print(f"U% (train): {format_percent(u_train.uniformity)}")
    return 0


def cmd_synth(args) -> int:
    from .synthetic import MixtureSpec, generate

    spec = MixtureSpec(args.classes, args.dim,
                       _per_class(args.counts, args.classes, 500),
                       _per_class(args.val_counts, args.classes, 25),
                       _per_class(args.test_counts, args.classes, 250),
                       sigma=args.sigma, separation=args.sep, seed=args.seed)
    save_dataset(generate(spec), args.output)
    print(args.output)
    return 0


def _load_config(args):
    from .orchestrator import ExperimentConfig

    cfg = ExperimentConfig.from_file(args.config)
    if getattr(args, "output_dir", None):
        cfg.output_dir = args.output_dir
    if getattr(args, "seeds", None):
        cfg.seeds = _ints(args.seeds)
    return cfg.validate()


def cmd_run(args) -> int:
    from .orchestrator import Annotator, run_experiment
    from .report import write_reports, write_table

    cfg = _load_config(args)
    dataset = load_dataset(cfg.dataset)
    annotator = Annotator(dataset, interactive=True) if args.interactive else None
    record = run_experiment(cfg, dataset, annotator=annotator)
    out = Path(cfg.output_dir) / cfg.strategy_label
    path = record.save(out / "record.json")
    write_reports(record, out)
    write_table([record], sys.stdout)
    print(f"record: {path}", file=sys.stderr)
    return 0


def cmd_sweep(args) -> int:
    from .orchestrator import alpha_sweep
    from .report import write_table

    cfg = _load_config(args)
    records = alpha_sweep(cfg, _ints(args.alpha))
    for a, rec in records.items():
        rec.save(Path(cfg.output_dir) / rec.config["name"] / "record.json")
    out = Path(cfg.output_dir) / "alpha_sweep.csv"
    with out.open("w", encoding="utf-8") as fh:
        write_table(records.values(), fh, args.metric)
    write_table(records.values(), sys.stdout, args.metric)
    print(f"sweep table: {out}", file=sys.stderr)
    return 0


def cmd_report(args) -> int:
    from .orchestrator import ExperimentRecord
    from .report import write_reports, write_table

    records = [ExperimentRecord.load(p) for p in args.records]
    if args.out_dir:
        for p, rec in zip(args.records, records):
            write_reports(rec, Path(args.out_dir) / Path(p).parent.name, args.metric)
    write_table(records, sys.stdout, args.metric)
    return 0


def cmd_trainer_synthetic(args) -> int:
    from .trainers import synthetic_worker

    synthetic_worker(args.request)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="afsl", description=__doc__)
    p.add_argument("--version", action="version", version=f"afsl {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("stats", help="label set, split sizes and uniformity of a dataset")
    s.add_argument("dataset")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("synth", help="write a Gaussian-mixture dataset")
    s.add_argument("--classes", type=int, default=4)
    s.add_argument("--dim", type=int, default=2)
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--sep", type=float, default=6.0, help="radius of the circle of class means")
    s.add_argument("--counts", help="train samples per class (one value or one per class)")
    s.add_argument("--val-counts")
    s.add_argument("--test-counts")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("run", help="run an experiment from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--output-dir")
    s.add_argument("--seeds", help="override seeds, e.g. 0,1,2")
    s.add_argument("--interactive", action="store_true", help="prompt for labels instead of using gold")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="UnRep alpha sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--alpha", default="1,2,5,10,20,50")
    s.add_argument("--output-dir")
    s.add_argument("--seeds")
    s.add_argument("--metric", default="micro_f1", choices=("micro_f1", "macro_f1"))
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("report", help="CSV table (strategy, K, mean, stddev) from records")
    s.add_argument("records", nargs="+")
    s.add_argument("--metric", default="micro_f1", choices=("micro_f1", "macro_f1"))
    s.add_argument("--out-dir", help="also write table/band CSVs and a JSON summary here")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("trainer-synthetic", help="answer one protocol request with the synthetic trainer")
    s.add_argument("request")
    s.set_defaults(func=cmd_trainer_synthetic)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (DatasetError, ValueError, RuntimeError) as exc:
        print(f"afsl: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
