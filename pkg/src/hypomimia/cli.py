"""Command line interface.

Subcommands:

- ``gen-data``: generate and persist the synthetic corpora for a config.
- ``run``: execute an experiment config and write its report artifacts.
- ``report``: re-emit tables/figures from a stored results.json... no
  recomputation, only re-rendering of the persisted bundle tables.
- ``selftest``: run the built-in invariant checks.

Exit codes: 0 success, 1 validation/usage error, 2 runtime error.
The environment variable HYPOMIMIA_SEED is the seed fallback when a
config carries none and --seed is not given.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from .experiments import (
    ExportError,
    MissingDatasetError,
    StageError,
    ValidationError,
    export_reports,
    load_config,
    run_experiment,
    verify_config_hash,
)


class _UsageError(Exception):
    def __init__(self, parser, message):
        self.parser = parser
        super().__init__(message)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(self, message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="hypomimia",
                     description="Facial-expression domain-adaptation experiments")
    sub = parser.add_subparsers(dest="command")

    gen = sub.add_parser("gen-data", help="generate and persist synthetic corpora")
    gen.add_argument("--config", required=True)
    gen.add_argument("--out", required=True)
    gen.add_argument("--seed", type=int, default=None)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", default=None)

    rep = sub.add_parser("report", help="re-render reports from a finished run")
    rep.add_argument("--run", required=True, help="run directory with results.json")
    rep.add_argument("--format", default="csv", help="comma list: csv")

    sub.add_parser("selftest", help="run the built-in invariant suite")
    return parser


def _env_seed() -> int | None:
    raw = os.environ.get("HYPOMIMIA_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ValidationError(f"HYPOMIMIA_SEED must be an integer, got {raw!r}")


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        exc.parser.print_usage(sys.stderr)
        return 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        if args.command == "gen-data":
            return _cmd_gen_data(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "report":
            return _cmd_report(args)
        if args.command == "selftest":
            return _cmd_selftest()
    except (ValidationError, MissingDatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (StageError, ExportError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def _resolved_seed(args) -> int | None:
    if getattr(args, "seed", None) is not None:
        return args.seed
    return _env_seed()


def _cmd_gen_data(args) -> int:
    from .synthetic import (
        generate_au_dataset,
        generate_expression_dataset,
        generate_identity_dataset,
        save_au_manifest,
        save_expression_corpus,
    )
    config = load_config(args.config, seed=_resolved_seed(args))
    out = Path(args.out)
    corpus = generate_expression_dataset(
        replace(config.corpus, seed=config.seed))
    save_expression_corpus(corpus, out / "expressions")
    au = generate_au_dataset(replace(config.au, seed=config.seed + 1))
    save_au_manifest(au, out / "au")
    ids = generate_identity_dataset(replace(config.identity, seed=config.seed + 2))
    from .synthetic import write_image
    id_dir = out / "identities" / "images"
    id_dir.mkdir(parents=True, exist_ok=True)
    with open(out / "identities" / "manifest.csv", "w") as fh:
        fh.write("image_path,subject_id\n")
        for s in ids:
            rel = f"images/{s.sample_id}.f64"
            write_image(out / "identities" / rel, s.image)
            fh.write(f"{rel},{s.subject_id}\n")
    print(f"wrote {len(corpus.samples)} expression samples, {len(au)} AU samples, "
          f"{len(ids)} identity samples under {out}")
    return 0


def _cmd_run(args) -> int:
    config = load_config(args.config, seed=_resolved_seed(args), out=args.out)
    config.validate()
    bundle = run_experiment(config)
    written = export_reports(bundle, config.out)
    for row in bundle.rows:
        print(f"{row.model:>18} {row.sequence:>9} {row.kernel:>8} "
              f"acc {row.acc_mean:5.1f} +- {row.acc_std:4.1f}")
    for row in bundle.triclass_rows:
        kappa = "n/a" if row.kappa is None else f"{row.kappa:.3f}"
        print(f"{row.model:>18} {row.sequence:>9} {row.view:>11} "
              f"acc {row.acc_mean:5.1f} +- {row.acc_std:4.1f} kappa {kappa}")
    print(f"{len(written)} artifacts under {config.out}")
    return 0


def _cmd_report(args) -> int:
    run_dir = Path(args.run)
    results = run_dir / "results.json"
    if not results.exists():
        raise MissingDatasetError(f"no results.json under {run_dir}")
    if not verify_config_hash(results):
        raise StageError("report", ValueError("stored config hash mismatch"))
    with open(results) as fh:
        data = json.load(fh)
    for row in data.get("rows", []):
        print(f"{row['model']:>18} {row['sequence']:>9} {row['kernel']:>8} "
              f"acc {row['acc_mean']:5.1f} +- {row['acc_std']:4.1f}")
    for row in data.get("triclass_rows", []):
        print(f"{row['model']:>18} {row['sequence']:>9} {row['view']:>11} "
              f"acc {row['acc_mean']:5.1f} +- {row['acc_std']:4.1f}")
    for delta in data.get("baseline_deltas", []):
        print(f"    vs {delta['label']}: {delta['model']}/{delta['sequence']}"
              f"/{delta['kernel']} computed {delta['computed_acc']:.1f} "
              f"baseline {delta['baseline_acc']:.1f} delta {delta['delta']:+.1f}")
    return 0


def _cmd_selftest() -> int:
    from .selftest import run_selftest
    ok = run_selftest()
    return 0 if ok else 2


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
