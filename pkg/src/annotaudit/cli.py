"""``audit`` command line.

Commands:
    audit run      audit a labeled corpus and write a run directory
    audit report   render a run directory as markdown or csv
    audit synth    generate a noisy synthetic corpus, audit it and score detection
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from .errors import AuditError
from .pipeline import RunConfig, audit_dataset, build_config, load_config, run_audit, write_run
from .report import render_report
from .synth import SynthSpec, evaluate_detection, generate_corpus, inject_label_noise, write_noise_log
from .corpus import write_dataset


def _create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="audit", description="Annotation consistency audit for labeled text")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="audit a labeled corpus")
    run.add_argument("--input", help="corpus file")
    run.add_argument("--format", choices=["csv", "tsv", "jsonl"])
    run.add_argument("--text-col")
    run.add_argument("--label-col")
    run.add_argument("--id-col")
    run.add_argument("--k-folds", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--min-df", type=int)
    run.add_argument("--tfidf-scope", choices=["global", "per_fold"])
    run.add_argument("--duplicate-mode", choices=["exact", "retweet_core"])
    run.add_argument("--classifiers", help="comma-separated classifier kinds")
    run.add_argument("--jobs", type=int, help="parallel fold x classifier training tasks")
    run.add_argument("--config", type=Path, help="key = value config file; flags override it")
    run.add_argument("--out", help="run directory")

    rep = sub.add_parser("report", help="render a run directory")
    rep.add_argument("--run", required=True, type=Path)
    rep.add_argument("--format", choices=["md", "csv"], default="md")

    syn = sub.add_parser("synth", help="synthetic noise-injection benchmark")
    syn.add_argument("--docs", type=int, default=2000)
    syn.add_argument("--classes", type=int, default=2)
    syn.add_argument("--noise", type=float, default=0.05)
    syn.add_argument("--seed", type=int, default=7)
    syn.add_argument("--class-vocab", type=int, default=50)
    syn.add_argument("--shared-vocab", type=int, default=100)
    syn.add_argument("--min-len", type=int, default=10)
    syn.add_argument("--max-len", type=int, default=20)
    syn.add_argument("--class-token-prob", type=float, default=0.7)
    syn.add_argument("--out", required=True, type=Path)
    return parser


def _run_overrides(args: argparse.Namespace) -> dict[str, object]:
    return {
        "input": args.input,
        "format": args.format,
        "text_col": args.text_col,
        "label_col": args.label_col,
        "id_col": args.id_col,
        "k_folds": args.k_folds,
        "seed": args.seed,
        "min_df": args.min_df,
        "tfidf_scope": args.tfidf_scope,
        "duplicate_mode": args.duplicate_mode,
        "classifiers": args.classifiers,
        "jobs": args.jobs,
        "out": args.out,
    }


def cmd_run(args: argparse.Namespace) -> int:
    overrides = _run_overrides(args)
    cfg = load_config(args.config, overrides) if args.config else build_config(overrides)
    out = run_audit(cfg)
    print(f"wrote {out}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    sys.stdout.write(render_report(args.run, args.format))
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    spec = SynthSpec(
        n_docs=args.docs,
        n_classes=args.classes,
        class_vocab_size=args.class_vocab,
        shared_vocab_size=args.shared_vocab,
        doc_len_range=(args.min_len, args.max_len),
        seed=args.seed,
        class_token_prob=args.class_token_prob,
    )
    clean = generate_corpus(spec)
    noisy, noise = inject_label_noise(clean, args.noise, args.seed)
    cfg = RunConfig(input=str(args.out / "corpus.csv"), id_col="id", seed=args.seed, out=str(args.out))
    result = audit_dataset(noisy, cfg)
    metrics = evaluate_detection(result.flagged, noise)
    extra = {"synth": spec.as_dict(), "epsilon": args.noise, "detection": metrics}
    write_run(result, cfg, args.out, extra)
    write_dataset(noisy, args.out / "corpus.csv", "csv")
    write_noise_log(args.out / "noise_log.csv", noise, noisy.schema)
    p = metrics["precision"]
    print(
        f"flipped {metrics['n_flipped']}, flagged {metrics['n_flagged']}, "
        f"precision {'n/a' if p is None else f'{p:.4f}'}, recall {metrics['recall']:.4f}, f1 {metrics['f1']:.4f}"
    )
    print(f"wrote {args.out}")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = _create_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handler = {"run": cmd_run, "report": cmd_report, "synth": cmd_synth}[args.command]
    try:
        return handler(args)
    except AuditError as exc:
        print(f"audit: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
