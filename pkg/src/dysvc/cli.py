"""Command line: ``dysvc <verb> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .cyclegan import variant_names
from .eval import evaluate_corpus, read_transcripts
from .synth import SynthConfig, synth_corpus

log = logging.getLogger("dysvc")


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--seed", type=int, help="global seed")
    common.add_argument("--scale", type=float, help="divide every iteration count by K")
    common.add_argument("--workers", type=int, help="parallel ablation cells")
    common.add_argument("--corpus", dest="corpus_root", help="corpus root directory")
    common.add_argument("--work", dest="work_dir", help="work directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="dysvc", description="Dysarthric-to-healthy voice conversion pipeline")
    sub = p.add_subparsers(dest="verb", required=True)

    s = sub.add_parser("synth-corpus", parents=[common], help="write the synthetic two-domain corpus")
    s.add_argument("--out", type=Path, help="output directory (default: --corpus)")
    s.add_argument("--words", type=int, default=SynthConfig.n_words)

    s = sub.add_parser("ingest", parents=[common], help="build manifest.jsonl and splits.json")
    s.add_argument("--pattern", help="filename regex with named groups speaker and word")
    s.add_argument("--control", type=_csv_list, help="comma-separated control speaker ids")

    sub.add_parser("preprocess", parents=[common], help="click removal, noise gating, trimming, F0 stats")

    for verb in ("train", "convert", "evaluate"):
        s = sub.add_parser(verb, parents=[common], help=f"{verb} one variant on one or all folds")
        s.add_argument("--variant", default="CycleGAN-VC")
        s.add_argument("--fold", type=int, action="append", dest="fold_ids")
        if verb == "convert":
            s.add_argument("--direction", choices=("x2y", "y2x"), default="x2y")
        if verb == "evaluate":
            s.add_argument("--hyps", type=Path, help="score an external hypothesis file instead")
            s.add_argument("--refs", type=Path, help="reference transcripts for --hyps")

    s = sub.add_parser("ablate", parents=[common], help="train, convert and score the variant matrix")
    s.add_argument("--variants", type=_csv_list, help="comma-separated variant names (default: all 12)")
    s.add_argument("--fold", type=int, action="append", dest="fold_ids")

    s = sub.add_parser("report", parents=[common], help="rebuild the ablation report from scored cells")
    s.add_argument("--variants", type=_csv_list)
    s.add_argument("--fold", type=int, action="append", dest="fold_ids")
    return p


def run_config(args) -> pipeline.RunConfig:
    rc = pipeline.RunConfig.from_file(args.config) if args.config else pipeline.RunConfig()
    for key in ("seed", "scale", "workers", "corpus_root", "work_dir"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(rc, key, value)
    if getattr(args, "pattern", None):
        rc.pattern = args.pattern
    if getattr(args, "control", None):
        rc.control_speakers = args.control
    if getattr(args, "variants", None):
        rc.variants = args.variants
    if getattr(args, "fold_ids", None):
        rc.folds = args.fold_ids
    if rc.workers < 1:
        raise ValueError("--workers must be >= 1")
    return rc


def cmd_synth(args, rc) -> int:
    out = args.out or Path(rc.corpus_root)
    meta = synth_corpus(out, SynthConfig(n_words=args.words, seed=rc.seed))
    print(f"wrote {len(meta['words'])} words x {len(meta['config']['dysarthric']) + len(meta['control_speakers'])} speakers to {out}")
    print(f"control speakers: {', '.join(meta['control_speakers'])}")
    return 0


def cmd_ingest(args, rc) -> int:
    if not rc.control_speakers:
        meta = Path(rc.corpus_root) / "corpus.json"
        if meta.exists():
            rc.control_speakers = json.loads(meta.read_text())["control_speakers"]
    m = pipeline.ingest(rc)
    print(f"{len(m)} utterances, speakers: {dict(sorted(m.speakers.items()))}")
    return 0


def cmd_preprocess(args, rc) -> int:
    stats = pipeline.preprocess(rc)
    for spk, s in stats.items():
        print(f"{spk}: log-F0 mean {s.mu:.3f} std {s.sigma:.3f}")
    return 0


def _folds(rc):
    folds = pipeline.load_folds(rc)
    if not folds:
        raise pipeline.StageError("no folds selected")
    return folds


def _check_variant(name: str):
    if name not in variant_names(include_ts=True) and name not in pipeline.REFERENCE_ROWS:
        raise KeyError(f"unknown variant {name!r}; valid names: {', '.join(variant_names())}")


def cmd_train(args, rc) -> int:
    _check_variant(args.variant)
    for fold in _folds(rc):
        print(pipeline.train_fold(rc, args.variant, fold))
    return 0


def cmd_convert(args, rc) -> int:
    _check_variant(args.variant)
    for fold in _folds(rc):
        out = pipeline.convert_fold(rc, args.variant, fold, args.direction)
        print(f"fold {fold.fold_id}: {len(list(out.glob('*.wav')))} files in {out}")
    return 0


def cmd_evaluate(args, rc) -> int:
    if args.hyps:
        if not args.refs:
            raise ValueError("--hyps needs --refs")
        res = evaluate_corpus(read_transcripts(args.hyps), read_transcripts(args.refs))
        pooled = res.pooled
        print(f"PER {pooled.per:.1f}% (S={pooled.substitutions} D={pooled.deletions} I={pooled.insertions} N={pooled.ref_len})")
        return 0
    _check_variant(args.variant)
    for fold in _folds(rc):
        res = pipeline.evaluate_fold(rc, args.variant, fold)
        for spk, r in res.per_speaker.items():
            print(f"fold {fold.fold_id} {spk}: PER {r.per:.1f}%")
    return 0


def _print_report(report, rc):
    if report is not None:
        print(report.to_text(), end="")
    print(f"reports written to {rc.work / 'reports'}")


def cmd_ablate(args, rc) -> int:
    outcome = pipeline.ablate(rc)
    _print_report(outcome.report, rc)
    bad_reuse = [r for r in outcome.checkpoint_reuse if not r["identical"]]
    for r in bad_reuse:
        print(f"checkpoint mismatch: {r['variant']} fold {r['fold']}", file=sys.stderr)
    for (v, k), err in sorted(outcome.failed.items()):
        print(f"FAILED {v} fold {k}: {err}", file=sys.stderr)
    return 0 if outcome.ok and not bad_reuse else 1


def cmd_report(args, rc) -> int:
    report = pipeline.report_from_disk(rc)
    _print_report(report, rc)
    return 0 if report is not None and len(report.rows) == len(rc.variants) else 1


COMMANDS = {
    "synth-corpus": cmd_synth,
    "ingest": cmd_ingest,
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "convert": cmd_convert,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        rc = run_config(args)
        return COMMANDS[args.verb](args, rc)
    except (pipeline.StageError, KeyError, ValueError, FileNotFoundError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"dysvc {args.verb}: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
