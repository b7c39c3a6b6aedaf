"""Stage functions behind the command line: ingest, preprocess, train, convert, evaluate, ablate.

Layout under the work directory::

    manifest.jsonl  splits.json  stages/<stage>.json
    preprocessed/<utt>.wav  preprocess.jsonl  f0_stats.json
    <variant>/fold<k>-<hash8>/{checkpoints,converted,scores}/
    reports/ablation.{csv,txt}  reports/raw_scores.csv

Every cell directory name carries the hash of the configuration that produced
it, so a changed configuration never overwrites an earlier cell.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import DEFAULT_PATTERN, FoldSplit, Manifest, build_manifest, leave_one_out_splits, load_splits, save_splits
from .cyclegan import (
    DESK_OVERRIDES,
    TS_SUFFIX,
    GanConfig,
    base_name,
    convert,
    get_variant,
    load_models,
    train,
    variant_names,
)
from .cyclegan.convert import mel_config_for
from .dsp import F0Stats, Waveform, estimate_f0, f0_stats, mel_spectrogram, read_wav, time_stretch, write_wav
from .eval import AblationReport, CorpusResult, Inventory, PhonemeSequence, ablation_report, edit_align, toy_recognizer
from .eval.per import PerResult, read_transcripts, write_transcripts
from .align import stretch_rate_for_target
from .nn.checkpoint import config_hash, file_sha256
from .preprocess import GateParams, preprocess_pipeline

log = logging.getLogger(__name__)

REFERENCE_ROWS = ("Dysarthric", "Dysarthric" + TS_SUFFIX)


class StageError(RuntimeError):
    """A prior stage's output is missing or inconsistent."""


@dataclass
class RunConfig:
    corpus_root: str = "corpus"
    work_dir: str = "work"
    pattern: str = DEFAULT_PATTERN
    control_speakers: list[str] = field(default_factory=list)
    # control speaker every dysarthric speaker is converted towards; default: first control
    target_speaker: str | None = None
    # groups of 4 dysarthric speakers; default: the first 4 dysarthric speakers
    groups: list[list[str]] = field(default_factory=list)
    variants: list[str] = field(default_factory=lambda: variant_names(include_ts=True))
    folds: list[int] | None = None
    gan: dict = field(default_factory=lambda: dict(DESK_OVERRIDES))
    scale: float = 1.0
    seed: int = 0
    workers: int = 1
    inventory: str | None = None
    top_db: float = 30.0
    # pitch search range; the synthetic control voices reach 500 Hz
    f0_range: tuple[float, float] = (60.0, 600.0)
    gate: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        data = json.loads(Path(path).read_text())
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise KeyError(f"unknown run-config keys: {', '.join(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @property
    def work(self) -> Path:
        return Path(self.work_dir)

    def inventory_path(self) -> Path:
        return Path(self.inventory) if self.inventory else Path(self.corpus_root) / "inventory.json"

    def gan_config(self, variant: str) -> GanConfig:
        if variant in REFERENCE_ROWS:
            raise KeyError(f"{variant!r} is a reference row without a model")
        return get_variant(variant, **self.gan).replace(scale=self.scale)

    def validate_variants(self):
        valid = set(variant_names(include_ts=True)) | set(REFERENCE_ROWS)
        bad = [v for v in self.variants if v not in valid]
        if bad:
            raise KeyError(
                f"unknown variant(s) {', '.join(map(repr, bad))}; valid names: {', '.join(variant_names())}, "
                + ", ".join(REFERENCE_ROWS)
            )


# ---------------------------------------------------------------- bookkeeping


def slug(name: str) -> str:
    return name.replace(" + ", "+").replace(" ", "_")


def hash_files(paths) -> str:
    h = hashlib.sha256()
    for p in sorted(Path(p) for p in paths):
        h.update(p.name.encode())
        h.update(file_sha256(p).encode())
    return h.hexdigest()


def write_stage(path, stage: str, inputs: dict, config: dict, outputs: dict | None = None):
    """Stage manifest: input hashes, config hash and a timestamp."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "stage": stage,
        "inputs": inputs,
        "config_hash": config_hash(config),
        "config": config,
        "outputs": outputs or {},
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    path.write_text(json.dumps(payload, indent=1, sort_keys=True, default=str))


def require(path, stage: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise StageError(f"missing {path}; run `dysvc {stage}` first")
    return path


def load_manifest(rc: RunConfig) -> Manifest:
    return Manifest.load(require(rc.work / "manifest.jsonl", "ingest"))


def load_folds(rc: RunConfig) -> list[FoldSplit]:
    folds = load_splits(require(rc.work / "splits.json", "ingest"))
    if rc.folds is not None:
        folds = [f for f in folds if f.fold_id in rc.folds]
    return folds


def target_speaker(rc: RunConfig, m: Manifest) -> str:
    if rc.target_speaker:
        if rc.target_speaker not in m.speakers:
            raise StageError(f"target speaker {rc.target_speaker} not in manifest")
        return rc.target_speaker
    controls = m.speakers_with_role("control")
    if not controls:
        raise StageError("manifest has no control speaker to convert towards")
    return controls[0]


# ---------------------------------------------------------------- stages


def ingest(rc: RunConfig) -> Manifest:
    m = build_manifest(rc.corpus_root, rc.pattern, rc.control_speakers)
    rc.work.mkdir(parents=True, exist_ok=True)
    m.save(rc.work / "manifest.jsonl")
    groups = rc.groups or [m.speakers_with_role("dysarthric")[:4]]
    folds = []
    for g, group in enumerate(groups):
        for f in leave_one_out_splits(m, group):
            folds.append(dataclasses.replace(f, fold_id=4 * g + f.fold_id))
    save_splits(rc.work / "splits.json", folds)
    write_stage(
        rc.work / "stages" / "ingest.json",
        "ingest",
        {"audio": hash_files(Path(u.audio_path) for u in m.utterances)},
        {"pattern": rc.pattern, "control_speakers": rc.control_speakers, "groups": groups},
        {"utterances": len(m), "folds": len(folds)},
    )
    log.info("ingested %d utterances from %d speakers, %d folds", len(m), len(m.speakers), len(folds))
    return m


def preprocessed_path(rc: RunConfig, utt_id: str) -> Path:
    return rc.work / "preprocessed" / f"{utt_id}.wav"


def preprocess(rc: RunConfig) -> dict[str, F0Stats]:
    m = load_manifest(rc)
    out = rc.work / "preprocessed"
    out.mkdir(parents=True, exist_ok=True)
    gate = GateParams(**rc.gate)
    tracks: dict[str, list] = {}
    with open(rc.work / "preprocess.jsonl", "w") as rep:
        for u in m.utterances:
            report: dict = {"utterance_id": u.utterance_id}
            w = preprocess_pipeline(read_wav(u.audio_path), gate, rc.top_db, report=report)
            write_wav(preprocessed_path(rc, u.utterance_id), w)
            rep.write(json.dumps(report, sort_keys=True) + "\n")
            tracks.setdefault(u.speaker_id, []).append(estimate_f0(w, *rc.f0_range))
    stats = {}
    for spk, trs in sorted(tracks.items()):
        try:
            stats[spk] = f0_stats(trs, spk)
        except ValueError:
            log.warning("speaker %s has no voiced frames; no F0 statistics", spk)
    (rc.work / "f0_stats.json").write_text(
        json.dumps({k: dataclasses.asdict(v) for k, v in stats.items()}, indent=1, sort_keys=True)
    )
    write_stage(
        rc.work / "stages" / "preprocess.json",
        "preprocess",
        {"manifest": file_sha256(rc.work / "manifest.jsonl")},
        {"gate": dataclasses.asdict(gate), "top_db": rc.top_db, "f0_range": list(rc.f0_range)},
        {"files": len(m)},
    )
    return stats


def load_f0_stats(rc: RunConfig) -> dict[str, F0Stats]:
    path = require(rc.work / "f0_stats.json", "preprocess")
    return {k: F0Stats(**v) for k, v in json.loads(path.read_text()).items()}


def _data_hash(rc: RunConfig) -> str:
    stage = json.loads(require(rc.work / "stages" / "preprocess.json", "preprocess").read_text())
    return config_hash({"manifest": stage["inputs"]["manifest"], "config": stage["config_hash"]})


def cell_dir(rc: RunConfig, variant: str, fold: FoldSplit, target: str) -> Path:
    if variant in REFERENCE_ROWS:
        payload = {"reference": variant, "fold": dataclasses.asdict(fold), "target": target}
    else:
        payload = {"gan": rc.gan_config(variant).to_dict(), "fold": dataclasses.asdict(fold), "target": target}
    payload["data"] = _data_hash(rc)
    return rc.work / slug(variant) / f"fold{fold.fold_id}-{config_hash(payload)[:8]}"


def train_dir(rc: RunConfig, variant: str, fold: FoldSplit, target: str) -> Path:
    return cell_dir(rc, base_name(variant), fold, target)


def _features(rc: RunConfig, cfg: GanConfig, utt_ids) -> list[np.ndarray]:
    feats = []
    for uid in utt_ids:
        w = read_wav(require(preprocessed_path(rc, uid), "preprocess"))
        feats.append(mel_spectrogram(w, mel_config_for(cfg, w.sample_rate)).frames)
    return feats


def cell_seed(seed: int, fold_id: int) -> int:
    return int(np.random.SeedSequence([seed, fold_id]).generate_state(1)[0])


def train_fold(rc: RunConfig, variant: str, fold: FoldSplit) -> Path:
    """Train (or reuse) the checkpoint for a variant's training key on one fold."""
    m = load_manifest(rc)
    target = target_speaker(rc, m)
    cfg = rc.gan_config(base_name(variant)).replace(seed=cell_seed(rc.seed, fold.fold_id))
    out = train_dir(rc, variant, fold, target)
    final = out / "checkpoints" / "final.bin"
    if final.exists():
        log.info("reusing checkpoint %s", final)
        return final
    by_id = m.by_id()
    tgt_words = {u.word_id: u for u in m.by_speaker(target)}
    src_ids = [uid for uid in fold.train_utts]
    tgt_ids = [u.utterance_id for u in tgt_words.values()]
    tgt_index = {u.word_id: k for k, u in enumerate(tgt_words.values())}
    pairs = [(i, tgt_index[by_id[uid].word_id]) for i, uid in enumerate(src_ids) if by_id[uid].word_id in tgt_index]
    if not pairs:
        raise StageError(f"fold {fold.fold_id}: no training utterance has a parallel target recording")
    result = train(cfg, _features(rc, cfg, src_ids), _features(rc, cfg, tgt_ids), pairs=pairs, out_dir=out)
    write_stage(
        out / "stages" / "train.json",
        "train",
        {"data": _data_hash(rc), "splits": file_sha256(rc.work / "splits.json")},
        cfg.to_dict(),
        {"checkpoint": str(result.checkpoint), "sha256": file_sha256(result.checkpoint), "iterations": result.iterations},
    )
    return result.checkpoint


def _target_durations(rc: RunConfig, m: Manifest, target: str) -> tuple[dict[str, float], float]:
    durs = {u.word_id: read_wav(preprocessed_path(rc, u.utterance_id)).duration for u in m.by_speaker(target)}
    return durs, float(np.mean(list(durs.values())))


def convert_fold(rc: RunConfig, variant: str, fold: FoldSplit, direction: str = "x2y") -> Path:
    """Write one converted WAV per evaluation utterance (x2y) or target utterance (y2x)."""
    m = load_manifest(rc)
    target = target_speaker(rc, m)
    out = cell_dir(rc, variant, fold, target)
    conv_dir = out / "converted"
    conv_dir.mkdir(parents=True, exist_ok=True)
    by_id = m.by_id()
    word_durs, mean_dur = _target_durations(rc, m, target)
    ts = variant.endswith(TS_SUFFIX)
    if direction == "x2y":
        utt_ids = list(fold.eval_utts)
    else:
        utt_ids = [u.utterance_id for u in m.by_speaker(target)]

    if variant in REFERENCE_ROWS:
        models = cfg = None
        ckpt_info = {}
    else:
        ckpt = require(train_dir(rc, variant, fold, target) / "checkpoints" / "final.bin", "train")
        cfg = rc.gan_config(variant)
        models, _ = load_models(ckpt, cfg)
        ckpt_info = {"checkpoint": str(ckpt), "sha256": file_sha256(ckpt)}
        (out / "checkpoint_ref.json").write_text(json.dumps(ckpt_info, indent=1, sort_keys=True))
    f0 = load_f0_stats(rc)
    meta = []
    for uid in utt_ids:
        u = by_id[uid]
        w = read_wav(require(preprocessed_path(rc, uid), "preprocess"))
        tgt_dur = word_durs.get(u.word_id, mean_dur)
        if len(w) == 0:
            log.warning("%s is empty after preprocessing; writing an empty file", uid)
            out_w, rate, f0_mean = w, 1.0, 0.0
        elif models is None:
            rate = stretch_rate_for_target(w.duration, tgt_dur) if ts else 1.0
            out_w = time_stretch(w, rate) if ts else w
            f0_mean = 0.0
        else:
            src_spk, tgt_spk = (u.speaker_id, target) if direction == "x2y" else (target, fold.eval_speaker)
            res = convert(
                models, w, cfg, direction, target_duration=tgt_dur if direction == "x2y" else None,
                src_stats=f0.get(src_spk), tgt_stats=f0.get(tgt_spk), report_f0=True, f0_range=tuple(rc.f0_range),
            )
            out_w, rate = res.waveform, res.stretch_rate
            voiced = res.f0.values[res.f0.voiced] if res.f0 is not None else np.zeros(0)
            f0_mean = float(voiced.mean()) if voiced.size else 0.0
        write_wav(conv_dir / f"{uid}.wav", out_w)
        meta.append({"utterance_id": uid, "stretch_rate": rate, "f0_mean_hz": f0_mean})
    with open(out / "converted.jsonl", "w") as f:
        for row in meta:
            f.write(json.dumps(row, sort_keys=True) + "\n")
    write_stage(
        out / "stages" / "convert.json",
        "convert",
        {"data": _data_hash(rc), **ckpt_info},
        {"variant": variant, "direction": direction, "gan": cfg.to_dict() if cfg else None},
        {"files": len(utt_ids)},
    )
    return conv_dir


def load_references(rc: RunConfig, m: Manifest) -> dict[str, PhonemeSequence]:
    refs = {}
    for u in m.utterances:
        if u.transcript_path and Path(u.transcript_path).exists():
            refs[u.utterance_id] = PhonemeSequence.from_string(Path(u.transcript_path).read_text(), u.utterance_id)
    tsv = Path(rc.corpus_root) / "transcripts.tsv"
    if tsv.exists():
        for k, v in read_transcripts(tsv).items():
            refs.setdefault(k, v)
    return refs


def evaluate_fold(rc: RunConfig, variant: str, fold: FoldSplit) -> CorpusResult:
    """Recognise the converted evaluation utterances and score them against references."""
    m = load_manifest(rc)
    target = target_speaker(rc, m)
    out = cell_dir(rc, variant, fold, target)
    conv_dir = require(out / "converted", "convert")
    inv = Inventory.load(require(rc.inventory_path(), "synth-corpus"))
    refs = load_references(rc, m)
    missing = [uid for uid in fold.eval_utts if uid not in refs]
    if missing:
        raise StageError(f"no reference transcript for: {', '.join(missing)}")
    hyps, rows, total = {}, [], PerResult(0, 0, 0, 0)
    for uid in fold.eval_utts:
        w = read_wav(require(conv_dir / f"{uid}.wav", "convert"))
        hyps[uid] = toy_recognizer(w, inv, uid) if len(w) else PhonemeSequence((), uid)
        _, res = edit_align(refs[uid], hyps[uid])
        total = total + res
        rows.append([uid, fold.eval_speaker, res.substitutions, res.deletions, res.insertions, res.ref_len, f"{res.per:.4f}"])
    scores = out / "scores"
    scores.mkdir(parents=True, exist_ok=True)
    write_transcripts(scores / "hyps.tsv", hyps)
    with open(scores / "per_utt.csv", "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["utterance_id", "speaker", "S", "D", "I", "ref_len", "per"])
        writer.writerows(rows)
    write_stage(
        out / "stages" / "evaluate.json",
        "evaluate",
        {"converted": hash_files((conv_dir / f"{u}.wav") for u in fold.eval_utts), "inventory": file_sha256(rc.inventory_path())},
        {"variant": variant},
        {"per": total.per},
    )
    return CorpusResult({fold.eval_speaker: total})


def read_fold_scores(rc: RunConfig, variant: str, fold: FoldSplit, target: str) -> PerResult:
    path = require(cell_dir(rc, variant, fold, target) / "scores" / "per_utt.csv", "evaluate")
    total = PerResult(0, 0, 0, 0)
    with open(path, newline="") as f:
        for r in csv.DictReader(f):
            total = total + PerResult(int(r["S"]), int(r["D"]), int(r["I"]), int(r["ref_len"]))
    return total


# ---------------------------------------------------------------- ablation


def _train_job(args):
    rc_dict, variant, fold = args
    rc = RunConfig(**rc_dict)
    try:
        return variant, fold.fold_id, str(train_fold(rc, variant, fold)), None
    except Exception as exc:  # a failed cell must not stop the matrix
        log.exception("training %s fold %d failed", variant, fold.fold_id)
        return variant, fold.fold_id, None, f"{type(exc).__name__}: {exc}"


def _cell_job(args):
    rc_dict, variant, fold = args
    rc = RunConfig(**rc_dict)
    try:
        convert_fold(rc, variant, fold)
        res = evaluate_fold(rc, variant, fold)
        return variant, fold.fold_id, res.per_speaker[fold.eval_speaker], None
    except Exception as exc:
        log.exception("cell %s fold %d failed", variant, fold.fold_id)
        return variant, fold.fold_id, None, f"{type(exc).__name__}: {exc}"


def _run_jobs(fn, jobs, workers: int):
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def row_block(variant: str) -> str:
    if variant in REFERENCE_ROWS:
        return "GT"
    return "VC + TS" if variant.endswith(TS_SUFFIX) else "VC"


@dataclass
class AblationOutcome:
    report: AblationReport | None
    failed: dict[tuple[str, int], str]
    checkpoint_reuse: list[dict]

    @property
    def ok(self) -> bool:
        return not self.failed


def ablate(rc: RunConfig) -> AblationOutcome:
    """Train every distinct training key once per fold, then convert and score every cell."""
    rc.validate_variants()
    folds = load_folds(rc)
    m = load_manifest(rc)
    target = target_speaker(rc, m)
    rc_dict = rc.to_dict()
    failed: dict[tuple[str, int], str] = {}

    train_keys = list(dict.fromkeys(base_name(v) for v in rc.variants if v not in REFERENCE_ROWS))
    for variant, fold_id, _, err in _run_jobs(_train_job, [(rc_dict, v, f) for v in train_keys for f in folds], rc.workers):
        if err:
            failed[(variant, fold_id)] = err
    jobs = []
    for v in rc.variants:
        for f in folds:
            if v not in REFERENCE_ROWS and (base_name(v), f.fold_id) in failed:
                failed[(v, f.fold_id)] = f"training of {base_name(v)} failed"
            else:
                jobs.append((rc_dict, v, f))
    per: dict[str, dict[str, PerResult]] = {v: {} for v in rc.variants}
    for variant, fold_id, res, err in _run_jobs(_cell_job, jobs, rc.workers):
        if err:
            failed[(variant, fold_id)] = err
        else:
            fold = next(f for f in folds if f.fold_id == fold_id)
            per[variant][fold.eval_speaker] = per[variant].get(fold.eval_speaker, PerResult(0, 0, 0, 0)) + res

    reuse = []
    for v in rc.variants:
        if not v.endswith(TS_SUFFIX) or v in REFERENCE_ROWS:
            continue
        for f in folds:
            ref = cell_dir(rc, v, f, target) / "checkpoint_ref.json"
            if not ref.exists():
                continue
            used = json.loads(ref.read_text())
            trained = json.loads((train_dir(rc, v, f, target) / "stages" / "train.json").read_text())["outputs"]
            reuse.append({"variant": v, "fold": f.fold_id, "used": used["sha256"], "trained": trained["sha256"],
                          "identical": used["sha256"] == trained["sha256"]})
    report = write_reports(rc, per, failed, folds, target)
    return AblationOutcome(report, failed, reuse)


def write_reports(rc: RunConfig, per, failed, folds, target) -> AblationReport | None:
    out = rc.work / "reports"
    out.mkdir(parents=True, exist_ok=True)
    speakers = sorted({f.eval_speaker for f in folds})
    complete = {v: CorpusResult(dict(sorted(r.items()))) for v, r in per.items() if set(r) == set(speakers)}
    report = None
    if complete:
        report = ablation_report(complete, {v: row_block(v) for v in complete})
        (out / "ablation.csv").write_text(report.to_csv())
        text = report.to_text()
        if failed:
            text += "\nFAILED CELLS\n" + "".join(f"  {v} fold {k}: {e}\n" for (v, k), e in sorted(failed.items()))
        (out / "ablation.txt").write_text(text)
    with open(out / "raw_scores.csv", "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["variant", "fold", "utterance_id", "speaker", "S", "D", "I", "ref_len", "per"])
        for v in rc.variants:
            for fold in folds:
                path = cell_dir(rc, v, fold, target) / "scores" / "per_utt.csv"
                if (v, fold.fold_id) in failed or not path.exists():
                    continue
                with open(path, newline="") as g:
                    for row in list(csv.reader(g))[1:]:
                        writer.writerow([v, fold.fold_id, *row])
    (out / "failed.json").write_text(
        json.dumps([{"variant": v, "fold": k, "error": e} for (v, k), e in sorted(failed.items())], indent=1)
    )
    return report


def report_from_disk(rc: RunConfig) -> AblationReport | None:
    """Rebuild the reports from the scored cells already on disk."""
    rc.validate_variants()
    folds = load_folds(rc)
    target = target_speaker(rc, load_manifest(rc))
    per: dict[str, dict[str, PerResult]] = {v: {} for v in rc.variants}
    failed = {}
    for v in rc.variants:
        for f in folds:
            try:
                res = read_fold_scores(rc, v, f, target)
            except StageError as exc:
                failed[(v, f.fold_id)] = str(exc)
                continue
            per[v][f.eval_speaker] = per[v].get(f.eval_speaker, PerResult(0, 0, 0, 0)) + res
    return write_reports(rc, per, failed, folds, target)
