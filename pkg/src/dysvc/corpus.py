"""Word-recording manifests, parallel pairing and leave-one-speaker-out folds."""
from __future__ import annotations

import json
import logging
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .dsp.io import wav_duration

log = logging.getLogger(__name__)

DEFAULT_PATTERN = r"(?P<speaker>[^_/]+)_(?P<word>[^/]+)\.wav"
ROLES = ("dysarthric", "control")


@dataclass(frozen=True)
class Utterance:
    utterance_id: str
    speaker_id: str
    word_id: str
    audio_path: str
    duration_s: float
    transcript_path: str | None = None

    def __post_init__(self):
        if not self.word_id:
            raise ValueError(f"{self.utterance_id}: empty word_id")
        if not (self.duration_s >= 0 and self.duration_s != float("inf")):
            raise ValueError(f"{self.utterance_id}: duration must be finite and >= 0")


@dataclass
class Manifest:
    utterances: list[Utterance]
    speakers: dict[str, str] = field(default_factory=dict)  # speaker_id -> role

    def __post_init__(self):
        ids, keys = set(), set()
        for u in self.utterances:
            if u.utterance_id in ids:
                raise ValueError(f"duplicate utterance_id {u.utterance_id}")
            if (u.speaker_id, u.word_id) in keys:
                raise ValueError(f"duplicate (speaker, word) pair {(u.speaker_id, u.word_id)}")
            if u.speaker_id not in self.speakers:
                raise ValueError(f"speaker {u.speaker_id} missing from the speaker table")
            ids.add(u.utterance_id)
            keys.add((u.speaker_id, u.word_id))
        for spk, role in self.speakers.items():
            if role not in ROLES:
                raise ValueError(f"speaker {spk}: role must be one of {ROLES}, got {role!r}")

    def __len__(self) -> int:
        return len(self.utterances)

    def by_speaker(self, speaker_id: str) -> list[Utterance]:
        return [u for u in self.utterances if u.speaker_id == speaker_id]

    def by_id(self) -> dict[str, Utterance]:
        return {u.utterance_id: u for u in self.utterances}

    def speakers_with_role(self, role: str) -> list[str]:
        return sorted(s for s, r in self.speakers.items() if r == role)

    def save(self, path):
        """One JSON object per line: a speaker table line, then one line per utterance."""
        with open(path, "w") as f:
            f.write(json.dumps({"speakers": dict(sorted(self.speakers.items()))}) + "\n")
            for u in self.utterances:
                f.write(json.dumps(asdict(u), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "Manifest":
        lines = [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
        if not lines or "speakers" not in lines[0]:
            raise ValueError(f"{path}: missing speaker table on the first line")
        return cls([Utterance(**d) for d in lines[1:]], lines[0]["speakers"])


@dataclass(frozen=True)
class FoldSplit:
    fold_id: int
    train_speakers: tuple[str, ...]
    eval_speaker: str
    train_utts: tuple[str, ...]
    eval_utts: tuple[str, ...]

    def __post_init__(self):
        if self.eval_speaker in self.train_speakers:
            raise ValueError("eval speaker must not be a training speaker")
        if set(self.train_utts) & set(self.eval_utts):
            raise ValueError("train and eval utterances overlap")


def build_manifest(
    root_dir,
    pattern: str = DEFAULT_PATTERN,
    control_speakers: Iterable[str] = (),
) -> Manifest:
    """Scan ``root_dir`` recursively for WAV files whose relative path matches ``pattern``.

    The pattern needs named groups ``speaker`` and ``word``. Speakers listed in
    ``control_speakers`` are tagged control, all others dysarthric. A
    ``<stem>.txt`` next to a recording is taken as its phoneme transcript.
    """
    root = Path(root_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus root {root} does not exist")
    regex = re.compile(pattern)
    if not {"speaker", "word"} <= set(regex.groupindex):
        raise ValueError("layout pattern needs named groups 'speaker' and 'word'")
    controls = set(control_speakers)
    utts, seen = [], set()
    for path in sorted(root.rglob("*.wav")):
        rel = path.relative_to(root).as_posix()
        m = regex.fullmatch(rel)
        if m is None:
            log.warning("skipping %s: does not match layout pattern", rel)
            continue
        spk, word = m.group("speaker"), m.group("word")
        if (spk, word) in seen:
            log.warning("skipping %s: duplicate recording of word %s by %s", rel, word, spk)
            continue
        try:
            dur = wav_duration(path)
        except Exception as exc:  # unreadable header: warn and exclude
            log.warning("skipping unreadable file %s: %s", rel, exc)
            continue
        seen.add((spk, word))
        txt = path.with_suffix(".txt")
        utts.append(Utterance(f"{spk}_{word}", spk, word, str(path), dur, str(txt) if txt.exists() else None))
    if not utts:
        raise ValueError(f"no utterances found under {root}")
    speakers = {u.speaker_id: ("control" if u.speaker_id in controls else "dysarthric") for u in utts}
    missing = sorted(controls - set(speakers))
    if missing:
        log.warning("control speakers without recordings: %s", ", ".join(missing))
    return Manifest(utts, speakers)


def pair_parallel(m: Manifest, src: str, tgt: str) -> list[tuple[Utterance, Utterance]]:
    """Match the two speakers' utterances on word_id, ordered by the source manifest order."""
    for spk in (src, tgt):
        if spk not in m.speakers:
            raise KeyError(f"speaker {spk} not in manifest")
    tgt_words = {u.word_id: u for u in m.by_speaker(tgt)}
    src_utts = m.by_speaker(src)
    pairs = [(u, tgt_words[u.word_id]) for u in src_utts if u.word_id in tgt_words]
    if not pairs:
        raise ValueError(f"speakers {src} and {tgt} share no words")
    dropped = len(src_utts) + len(tgt_words) - 2 * len(pairs)
    if dropped:
        log.info("pairing %s -> %s: %d unmatched utterances dropped", src, tgt, dropped)
    return sorted(pairs, key=lambda p: p[0].word_id)


def leave_one_out_splits(m: Manifest, group: Sequence[str]) -> list[FoldSplit]:
    """Four folds over a four-speaker group; fold k evaluates on ``group[k]``."""
    group = list(group)
    if len(group) != 4:
        raise ValueError(f"leave-one-out groups have 4 speakers, got {len(group)}")
    if len(set(group)) != 4:
        raise ValueError("group lists a speaker twice")
    per = {}
    for spk in group:
        if spk not in m.speakers:
            raise KeyError(f"speaker {spk} not in manifest")
        per[spk] = tuple(u.utterance_id for u in m.by_speaker(spk))
    if len({len(v) for v in per.values()}) > 1:
        log.warning("unequal utterance counts in group: %s", {k: len(v) for k, v in per.items()})
    folds = []
    for k, held in enumerate(group):
        train = tuple(s for s in group if s != held)
        folds.append(FoldSplit(k, train, held, tuple(u for s in train for u in per[s]), per[held]))
    return folds


def save_splits(path, folds: Sequence[FoldSplit]):
    Path(path).write_text(json.dumps([asdict(f) for f in folds], indent=1))


def load_splits(path) -> list[FoldSplit]:
    return [
        FoldSplit(d["fold_id"], tuple(d["train_speakers"]), d["eval_speaker"], tuple(d["train_utts"]), tuple(d["eval_utts"]))
        for d in json.loads(Path(path).read_text())
    ]
