"""Phoneme error rate by Levenshtein alignment."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

# backtrace preference on equal cost: match, substitution, deletion, insertion
MATCH, SUB, DEL, INS = "M", "S", "D", "I"


@dataclass(frozen=True)
class PhonemeSequence:
    tokens: tuple[str, ...]
    utterance_id: str = ""

    def __post_init__(self):
        tokens = tuple(self.tokens)
        for tok in tokens:
            if not tok or any(c.isspace() for c in tok):
                raise ValueError(f"invalid phoneme symbol {tok!r}")
        object.__setattr__(self, "tokens", tokens)

    @classmethod
    def from_string(cls, text: str, utterance_id: str = "") -> "PhonemeSequence":
        return cls(tuple(text.split()), utterance_id)

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class PerResult:
    substitutions: int
    deletions: int
    insertions: int
    ref_len: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def per(self) -> float:
        return 100.0 * self.errors / self.ref_len if self.ref_len else 0.0

    def __add__(self, other: "PerResult") -> "PerResult":
        return PerResult(
            self.substitutions + other.substitutions,
            self.deletions + other.deletions,
            self.insertions + other.insertions,
            self.ref_len + other.ref_len,
        )


def _tokens(seq) -> Sequence[str]:
    return seq.tokens if isinstance(seq, PhonemeSequence) else tuple(seq)


def edit_align(ref, hyp) -> tuple[list[tuple[str, str | None, str | None]], PerResult]:
    """Unit-cost Levenshtein alignment of ``hyp`` against ``ref``.

    Returns the alignment as ``(op, ref_token, hyp_token)`` triples in
    sequence order, and the decomposed counts.
    """
    r, h = _tokens(ref), _tokens(hyp)
    if len(r) == 0:
        raise ValueError("reference transcription is empty")
    n, m = len(r), len(h)
    cost = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        cost[i][0] = i
    for j in range(1, m + 1):
        cost[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            diag = cost[i - 1][j - 1] + (r[i - 1] != h[j - 1])
            cost[i][j] = min(diag, cost[i - 1][j] + 1, cost[i][j - 1] + 1)

    ops = []
    i, j = n, m
    while i > 0 or j > 0:
        here = cost[i][j]
        if i > 0 and j > 0 and r[i - 1] == h[j - 1] and cost[i - 1][j - 1] == here:
            ops.append((MATCH, r[i - 1], h[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and cost[i - 1][j - 1] + 1 == here:
            ops.append((SUB, r[i - 1], h[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and cost[i - 1][j] + 1 == here:
            ops.append((DEL, r[i - 1], None))
            i -= 1
        else:
            ops.append((INS, None, h[j - 1]))
            j -= 1
    ops.reverse()
    counts = {SUB: 0, DEL: 0, INS: 0}
    for op, _, _ in ops:
        if op in counts:
            counts[op] += 1
    return ops, PerResult(counts[SUB], counts[DEL], counts[INS], n)


@dataclass
class CorpusResult:
    per_speaker: dict[str, PerResult]

    @property
    def speaker_average(self) -> float:
        """Unweighted mean of the speakers' pooled PERs."""
        pers = [res.per for res in self.per_speaker.values()]
        return sum(pers) / len(pers) if pers else 0.0

    @property
    def pooled(self) -> PerResult:
        total = PerResult(0, 0, 0, 0)
        for res in self.per_speaker.values():
            total = total + res
        return total


def evaluate_corpus(
    hyps: Mapping[str, PhonemeSequence],
    refs: Mapping[str, PhonemeSequence],
    speaker_of: Mapping[str, str] | None = None,
) -> CorpusResult:
    """Pool S/D/I counts per speaker (not a mean of utterance PERs)."""
    missing = sorted(set(hyps) - set(refs))
    if missing:
        raise KeyError(f"no reference for utterances: {', '.join(missing)}")
    per_speaker: dict[str, PerResult] = {}
    for utt_id in sorted(hyps):
        speaker = speaker_of[utt_id] if speaker_of is not None else "all"
        _, res = edit_align(refs[utt_id], hyps[utt_id])
        per_speaker[speaker] = per_speaker.get(speaker, PerResult(0, 0, 0, 0)) + res
    return CorpusResult(per_speaker)


def read_transcripts(path) -> dict[str, PhonemeSequence]:
    """Read ``utterance_id<TAB>tok tok tok`` lines; an empty token list is allowed."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        utt_id, _, text = line.partition("\t")
        if not utt_id:
            raise ValueError(f"{path}:{lineno}: missing utterance id")
        out[utt_id] = PhonemeSequence.from_string(text, utt_id)
    return out


def write_transcripts(path, seqs: Mapping[str, PhonemeSequence]):
    lines = [f"{utt_id}\t{' '.join(seqs[utt_id].tokens)}" for utt_id in sorted(seqs)]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))
