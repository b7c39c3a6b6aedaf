"""Table-shaped ablation reports: one row per configuration, one column per speaker."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .per import CorpusResult


@dataclass
class ReportRow:
    name: str
    block: str
    values: dict[str, float]


@dataclass
class AblationReport:
    speakers: list[str]
    groups: dict[str, list[str]]
    rows: list[ReportRow] = field(default_factory=list)
    # blocks whose rows serve as references and are never marked best
    reference_blocks: tuple[str, ...] = ("GT",)

    @property
    def columns(self) -> list[str]:
        cols = []
        for group, members in self.groups.items():
            cols.extend(members)
            cols.append(f"{group} avg")
            cols.append(f"{group} pooled")
        return cols

    def best(self) -> set[tuple[str, str]]:
        """(row name, column) pairs holding the column-wise minimum of their block."""
        marked = set()
        for block in dict.fromkeys(r.block for r in self.rows):
            if block in self.reference_blocks:
                continue
            rows = [r for r in self.rows if r.block == block]
            for col in self.columns:
                lowest = min(round(r.values[col], 1) for r in rows)
                marked.update((r.name, col) for r in rows if round(r.values[col], 1) == lowest)
        return marked

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["block", "model", *self.columns])
        for r in self.rows:
            writer.writerow([r.block, r.name, *(f"{r.values[c]:.1f}" for c in self.columns)])
        return buf.getvalue()

    def to_text(self) -> str:
        best = self.best()
        header = ["", "Model", *self.columns]
        body = []
        for r in self.rows:
            cells = []
            for c in self.columns:
                cell = f"{r.values[c]:.1f}%"
                cells.append(f"**{cell}**" if (r.name, c) in best else cell)
            body.append([r.block, r.name, *cells])
        widths = [max(len(row[k]) for row in [header, *body]) for k in range(len(header))]
        fmt = lambda row: " | ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
        lines = [fmt(header), "-+-".join("-" * w for w in widths)]
        prev_block = None
        for row in body:
            if prev_block is not None and row[0] != prev_block:
                lines.append("-+-".join("-" * w for w in widths))
            lines.append(fmt(row))
            prev_block = row[0]
        return "\n".join(lines) + "\n"


def ablation_report(
    results: Mapping[str, CorpusResult],
    blocks: Mapping[str, str] | None = None,
    groups: Mapping[str, Sequence[str]] | None = None,
) -> AblationReport:
    """Build the report; row order follows the insertion order of ``results``."""
    if not results:
        raise ValueError("ablation report needs at least one configuration")
    speaker_sets = {name: frozenset(res.per_speaker) for name, res in results.items()}
    first = next(iter(speaker_sets.values()))
    bad = [name for name, s in speaker_sets.items() if s != first]
    if bad:
        raise ValueError(f"inconsistent speaker sets across configs: {', '.join(bad)}")
    speakers = sorted(first)
    groups = {g: list(m) for g, m in (groups or {"all": speakers}).items()}
    unknown = sorted({s for m in groups.values() for s in m} - set(speakers))
    if unknown:
        raise ValueError(f"group members without results: {', '.join(unknown)}")

    report = AblationReport(speakers, groups)
    for name, res in results.items():
        values = {s: res.per_speaker[s].per for s in speakers}
        for group, members in groups.items():
            sub = CorpusResult({s: res.per_speaker[s] for s in members})
            values[f"{group} avg"] = sub.speaker_average
            values[f"{group} pooled"] = sub.pooled.per
        block = (blocks or {}).get(name, "all")
        report.rows.append(ReportRow(name, block, values))
    return report
