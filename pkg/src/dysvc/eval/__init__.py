from .per import (
    CorpusResult,
    PerResult,
    PhonemeSequence,
    edit_align,
    evaluate_corpus,
    read_transcripts,
    write_transcripts,
)
from .recognizer import Inventory, build_inventory, toy_recognizer
from .report import AblationReport, ablation_report

__all__ = [
    "AblationReport",
    "CorpusResult",
    "Inventory",
    "PerResult",
    "PhonemeSequence",
    "ablation_report",
    "build_inventory",
    "edit_align",
    "evaluate_corpus",
    "read_transcripts",
    "toy_recognizer",
    "write_transcripts",
]
