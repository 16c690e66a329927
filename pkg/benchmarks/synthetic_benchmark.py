"""Synthetic glyph benchmark.

Runs the full three-fold protocol twice on a generated corpus of ten glyph
classes and checks the ensemble against its members:

* ensemble top-1 at most one point below the best single classifier
* top-k accuracy nondecreasing in k
* union accuracy at least the best single classifier
* both runs produce the same report

Usage::

    python benchmarks/synthetic_benchmark.py
"""

from __future__ import annotations

import tempfile
import time
from pathlib import Path

from glyphvote.config import Settings
from glyphvote.dataset import (
    EvalReport,
    cross_validate,
    extract_all,
    format_report,
    load_dataset,
)
from glyphvote.synthetic import write_corpus

PER_CLASS = 60
CORPUS_SEED = 0
SETTINGS = Settings(epochs=100, workers=4)


def check(report: EvalReport, again: EvalReport) -> dict[str, bool]:
    top = report.top_k_accuracy
    best = report.best_classifier_accuracy
    return {
        "ensemble top-1 >= best individual - 1": top[0] >= best - 1.0,
        "top-k nondecreasing": list(top) == sorted(top),
        "union >= best individual": report.union_accuracy >= best,
        "deterministic": report.to_dict() == again.to_dict(),
    }


def run(root: Path, settings: Settings = SETTINGS) -> tuple[EvalReport, dict[str, bool]]:
    write_corpus(root, PER_CLASS, CORPUS_SEED)
    samples, labels = load_dataset(root)
    samples = extract_all(samples, settings.workers)
    report = cross_validate(samples, labels, settings)
    again = cross_validate(samples, labels, settings)
    return report, check(report, again)


if __name__ == "__main__":
    start = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp:
        report, checks = run(Path(tmp))
    elapsed = time.perf_counter() - start

    print(format_report(report))
    for name, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL':<6}{name}")
    print(f"\nTotal: {elapsed:.1f} s")
