"""Alignment between judge verdicts and objective metrics: bucket cases by
detected-error count (and single-error type) and report per-bucket means.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..cocl import JudgeOutput
from ..corpus import ParsingCase
from ..taxonomy import ElementKind
from .kernels import edit_distance_norm
from .teds import teds


@dataclass
class Bucket:
    count: int = 0
    total: float = 0.0

    @property
    def mean(self) -> float:
        return self.total / self.count if self.count else 0.0

    def to_json(self):
        return {"count": self.count, "mean": self.mean}


@dataclass
class AlignmentReport:
    metric_name: str
    buckets: dict[str, Bucket] = field(default_factory=dict)
    type_buckets: dict[str, Bucket] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "metric": self.metric_name,
            "buckets": {k: v.to_json() for k, v in self.buckets.items()},
            "type_buckets": {k: v.to_json() for k, v in self.type_buckets.items()},
        }

    def render_table(self) -> str:
        rows = [f"{'bucket':<42}{'n':>7}{'mean ' + self.metric_name:>22}"]
        for group in (self.buckets, self.type_buckets):
            for key in sorted(group):
                b = group[key]
                rows.append(f"{key:<42}{b.count:>7}{b.mean:>22.4f}")
        return "\n".join(rows)


def default_metric(case: ParsingCase) -> float:
    """Distance for text/equation (lower is better), TEDS for tables
    (higher is better); axes labeled by metric_name in the report."""
    if case.element is ElementKind.TABLE:
        return teds(case.prediction, case.ground_truth)
    return edit_distance_norm(case.prediction, case.ground_truth)


def alignment_report(
    cases_with_judgments: list[tuple[ParsingCase, JudgeOutput]],
    metric=None,
    metric_name: str = "metric",
) -> AlignmentReport:
    metric = metric or default_metric
    report = AlignmentReport(metric_name=metric_name)
    for case, judgment in cases_with_judgments:
        value = metric(case)
        n = len(judgment.detected)
        key = "good" if judgment.verdict == "good" and not n else f"bad_{min(n, 4)}_errors"
        report.buckets.setdefault(key, Bucket())
        report.buckets[key].count += 1
        report.buckets[key].total += value
        if n == 1:
            type_key = next(iter(judgment.detected))
            report.type_buckets.setdefault(type_key, Bucket())
            report.type_buckets[type_key].count += 1
            report.type_buckets[type_key].total += value
    return report
