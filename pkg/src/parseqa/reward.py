"""Asymmetric branch reward and the plain-F1 ablation reward.

Bad-case gold: format + per-case F1 + recall (range [0, 3]).
Good-case gold: format + precision (range [0, 2]); an empty prediction on
a good case counts as perfect restraint (precision 1), any detection
zeroes it.
"""

from __future__ import annotations

from dataclasses import dataclass

from .cocl import JudgeOutput


@dataclass(frozen=True)
class RewardScore:
    branch: str  # "good" | "bad"
    s_format: float
    s_f1: float = 0.0
    s_recall: float = 0.0
    s_precision: float = 0.0

    @property
    def total(self) -> float:
        if self.branch == "bad":
            return self.s_format + self.s_f1 + self.s_recall
        return self.s_format + self.s_precision

    def to_json(self) -> dict:
        return {
            "branch": self.branch,
            "s_format": self.s_format,
            "s_f1": self.s_f1,
            "s_recall": self.s_recall,
            "s_precision": self.s_precision,
            "total": self.total,
        }


def _set_scores(detected: set[str], gold: set[str]):
    tp = len(detected & gold)
    precision = tp / len(detected) if detected else 0.0
    recall = tp / len(gold) if gold else 0.0
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def asymmetric_reward(gold_errors: set[str], output: JudgeOutput) -> RewardScore:
    s_format = 1.0 if output.format_ok else 0.0
    detected = output.detected
    if gold_errors:
        _, recall, f1 = _set_scores(detected, gold_errors)
        # A bad verdict with no tags earns no set credit, only format.
        return RewardScore(branch="bad", s_format=s_format, s_f1=f1, s_recall=recall)
    precision = 1.0 if not detected and output.verdict == "good" else 0.0
    return RewardScore(branch="good", s_format=s_format, s_precision=precision)


def f1_reward(gold_errors: set[str], output: JudgeOutput) -> RewardScore:
    s_format = 1.0 if output.format_ok else 0.0
    detected = output.detected
    if not gold_errors:
        f1 = 1.0 if not detected and output.verdict == "good" else 0.0
        return RewardScore(branch="good", s_format=s_format, s_precision=f1)
    _, _, f1 = _set_scores(detected, gold_errors)
    return RewardScore(branch="bad", s_format=s_format, s_f1=f1)
