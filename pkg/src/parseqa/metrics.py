"""Case-level and error-type-level evaluation, pass@K, and report building.

Conventions (documented because they change numbers): the positive class
for case F1 is the Bad case; type precision/recall/F1 are micro-averaged
over (case, type) pairs; degenerate 0/0 ratios are 0 and flagged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .cocl import JudgeOutput
from .taxonomy import ElementKind


class MetricsError(ValueError):
    pass


@dataclass
class CaseJudgment:
    case_id: str
    gold_errors: set[str]
    predictions: list[JudgeOutput]
    element: ElementKind = ElementKind.TEXT

    def __post_init__(self):
        if not self.predictions:
            raise MetricsError(f"case {self.case_id}: no predictions")


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def case_f1(judgments: list[CaseJudgment]) -> float:
    """Binary F1, Bad case positive; 0 on degenerate denominators."""
    if not judgments:
        raise MetricsError("empty judgment list")
    tp = fp = fn = 0
    for j in judgments:
        gold_bad = bool(j.gold_errors)
        pred = j.predictions[0]
        pred_bad = pred.verdict == "bad" or bool(pred.detected)
        if pred_bad and gold_bad:
            tp += 1
        elif pred_bad:
            fp += 1
        elif gold_bad:
            fn += 1
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    return _f1(p, r)


def _detected_union(j: CaseJudgment, k: int) -> set[str]:
    if len(j.predictions) < k:
        raise MetricsError(f"case {j.case_id}: fewer than {k} predictions")
    out: set[str] = set()
    for pred in j.predictions[:k]:
        out |= pred.detected
    return out


def _micro_prf(pairs: list[tuple[set[str], set[str]]]):
    tp = sum(len(pred & gold) for pred, gold in pairs)
    n_pred = sum(len(pred) for pred, _ in pairs)
    n_gold = sum(len(gold) for _, gold in pairs)
    p = tp / n_pred if n_pred else 0.0
    r = tp / n_gold if n_gold else 0.0
    return p, r, _f1(p, r)


def type_prf(judgments: list[CaseJudgment]) -> tuple[float, float, float]:
    """Micro-averaged error-type precision/recall/F1 on the first sample."""
    pairs = [(j.predictions[0].detected, j.gold_errors) for j in judgments]
    return _micro_prf(pairs)


def type_prf_macro(judgments: list[CaseJudgment]) -> tuple[float, float, float]:
    """Macro over error types present in gold or predictions."""
    types = set()
    for j in judgments:
        types |= j.gold_errors | j.predictions[0].detected
    if not types:
        return 0.0, 0.0, 0.0
    ps, rs, fs = [], [], []
    for t in sorted(types):
        tp = sum(
            1 for j in judgments if t in j.gold_errors and t in j.predictions[0].detected
        )
        n_pred = sum(1 for j in judgments if t in j.predictions[0].detected)
        n_gold = sum(1 for j in judgments if t in j.gold_errors)
        p = tp / n_pred if n_pred else 0.0
        r = tp / n_gold if n_gold else 0.0
        ps.append(p)
        rs.append(r)
        fs.append(_f1(p, r))
    n = len(types)
    return sum(ps) / n, sum(rs) / n, sum(fs) / n


def pass_at_k(
    judgments: list[CaseJudgment], k: int, best_of: bool = False
) -> tuple[float, float, float]:
    """Union-of-K scoring (default) or best-of-K by per-case F1."""
    if best_of:
        pairs = []
        for j in judgments:
            if len(j.predictions) < k:
                raise MetricsError(f"case {j.case_id}: fewer than {k} predictions")
            best = max(
                j.predictions[:k],
                key=lambda pred: _case_pair_f1(pred.detected, j.gold_errors),
            )
            pairs.append((best.detected, j.gold_errors))
    else:
        pairs = [(_detected_union(j, k), j.gold_errors) for j in judgments]
    p, r, f = _micro_prf(pairs)
    return r, p, f


def _case_pair_f1(pred: set[str], gold: set[str]) -> float:
    if not pred and not gold:
        return 1.0
    tp = len(pred & gold)
    p = tp / len(pred) if pred else 0.0
    r = tp / len(gold) if gold else 0.0
    return _f1(p, r)


@dataclass
class ElementReport:
    n_cases: int
    case_f1: float
    type_precision: float
    type_recall: float
    type_f1: float
    type_precision_macro: float
    type_recall_macro: float
    type_f1_macro: float
    confusion: dict[str, dict[str, int]]
    format_failures: int
    degenerate: bool = False

    def to_json(self) -> dict:
        return self.__dict__.copy()


@dataclass
class EvalReport:
    per_element: dict[str, ElementReport] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {k: v.to_json() for k, v in self.per_element.items()}

    def render_table(self) -> str:
        header = f"{'element':<10}{'cases':>7}{'case F1':>9}{'recall':>8}{'F1':>8}{'prec':>8}{'fmt-fail':>10}"
        rows = [header, "-" * len(header)]
        for name, rep in self.per_element.items():
            rows.append(
                f"{name:<10}{rep.n_cases:>7}{rep.case_f1:>9.4f}{rep.type_recall:>8.4f}"
                f"{rep.type_f1:>8.4f}{rep.type_precision:>8.4f}{rep.format_failures:>10}"
            )
        return "\n".join(rows)


def _confusion(judgments: list[CaseJudgment]) -> dict[str, dict[str, int]]:
    out: dict[str, dict[str, int]] = {}
    for j in judgments:
        pred = j.predictions[0].detected
        for t in pred | j.gold_errors:
            cell = out.setdefault(t, {"tp": 0, "fp": 0, "fn": 0})
            if t in pred and t in j.gold_errors:
                cell["tp"] += 1
            elif t in pred:
                cell["fp"] += 1
            else:
                cell["fn"] += 1
    return out


def build_report(judgments: list[CaseJudgment]) -> EvalReport:
    report = EvalReport()
    for element in ElementKind:
        group = [j for j in judgments if j.element is element]
        if not group:
            report.per_element[element.value] = ElementReport(
                0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, {}, 0, degenerate=True
            )
            continue
        p, r, f = type_prf(group)
        mp, mr, mf = type_prf_macro(group)
        report.per_element[element.value] = ElementReport(
            n_cases=len(group),
            case_f1=case_f1(group),
            type_precision=p,
            type_recall=r,
            type_f1=f,
            type_precision_macro=mp,
            type_recall_macro=mr,
            type_f1_macro=mf,
            confusion=_confusion(group),
            format_failures=sum(
                1 for j in group if not j.predictions[0].format_ok
            ),
        )
    return report
