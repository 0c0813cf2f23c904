"""Data model and JSONL persistence for element records, parsing cases,
and dataset statistics, plus the per-element canonical normalization that
defines "prediction equals ground truth".
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from typing import IO, Iterable

from .taxonomy import ElementKind, error_type_by_id
from . import perturb_latex, perturb_table


class CorpusError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass
class ElementRecord:
    id: str
    element: ElementKind
    image_ref: str
    ground_truth: str
    language_tags: set[str] = field(default_factory=set)
    source: str = ""

    def validate(self):
        if not self.ground_truth:
            raise CorpusError(f"record {self.id}: empty ground truth")
        if self.element is ElementKind.TABLE:
            perturb_table.parse_table(self.ground_truth)
        elif self.element is ElementKind.EQUATION:
            perturb_latex.tokenize_latex(self.ground_truth)


@dataclass
class PerturbationReceipt:
    error_type: str
    spans_touched: list[tuple[int, int]] = field(default_factory=list)
    rng_seed: int = 0
    parameters: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "error_type": self.error_type,
            "spans_touched": [list(s) for s in self.spans_touched],
            "rng_seed": self.rng_seed,
            "parameters": self.parameters,
        }

    @classmethod
    def from_json(cls, obj) -> "PerturbationReceipt":
        return cls(
            error_type=obj["error_type"],
            spans_touched=[tuple(s) for s in obj.get("spans_touched", [])],
            rng_seed=int(obj.get("rng_seed", 0)),
            parameters=obj.get("parameters", {}),
        )


@dataclass
class ParsingCase:
    id: str
    element_record_id: str
    element: ElementKind
    ground_truth: str
    prediction: str
    gold_errors: set[str] = field(default_factory=set)
    provenance: str = "rule_based"
    synthesis_trace: list[PerturbationReceipt] = field(default_factory=list)
    image_ref: str = ""
    extras: dict = field(default_factory=dict)

    @property
    def is_good(self) -> bool:
        return not self.gold_errors


def normalize_text(text: str) -> str:
    """Canonical text form: Unicode NFC, trailing whitespace trimmed."""
    lines = unicodedata.normalize("NFC", text).split("\n")
    return "\n".join(line.rstrip() for line in lines).rstrip()


def latex_token_signature(src: str) -> tuple[str, ...]:
    return tuple(
        t.lexeme
        for t in perturb_latex.tokenize_latex(src)
        if t.kind is not perturb_latex.TokenKind.SPACE
    )


def canonically_equal(element: ElementKind, a: str, b: str) -> bool:
    """Weakest defensible per-element equivalence: NFC text, parsed grid
    for tables, LaTeX token sequence for equations."""
    if element is ElementKind.TABLE:
        try:
            return perturb_table.grids_equal(
                perturb_table.parse_table(a), perturb_table.parse_table(b)
            )
        except perturb_table.TableError:
            return a == b
    if element is ElementKind.EQUATION:
        return latex_token_signature(a) == latex_token_signature(b)
    return normalize_text(a) == normalize_text(b)


_CASE_FIELDS = {
    "id", "element_record_id", "element", "ground_truth", "prediction",
    "gold_errors", "provenance", "synthesis_trace", "image_ref",
}


def case_to_json(case: ParsingCase) -> dict:
    obj = {
        "id": case.id,
        "element_record_id": case.element_record_id,
        "element": case.element.value,
        "ground_truth": case.ground_truth,
        "prediction": case.prediction,
        "gold_errors": sorted(case.gold_errors),
        "provenance": case.provenance,
        "synthesis_trace": [r.to_json() for r in case.synthesis_trace],
        "image_ref": case.image_ref,
    }
    obj.update(case.extras)
    return obj


def case_from_json(obj: dict, line: int | None = None) -> ParsingCase:
    try:
        element = ElementKind(obj["element"])
        gold = set(obj.get("gold_errors", []))
        for type_id in gold:
            t = error_type_by_id(type_id)
            if t.element is not element:
                raise CorpusError(
                    f"error type {type_id!r} not valid for element {element.value}",
                    line,
                )
        return ParsingCase(
            id=obj["id"],
            element_record_id=obj.get("element_record_id", obj["id"]),
            element=element,
            ground_truth=obj["ground_truth"],
            prediction=obj["prediction"],
            gold_errors=gold,
            provenance=obj.get("provenance", "manual"),
            synthesis_trace=[
                PerturbationReceipt.from_json(r) for r in obj.get("synthesis_trace", [])
            ],
            image_ref=obj.get("image_ref", ""),
            extras={k: v for k, v in obj.items() if k not in _CASE_FIELDS},
        )
    except CorpusError:
        raise
    except (KeyError, ValueError) as exc:
        raise CorpusError(str(exc), line) from exc


def read_cases(stream: IO[str]) -> list[ParsingCase]:
    cases = []
    for lineno, raw in enumerate(stream, start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"malformed JSON: {exc}", lineno) from exc
        if "_header" in obj:
            continue
        cases.append(case_from_json(obj, lineno))
    return cases


def write_cases(cases: Iterable[ParsingCase], stream: IO[str], header: dict | None = None):
    if header is not None:
        stream.write(json.dumps({"_header": header}, ensure_ascii=False) + "\n")
    for case in cases:
        stream.write(json.dumps(case_to_json(case), ensure_ascii=False) + "\n")


def read_records(stream: IO[str]) -> list[ElementRecord]:
    records = []
    for lineno, raw in enumerate(stream, start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"malformed JSON: {exc}", lineno) from exc
        if "_header" in obj:
            continue
        try:
            rec = ElementRecord(
                id=obj["id"],
                element=ElementKind(obj["element"]),
                image_ref=obj.get("image_ref", ""),
                ground_truth=obj["ground_truth"],
                language_tags=set(obj.get("language_tags", [])),
                source=obj.get("source", ""),
            )
        except (KeyError, ValueError) as exc:
            raise CorpusError(str(exc), lineno) from exc
        records.append(rec)
    return records


def write_records(records: Iterable[ElementRecord], stream: IO[str]):
    for rec in records:
        stream.write(
            json.dumps(
                {
                    "id": rec.id,
                    "element": rec.element.value,
                    "image_ref": rec.image_ref,
                    "ground_truth": rec.ground_truth,
                    "language_tags": sorted(rec.language_tags),
                    "source": rec.source,
                },
                ensure_ascii=False,
            )
            + "\n"
        )


@dataclass
class DatasetStats:
    total: int
    per_element: dict[str, int]
    good_fraction: float
    single_error_fraction: float
    multi_error_fraction: float
    per_error_type: dict[str, int]

    def to_json(self) -> dict:
        return {
            "total": self.total,
            "per_element": self.per_element,
            "good_fraction": self.good_fraction,
            "single_error_fraction": self.single_error_fraction,
            "multi_error_fraction": self.multi_error_fraction,
            "per_error_type": self.per_error_type,
        }


def compute_stats(cases: Iterable[ParsingCase]) -> DatasetStats:
    per_element: dict[str, int] = {}
    per_type: dict[str, int] = {}
    good = single = multi = total = 0
    for case in cases:
        total += 1
        per_element[case.element.value] = per_element.get(case.element.value, 0) + 1
        n = len(case.gold_errors)
        if n == 0:
            good += 1
        elif n == 1:
            single += 1
        else:
            multi += 1
        for t in case.gold_errors:
            per_type[t] = per_type.get(t, 0) + 1
    denom = total if total else 1
    return DatasetStats(
        total=total,
        per_element=per_element,
        good_fraction=good / denom if total else 0.0,
        single_error_fraction=single / denom if total else 0.0,
        multi_error_fraction=multi / denom if total else 0.0,
        per_error_type=per_type,
    )
