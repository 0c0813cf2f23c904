"""Model-guided synthesis: prompt rendering, response parsing with
label-soundness gates, and the real-world corruption filter.

Templates live as data files (one per error type) so they can be diffed
independently of code.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from importlib import resources

from .corpus import ElementRecord, ParsingCase, canonically_equal
from .perturb_latex import tokenize_latex, validate_balanced
from .perturb_table import TableError, parse_table
from .taxonomy import ElementKind, SynthesisMode, error_type_by_id

log = logging.getLogger(__name__)


class SynthesisError(ValueError):
    pass


class UnparseableResponse(SynthesisError):
    pass


class LabelUnsoundResponse(SynthesisError):
    pass


@dataclass
class SynthesisResponse:
    raw: str
    final_payload: str
    modification_details: str | None = None


def _template_text(error_type_id: str) -> str:
    path = resources.files("parseqa").joinpath(f"data/templates/{error_type_id}.txt")
    try:
        return path.read_text("utf-8")
    except FileNotFoundError:
        raise SynthesisError(f"no prompt template for {error_type_id!r}") from None


def render_prompt(
    error_type_id: str,
    record: ElementRecord,
    example_list: str = "(no examples provided)",
    candidate: str | None = None,
) -> str:
    etype = error_type_by_id(error_type_id)
    if etype.synthesis_mode is SynthesisMode.RULE_BASED:
        raise SynthesisError(f"{error_type_id} is rule-based; no prompt template")
    if not record.ground_truth:
        raise SynthesisError(f"record {record.id}: empty ground truth")
    template = _template_text(error_type_id)
    content = candidate if candidate is not None else record.ground_truth
    rendered = template.replace("{example_list}", example_list)
    rendered = rendered.replace("{ground_truth}", record.ground_truth)
    rendered = rendered.replace("{content}", content)
    unresolved = re.search(r"\{(content|ground_truth|example_list)\}", rendered)
    if unresolved:
        raise SynthesisError(f"unresolved placeholder {unresolved.group(0)} in template")
    return rendered


_FINAL_MARKERS = ("final text:", "final table:", "final formula:")
_DETAILS_RE = re.compile(r"Modification [Dd]etails:\s*(.*?)(?=Final )", re.DOTALL)


def _extract_final(raw: str) -> str:
    lower = raw.lower()
    best = -1
    marker_len = 0
    for marker in _FINAL_MARKERS:
        pos = lower.rfind(marker)
        if pos > best:
            best = pos
            marker_len = len(marker)
    if best < 0:
        raise UnparseableResponse("no Final Text/Table/formula marker in response")
    payload = raw[best + marker_len :].strip()
    if not payload:
        raise UnparseableResponse("empty payload after final marker")
    return payload


def parse_response(error_type_id: str, raw: str) -> SynthesisResponse:
    """Extract the final payload and apply the element-specific intent check."""
    etype = error_type_by_id(error_type_id)
    payload = _extract_final(raw)
    details = None
    m = _DETAILS_RE.search(raw)
    if m:
        details = m.group(1).strip()

    if etype.element is ElementKind.EQUATION or error_type_id == "inline_formula_style_error":
        balanced = validate_balanced(tokenize_latex(payload))
        if error_type_id == "displayed_formula_syntax_error":
            if balanced:
                raise LabelUnsoundResponse(
                    "syntax-error payload still balances; label would be unsound"
                )
        elif not balanced:
            raise LabelUnsoundResponse("formula payload fails balance check")
    elif etype.element is ElementKind.TABLE and error_type_id != "table_recognition_corruption":
        try:
            parse_table(payload)
        except TableError as exc:
            raise LabelUnsoundResponse(f"table payload unparseable: {exc}") from exc
    return SynthesisResponse(raw=raw, final_payload=payload, modification_details=details)


def synthesize_case(
    record: ElementRecord,
    error_type_id: str,
    client,
    case_id: str,
    max_attempts: int = 3,
    example_list: str = "(no examples provided)",
) -> ParsingCase | None:
    """One LLM-guided case; returns None (with a logged reason) after
    ``max_attempts`` unsound or unparseable responses."""
    prompt = render_prompt(error_type_id, record, example_list=example_list)
    last_reason = "no attempts made"
    for attempt in range(max_attempts):
        try:
            raw = client.complete_text(prompt, image_ref=record.image_ref or None)
        except Exception as exc:  # client failures skip the case after retries
            last_reason = f"client failure: {exc}"
            break
        try:
            response = parse_response(error_type_id, raw)
        except SynthesisError as exc:
            last_reason = str(exc)
            continue
        if canonically_equal(record.element, response.final_payload, record.ground_truth):
            last_reason = "payload equals ground truth under canonical normalization"
            continue
        return ParsingCase(
            id=case_id,
            element_record_id=record.id,
            element=record.element,
            ground_truth=record.ground_truth,
            prediction=response.final_payload,
            gold_errors={error_type_id},
            provenance="llm_guided",
            image_ref=record.image_ref,
            extras={"modification_details": response.modification_details},
        )
    log.warning("skipping case %s (%s): %s", case_id, error_type_id, last_reason)
    return None


_RESULT_RE = re.compile(r"\[Result\]\s*(Bad Table|Good Table|Unable to judge)", re.IGNORECASE)


def parse_filter_verdict(raw: str) -> str:
    matches = _RESULT_RE.findall(raw)
    if not matches:
        raise UnparseableResponse("no [Result] verdict in filter response")
    return matches[-1].lower()


def filter_corruption(
    record: ElementRecord,
    candidate_outputs: list[str],
    client,
) -> list[ParsingCase]:
    """Keep candidates the filter labels Bad Table; others are discarded."""
    selected = []
    for i, candidate in enumerate(candidate_outputs):
        prompt = render_prompt("table_recognition_corruption", record, candidate=candidate)
        try:
            raw = client.complete_text(prompt, image_ref=record.image_ref or None)
            verdict = parse_filter_verdict(raw)
        except Exception as exc:
            log.warning("corruption filter skipped candidate %d of %s: %s", i, record.id, exc)
            continue
        if verdict == "bad table":
            selected.append(
                ParsingCase(
                    id=f"{record.id}-corruption-{i}",
                    element_record_id=record.id,
                    element=record.element,
                    ground_truth=record.ground_truth,
                    prediction=candidate,
                    gold_errors={"table_recognition_corruption"},
                    provenance="real_world",
                    image_ref=record.image_ref,
                )
            )
    return selected
