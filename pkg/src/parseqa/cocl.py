"""Checklist prompt rendering and judge-output parsing.

The judge emits ``<answer>Goodcase.|Badcase.</answer>`` with zero or more
``<error_type>`` tags (optionally preceded by ``<think>``). Parsing is
total: malformed output never raises, it comes back with format_ok=False
so the reward function can score it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .taxonomy import ElementKind, all_error_levels, all_error_types, resolve_error_type


@dataclass
class JudgeOutput:
    raw: str
    verdict: str  # "good" | "bad"
    detected: set[str] = field(default_factory=set)
    format_ok: bool = True
    think_text: str | None = None
    unknown_types: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "detected": sorted(self.detected),
            "format_ok": self.format_ok,
            "think_text": self.think_text,
            "unknown_types": self.unknown_types,
        }


_THINK_RE = re.compile(r"<think>(.*?)</think>", re.DOTALL)
_ANSWER_RE = re.compile(r"<answer>\s*(Goodcase|Badcase)\.?\s*</answer>", re.IGNORECASE | re.DOTALL)
_ERROR_TYPE_RE = re.compile(r"<error_type>(.*?)</error_type>", re.DOTALL)


def parse_judge_output(raw: str) -> JudgeOutput:
    think = None
    m = _THINK_RE.search(raw)
    if m:
        think = m.group(1).strip()
    answer = _ANSWER_RE.search(raw)
    detected: set[str] = set()
    unknown: list[str] = []
    for tag in _ERROR_TYPE_RE.findall(raw):
        name = tag.strip()
        if not name:
            continue
        etype = resolve_error_type(name)
        if etype is None:
            unknown.append(name)
        else:
            detected.add(etype.id)

    if answer is None:
        # Fallback: treat as Bad with nothing detected, flagged unparseable.
        return JudgeOutput(
            raw=raw, verdict="bad", detected=set(), format_ok=False,
            think_text=think, unknown_types=unknown,
        )

    verdict = "good" if answer.group(1).lower() == "goodcase" else "bad"
    format_ok = not unknown
    if verdict == "good" and (detected or unknown):
        # Good with error tags is contradictory; keep evidence, flag format.
        format_ok = False
    return JudgeOutput(
        raw=raw, verdict=verdict, detected=detected, format_ok=format_ok,
        think_text=think, unknown_types=unknown,
    )


UNIFIED_INSTRUCTION = "Analyze the quality of OCR results for the given image."

_ELEMENT_NOUN = {
    ElementKind.TEXT: "text block",
    ElementKind.TABLE: "HTML table",
    ElementKind.EQUATION: "LaTeX formula",
}


def checklist_items(element: ElementKind) -> list[dict]:
    """One checklist item per error level, listing that level's leaf types."""
    items = []
    for level in all_error_levels(element):
        types = [t for t in all_error_types(element) if t.level.id == level.id]
        items.append(
            {
                "check_id": level.id,
                "prompt_text": (
                    f"Check for {level.name} issues: "
                    + "; ".join(f"{t.display_name} ({t.definition})" for t in types)
                ),
                "candidate_error_types": {t.id for t in types},
            }
        )
    return items


def render_checklist(element: ElementKind, parsed_output: str) -> str:
    """Render the per-element checklist prompt around the parsed output."""
    if not isinstance(element, ElementKind):
        raise ValueError(f"unknown element: {element!r}")
    lines = [
        UNIFIED_INSTRUCTION,
        f"The content below is the parsing result of a {_ELEMENT_NOUN[element]}.",
        "Walk through every checklist item in order, compare the result with the",
        "image, and record a finding for each item before giving the final answer.",
        "",
    ]
    for i, item in enumerate(checklist_items(element), start=1):
        lines.append(f"{i}. {item['prompt_text']}")
    lines += [
        "",
        "If any error is found, answer <answer>Badcase.</answer> followed by one",
        "<error_type>error type name</error_type> tag per detected error type.",
        "If the result is error-free, answer <answer>Goodcase.</answer>",
        "",
        f"<ocr_content>{parsed_output}</ocr_content>",
    ]
    return "\n".join(lines)
