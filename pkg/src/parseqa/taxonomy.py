"""Error taxonomy: element kinds, error levels, and the 28 leaf error types.

The taxonomy is loaded once from the checked-in manifest
(``data/error_types.jsonl``) and is immutable afterwards.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources


class ElementKind(str, Enum):
    TEXT = "text"
    TABLE = "table"
    EQUATION = "equation"


class SynthesisMode(str, Enum):
    RULE_BASED = "rule_based"
    LLM_GUIDED = "llm_guided"
    REAL_WORLD_SELECTION = "real_world_selection"


class ExclusivityClass(str, Enum):
    TYPE_LEVEL_EXCLUSIVE = "type_level_exclusive"
    COMPOSABLE = "composable"


@dataclass(frozen=True)
class ErrorLevel:
    id: str
    element: ElementKind
    name: str


@dataclass(frozen=True)
class ErrorType:
    id: str
    element: ElementKind
    level: ErrorLevel
    display_name: str
    definition: str
    synthesis_mode: SynthesisMode
    exclusivity_class: ExclusivityClass


class TaxonomyError(ValueError):
    pass


def _load_manifest():
    text = (
        resources.files("parseqa").joinpath("data/error_types.jsonl").read_text("utf-8")
    )
    types = []
    levels: dict[str, ErrorLevel] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        element = ElementKind(rec["element"])
        level = levels.setdefault(
            rec["level"], ErrorLevel(rec["level"], element, rec["level_name"])
        )
        if level.element is not element:
            raise TaxonomyError(f"level {level.id} spans element kinds")
        types.append(
            ErrorType(
                id=rec["id"],
                element=element,
                level=level,
                display_name=rec["display_name"],
                definition=rec["definition"],
                synthesis_mode=SynthesisMode(rec["synthesis_mode"]),
                exclusivity_class=ExclusivityClass(rec["exclusivity_class"]),
            )
        )
    ids = [t.id for t in types]
    if len(set(ids)) != len(ids):
        raise TaxonomyError("duplicate error-type ids in manifest")
    return tuple(types), levels


_TYPES, _LEVELS = _load_manifest()
_BY_ID = {t.id: t for t in _TYPES}
_BY_DISPLAY = {t.display_name.lower(): t for t in _TYPES}


def all_error_types(element: ElementKind | None = None) -> list[ErrorType]:
    """All error types in manifest (element, level, declaration) order."""
    if element is None:
        return list(_TYPES)
    return [t for t in _TYPES if t.element is element]


def all_error_levels(element: ElementKind | None = None) -> list[ErrorLevel]:
    levels = list(_LEVELS.values())
    if element is None:
        return levels
    return [lv for lv in levels if lv.element is element]


def error_type_by_id(type_id: str) -> ErrorType:
    try:
        return _BY_ID[type_id]
    except KeyError:
        raise TaxonomyError(f"unknown error type id: {type_id!r}") from None


def resolve_error_type(name: str) -> ErrorType | None:
    """Match a judge-emitted name against ids and display names, case-insensitively."""
    key = name.strip().lower()
    if key in _BY_ID:
        return _BY_ID[key]
    return _BY_DISPLAY.get(key)


@dataclass(frozen=True)
class CompatibilityPolicy:
    forbidden_pairs: frozenset[tuple[str, str]] = frozenset()
    max_errors_per_case: int = 4
    min_errors_per_multicase: int = 2

    def __post_init__(self):
        sym = set(self.forbidden_pairs)
        for a, b in self.forbidden_pairs:
            sym.add((b, a))
        object.__setattr__(self, "forbidden_pairs", frozenset(sym))


DEFAULT_POLICY = CompatibilityPolicy()


def compatible(a: ErrorType, b: ErrorType, policy: CompatibilityPolicy = DEFAULT_POLICY) -> bool:
    """Whether two error types may co-occur in one case."""
    if a.id == b.id:
        raise TaxonomyError("self-pairing: compatibility is defined for distinct types")
    if a.element is not b.element:
        return False
    if ExclusivityClass.TYPE_LEVEL_EXCLUSIVE in (a.exclusivity_class, b.exclusivity_class):
        return False
    return (a.id, b.id) not in policy.forbidden_pairs
