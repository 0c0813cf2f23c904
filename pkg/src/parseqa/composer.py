"""Builds Good / single-error / multi-error cases to a target distribution,
enforcing pairwise compatibility and span disjointness between injectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import perturb_table, perturb_text
from .corpus import ElementRecord, ParsingCase, PerturbationReceipt
from .perturb_text import PerturbError
from .rng import derive_seed, make_rng
from .taxonomy import (
    CompatibilityPolicy,
    DEFAULT_POLICY,
    ElementKind,
    SynthesisMode,
    all_error_types,
    compatible,
    error_type_by_id,
)

# Application order: type-level rewrites first, then structural edits, then
# span edits, then character/format noise, so span accounting is well defined.
_LEVEL_RANK = {
    "text_type_level": 0,
    "table_integrity_level": 1,
    "table_structure_level": 1,
    "text_span_level": 2,
    "text_inline_formula_level": 2,
    "text_format_level": 3,
    "text_character_level": 3,
    "table_content_level": 3,
    "equation_type_level": 0,
    "equation_integrity_level": 1,
    "equation_content_level": 3,
}

MAX_ATTEMPTS_PER_TYPE = 5


class ComposeError(ValueError):
    pass


def _table_injector(type_id, op):
    def inject(html, rng):
        grid = perturb_table.parse_table(html)
        new_grid, params = op(grid, rng)
        receipt = PerturbationReceipt(
            error_type=type_id,
            spans_touched=[],
            rng_seed=0,
            parameters=params,
        )
        return perturb_table.serialize_table(new_grid), receipt

    return inject


_TABLE_INJECTORS = {
    "missing_table_row_column": _table_injector(
        "missing_table_row_column", perturb_table.delete_rows_columns
    ),
    "table_cell_lost": _table_injector("table_cell_lost", perturb_table.delete_cells),
}


def apply_error(
    type_id: str,
    element: ElementKind,
    prediction: str,
    rng: np.random.Generator,
    donor_pool: list[tuple[str, str]] | None = None,
):
    """Apply one rule-based injector to the current prediction."""
    etype = error_type_by_id(type_id)
    if etype.element is not element:
        raise ComposeError(f"{type_id} does not apply to {element.value} elements")
    if etype.synthesis_mode is not SynthesisMode.RULE_BASED:
        raise ComposeError(f"{type_id} is not rule-based; use the llm synthesis path")
    if type_id == "text_redundancy":
        if not donor_pool:
            raise PerturbError("text_redundancy requires a donor pool")
        return perturb_text.text_redundancy(prediction, donor_pool, rng)
    if type_id in _TABLE_INJECTORS:
        return _TABLE_INJECTORS[type_id](prediction, rng)
    injector = perturb_text.RULE_BASED_TEXT_INJECTORS.get(type_id)
    if injector is None:
        raise ComposeError(f"no rule-based injector for {type_id}")
    return injector(prediction, rng)


def rule_based_types(element: ElementKind) -> list[str]:
    return [
        t.id
        for t in all_error_types(element)
        if t.synthesis_mode is SynthesisMode.RULE_BASED
    ]


def _shift_intervals(intervals, edits):
    """Map dirty intervals through splice edits applied to the same string."""
    out = []
    for lo, hi in intervals:
        delta = 0
        for s, e, repl in edits:
            if e <= lo:
                delta += len(repl) - (e - s)
        out.append((lo + delta, hi + delta))
    for s, e, repl in edits:
        delta = 0
        for s2, e2, repl2 in edits:
            if e2 <= s:
                delta += len(repl2) - (e2 - s2)
        out.append((s + delta, s + delta + len(repl)))
    return out


def _overlaps(edits, dirty):
    for s, e, _ in edits:
        hi = max(e, s + 1)  # pure insertions still occupy a point
        for lo, dhi in dirty:
            if s < dhi and lo < hi:
                return True
    return False


def compose_case(
    record: ElementRecord,
    chosen_types: list[str],
    dataset_seed: int,
    case_id: str,
    policy: CompatibilityPolicy = DEFAULT_POLICY,
    donor_pool: list[tuple[str, str]] | None = None,
) -> ParsingCase:
    """Materialize one case: apply injectors in canonical order, tracking
    receipts; overlapping draws are retried then dropped."""
    etypes = [error_type_by_id(t) for t in chosen_types]
    for i, a in enumerate(etypes):
        for b in etypes[i + 1 :]:
            if not compatible(a, b, policy):
                raise ComposeError(f"incompatible pair: {a.id}, {b.id}")
    if len(etypes) > policy.max_errors_per_case:
        raise ComposeError("too many error types for policy")
    for t in etypes:
        if t.element is not record.element:
            raise ComposeError(f"infeasible case: {t.id} invalid for {record.element.value}")

    ordered = sorted(etypes, key=lambda t: (_LEVEL_RANK[t.level.id], t.id))
    prediction = record.ground_truth
    trace: list[PerturbationReceipt] = []
    applied: list[str] = []
    dropped: list[str] = []
    dirty: list[tuple[int, int]] = []

    for etype in ordered:
        success = False
        for attempt in range(MAX_ATTEMPTS_PER_TYPE):
            seed = derive_seed(dataset_seed, case_id, etype.id, str(attempt))
            try:
                new_pred, receipt = apply_error(
                    etype.id, record.element, prediction, make_rng(seed), donor_pool
                )
            except (PerturbError, perturb_table.TableError, ComposeError):
                break  # precondition failure will not improve with a reseed
            edits = [tuple(e) for e in receipt.parameters.get("edits", [])]
            if record.element is ElementKind.TEXT and _overlaps(edits, dirty):
                continue
            receipt.rng_seed = seed
            if record.element is ElementKind.TEXT:
                dirty = _shift_intervals(dirty, edits)
            prediction = new_pred
            trace.append(receipt)
            applied.append(etype.id)
            success = True
            break
        if not success:
            dropped.append(etype.id)

    if chosen_types and not applied and dropped:
        raise ComposeError(f"infeasible case: all types dropped ({dropped})")

    extras = {"dropped_types": dropped} if dropped else {}
    return ParsingCase(
        id=case_id,
        element_record_id=record.id,
        element=record.element,
        ground_truth=record.ground_truth,
        prediction=prediction,
        gold_errors=set(applied),
        provenance="rule_based" if applied else "rule_based",
        synthesis_trace=trace,
        image_ref=record.image_ref,
        extras=extras,
    )


def replay_trace(
    ground_truth: str,
    element: ElementKind,
    trace: list[PerturbationReceipt],
    donor_pool: list[tuple[str, str]] | None = None,
) -> str:
    """Re-run a synthesis trace over the ground truth; byte-identical by
    construction for rule-based provenance."""
    prediction = ground_truth
    for receipt in trace:
        prediction, _ = apply_error(
            receipt.error_type, element, prediction, make_rng(receipt.rng_seed), donor_pool
        )
    return prediction


@dataclass
class DistributionTarget:
    good_fraction: float
    single_fraction: float
    multi_fraction: float
    multi_size_weights: dict[int, float] = field(
        default_factory=lambda: {2: 0.6, 3: 0.3, 4: 0.1}
    )
    per_type_weights: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        total = self.good_fraction + self.single_fraction + self.multi_fraction
        if abs(total - 1.0) > 1e-9:
            raise ComposeError(f"fractions must sum to 1, got {total}")
        if any(w < 0 for w in self.multi_size_weights.values()):
            raise ComposeError("negative multi-size weight")
        if not any(self.multi_size_weights.values()):
            raise ComposeError("all multi-size weights zero")
        if any(k not in (2, 3, 4) for k in self.multi_size_weights):
            raise ComposeError("multi-case sizes must be in {2, 3, 4}")


# Good/single/multi mix of the 200k-scale dataset recipe.
PAPER_TARGET = DistributionTarget(
    good_fraction=0.1883, single_fraction=0.6517, multi_fraction=0.1600
)


def _type_weight(target: DistributionTarget, type_id: str) -> float:
    return target.per_type_weights.get(type_id, 1.0)


def sample_plan(
    records: list[ElementRecord],
    target: DistributionTarget,
    rng: np.random.Generator,
    n: int | None = None,
    rule_based_only: bool = False,
    policy: CompatibilityPolicy = DEFAULT_POLICY,
) -> list[tuple[str, list[str]]]:
    """Draw (record id, error type list) plans matching the target mix."""
    if not records:
        raise ComposeError("no records to plan over")
    n = len(records) if n is None else n

    def feasible_types(element):
        types = all_error_types(element)
        if rule_based_only:
            types = [t for t in types if t.synthesis_mode is SynthesisMode.RULE_BASED]
        return types

    def composable_types(element):
        return [
            t
            for t in feasible_types(element)
            if t.exclusivity_class.value == "composable"
        ]

    if target.single_fraction > 0 and not any(
        feasible_types(r.element) for r in records
    ):
        raise ComposeError("infeasible target: no feasible single-error types")
    multi_capable = [r for r in records if len(composable_types(r.element)) >= 2]
    if target.multi_fraction > 0 and not multi_capable:
        raise ComposeError("infeasible target: no element with >=2 composable types")

    sizes = sorted(target.multi_size_weights)
    size_w = np.array([target.multi_size_weights[s] for s in sizes], dtype=float)
    size_w /= size_w.sum()

    plans: list[tuple[str, list[str]]] = []
    probs = np.array(
        [target.good_fraction, target.single_fraction, target.multi_fraction]
    )
    for _ in range(n):
        category = int(rng.choice(3, p=probs))
        if category == 0:
            rec = records[int(rng.integers(len(records)))]
            plans.append((rec.id, []))
            continue
        if category == 1:
            candidates = [r for r in records if feasible_types(r.element)]
            rec = candidates[int(rng.integers(len(candidates)))]
            types = feasible_types(rec.element)
            w = np.array([_type_weight(target, t.id) for t in types], dtype=float)
            if w.sum() <= 0:
                raise ComposeError("infeasible target: zero weights for element")
            t = types[int(rng.choice(len(types), p=w / w.sum()))]
            plans.append((rec.id, [t.id]))
            continue
        rec = multi_capable[int(rng.integers(len(multi_capable)))]
        pool = composable_types(rec.element)
        size = min(int(sizes[int(rng.choice(len(sizes), p=size_w))]), len(pool))
        size = max(size, policy.min_errors_per_multicase)
        w = np.array([_type_weight(target, t.id) for t in pool], dtype=float)
        if w.sum() <= 0:
            w = np.ones(len(pool))
        chosen = rng.choice(len(pool), size=size, replace=False, p=w / w.sum())
        plans.append((rec.id, [pool[int(i)].id for i in chosen]))
    return plans
