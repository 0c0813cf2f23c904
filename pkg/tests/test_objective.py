import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parseqa.cocl import JudgeOutput
from parseqa.corpus import ParsingCase
from parseqa.objective import (
    alignment_report,
    default_metric,
    edit_distance_norm,
    levenshtein,
    teds,
)
from parseqa.objective.teds import (
    postorder,
    rename_cost,
    table_tree,
    tree_distance,
)
from parseqa.perturb_table import parse_table
from parseqa.rng import make_rng
from parseqa.taxonomy import ElementKind

from conftest import TABLE, random_table_html
from oracles import levenshtein_oracle, tree_distance_oracle


def test_levenshtein_basics():
    assert levenshtein("", "") == 0
    assert levenshtein("abc", "abc") == 0
    assert levenshtein("kitten", "sitting") == 3
    assert levenshtein("", "abc") == 3
    assert levenshtein("flaw", "lawn") == 2


def test_levenshtein_unicode_scalars():
    assert levenshtein("café", "cafe") == 1
    assert levenshtein("中文", "中國文") == 1


def test_edit_distance_norm_bounds_and_empties():
    assert edit_distance_norm("", "") == 0.0
    assert edit_distance_norm("abc", "") == 1.0
    assert edit_distance_norm("abc", "abc") == 0.0
    assert 0.0 < edit_distance_norm("abc", "abd") < 1.0


@given(st.text(max_size=40), st.text(max_size=40))
@settings(max_examples=200, deadline=None)
def test_levenshtein_matches_oracle(a, b):
    assert levenshtein(a, b) == levenshtein_oracle(a, b)


@given(st.text(max_size=30), st.text(max_size=30))
@settings(max_examples=100, deadline=None)
def test_levenshtein_symmetric_and_triangle(a, b):
    assert levenshtein(a, b) == levenshtein(b, a)
    assert abs(len(a) - len(b)) <= levenshtein(a, b) <= max(len(a), len(b))


def _small_random_table(rng):
    # small enough that the tree stays under ~12 nodes for the brute force
    html = random_table_html(rng, max_rows=2, max_cols=3)
    return html


def test_teds_identity_on_500_random_tables():
    for seed in range(500):
        html = random_table_html(make_rng(seed))
        assert teds(html, html) == pytest.approx(1.0)
        assert teds(html, html, structure_only=True) == pytest.approx(1.0)


def test_teds_unparseable_prediction_scores_zero():
    assert teds("not a table", TABLE) == 0.0


def test_teds_gold_must_parse():
    from parseqa.perturb_table import TableError

    with pytest.raises(TableError):
        teds(TABLE, "not a table")


def test_teds_in_unit_interval_and_sensitive():
    a = "<table><tr><td>x</td><td>y</td></tr></table>"
    b = "<table><tr><td>x</td><td>z</td></tr><tr><td>q</td><td>r</td></tr></table>"
    v = teds(a, b)
    assert 0.0 < v < 1.0


def test_tree_distance_matches_brute_force_100_pairs():
    checked = 0
    seed = 0
    while checked < 100:
        rng = make_rng(10_000 + seed)
        seed += 1
        t1 = table_tree(parse_table(_small_random_table(rng)))
        t2 = table_tree(parse_table(_small_random_table(rng)))
        if len(postorder(t1)) > 12 or len(postorder(t2)) > 12:
            continue
        for structure_only in (False, True):
            got = tree_distance(t1, t2, structure_only=structure_only)
            want = tree_distance_oracle(
                t1, t2, lambda a, b: rename_cost(a, b, structure_only)
            )
            assert abs(got - want) <= 1e-9, (seed, structure_only)
        checked += 1


def test_steds_geq_teds_when_structures_identical():
    for seed in range(120):
        rng = make_rng(seed)
        gt = random_table_html(rng)
        grid = parse_table(gt)
        # same structure, one cell text changed
        import copy

        from parseqa.perturb_table import serialize_table

        mutated = copy.deepcopy(grid)
        cells = mutated.cells()
        cells[int(rng.integers(len(cells)))].text = "MUTATED"
        pred = serialize_table(mutated)
        s = teds(pred, gt, structure_only=True)
        f = teds(pred, gt, structure_only=False)
        assert s >= f - 1e-12
        assert s == pytest.approx(1.0)


def test_table_tree_shape():
    tree = table_tree(parse_table(TABLE))
    assert tree.tag == "table"
    assert all(c.tag == "tr" for c in tree.children)
    assert len(postorder(tree)) == 1 + 4 + 12  # table + rows + cells


def _case(case_id, element, gt, pred):
    return ParsingCase(
        id=case_id,
        element_record_id=case_id,
        element=element,
        ground_truth=gt,
        prediction=pred,
    )


def test_default_metric_dispatch():
    text_case = _case("t", ElementKind.TEXT, "abc", "abd")
    table_case = _case("tab", ElementKind.TABLE, TABLE, TABLE)
    assert 0 < default_metric(text_case) < 1
    assert default_metric(table_case) == pytest.approx(1.0)


def test_alignment_report_buckets_partition_input():
    pairs = []
    for i in range(10):
        case = _case(f"g{i}", ElementKind.TEXT, "same", "same")
        pairs.append((case, JudgeOutput(raw="", verdict="good", detected=set())))
    for i in range(5):
        case = _case(f"b{i}", ElementKind.TEXT, "same", "different")
        pairs.append(
            (case, JudgeOutput(raw="", verdict="bad", detected={"text_repetition"}))
        )
    report = alignment_report(pairs, metric_name="edit-distance")
    assert sum(b.count for b in report.buckets.values()) == len(pairs)
    assert report.buckets["good"].count == 10
    assert report.buckets["good"].mean == 0.0
    assert report.buckets["bad_1_errors"].count == 5
    assert report.buckets["bad_1_errors"].mean > 0.0
    assert report.type_buckets["text_repetition"].count == 5
    assert "edit-distance" in report.render_table()


def test_numba_and_fallback_agree():
    import importlib
    import os
    import subprocess
    import sys

    code = (
        "from parseqa.objective import levenshtein, teds\n"
        f"print(levenshtein('kitten', 'sitting'), teds({TABLE!r}, {TABLE!r}))"
    )
    env = dict(os.environ, PARSEQA_NO_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", code], capture_output=True, text=True, env=env
    )
    assert out.returncode == 0, out.stderr
    assert out.stdout.split() == ["3", "1.0"]
