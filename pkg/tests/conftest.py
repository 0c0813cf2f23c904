import json
from pathlib import Path

import pytest

from parseqa.corpus import ElementRecord
from parseqa.taxonomy import ElementKind

GOLDEN_DIR = Path(__file__).parent / "golden"

PARA = (
    "The quick brown fox jumps over the lazy dog. It was a fine day, and the sun "
    "shone brightly over the hills.\nA second paragraph follows here, with more "
    "text to perturb; it has commas, semicolons, and periods. End of sample."
)
TABLE = (
    "<table><tr><th>Name</th><th>Score</th><th>Rank</th></tr>"
    "<tr><td>Alice</td><td>91</td><td>1</td></tr>"
    "<tr><td>Bob</td><td>84</td><td>2</td></tr>"
    "<tr><td>Eve</td><td>77</td><td>3</td></tr></table>"
)
EQUATION = "\\frac{a + b}{c} = \\sqrt{x^{2} + y^{2}} - \\sum_{i=1}^{n} \\alpha_{i}"

# One well-formed input per rule-based error type (each satisfies the
# injector's precondition for every seed).
RULE_FIXTURES = {
    "text_misrecognized_as_title": "A concise heading about the results",
    "paragraph_format_error": PARA,
    "list_format_error": "1. First item of the list\n2. Second item follows\n3. Third item ends here",
    "title_format_error": "## Methods and Materials",
    "superscript_citation_error": "Prior work$^{1}$ showed this effect$^{2}$ in detail.",
    "text_repetition": PARA,
    "text_redundancy": PARA,
    "text_segment_lost": PARA,
    "text_characters_lost": PARA,
    "text_punctuation_error": PARA,
    "extra_missing_spaces": PARA,
    "inline_formula_missed": (
        "The energy relation $E = m c^{2}$ holds, while $a^{2} + b^{2} = c^{2}$ is older."
    ),
    "inline_formula_error": (
        "The energy relation $E = m c^{2} + \\alpha \\beta \\gamma$ holds in vacuum."
    ),
    "missing_table_row_column": TABLE,
    "table_cell_lost": TABLE,
}

DONOR_POOL = [
    ("d1", "Extra donor sentence one, quite long and descriptive."),
    ("d2", "Another donor line with content."),
]


def element_of(type_id: str) -> ElementKind:
    from parseqa.taxonomy import error_type_by_id

    return error_type_by_id(type_id).element


@pytest.fixture
def sample_records():
    return [
        ElementRecord("t1", ElementKind.TEXT, "", PARA),
        ElementRecord(
            "t2",
            ElementKind.TEXT,
            "",
            "1. First item in the list\n2. Second item follows\n3. Third item ends, "
            "with punctuation everywhere. Also an inline formula "
            "$E = m c^{2} + \\alpha \\beta$ sits here.",
        ),
        ElementRecord("tab1", ElementKind.TABLE, "", TABLE),
        ElementRecord("eq1", ElementKind.EQUATION, "", EQUATION),
    ]


def load_golden(name: str):
    return json.loads((GOLDEN_DIR / name).read_text("utf-8"))


def random_table_html(rng, max_rows=4, max_cols=4, span_prob=0.15):
    """Random well-formed table HTML (uniform grid; occasional spans built
    by merging a rectangle of cells)."""
    rows = int(rng.integers(1, max_rows + 1))
    cols = int(rng.integers(1, max_cols + 1))
    words = ["a", "bb", "c1", "", "x y", "42"]
    grid = [[words[int(rng.integers(len(words)))] for _ in range(cols)] for _ in range(rows)]
    html = ["<table>"]
    skip = set()
    for r in range(rows):
        html.append("<tr>")
        for c in range(cols):
            if (r, c) in skip:
                continue
            cs = rs = 1
            if rng.random() < span_prob and c + 1 < cols and (r, c + 1) not in skip:
                cs = 2
                skip.add((r, c + 1))
            elif rng.random() < span_prob and r + 1 < rows and (r + 1, c) not in skip:
                rs = 2
                skip.add((r + 1, c))
            attrs = ""
            if cs > 1:
                attrs += f' colspan="{cs}"'
            if rs > 1:
                attrs += f' rowspan="{rs}"'
            tag = "th" if r == 0 and rng.random() < 0.3 else "td"
            html.append(f"<{tag}{attrs}>{grid[r][c]}</{tag}>")
        html.append("</tr>")
    html.append("</table>")
    return "".join(html)
