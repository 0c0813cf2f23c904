"""Rule-based error injectors for text elements.

Every injector is a pure function of (input, seeded rng) returning
``(perturbed, PerturbationReceipt)``. Receipts carry splice edits
(start, end, replacement) over the input so outputs can be replayed
exactly, and the composer can check span disjointness.
"""

from __future__ import annotations

import json
import re
import unicodedata
from importlib import resources

import numpy as np

from .corpus import PerturbationReceipt, normalize_text
from . import perturb_latex
from .perturb_latex import SubRule, tokenize_latex

SHORT_TEXT_THRESHOLD = 60
MIN_INLINE_TOKENS = perturb_latex.MIN_INLINE_TOKENS

_PUNCT_SWAP: dict[str, str] = json.loads(
    resources.files("parseqa").joinpath("data/punct_swap.json").read_text("utf-8")
)
_PUNCT_SWAP_FULL = dict(_PUNCT_SWAP)
for _k, _v in list(_PUNCT_SWAP.items()):
    _PUNCT_SWAP_FULL.setdefault(_v, _k)

_PAIRED = [("（", "）"), ("“", "”"), ("《", "》"), ("(", ")"), ("[", "]"),
           ("【", "】"), ("‘", "’"), ("“", "”")]

_SUPERSCRIPT_MAP = {
    "⁰": "0", "¹": "1", "²": "2", "³": "3", "⁴": "4", "⁵": "5", "⁶": "6",
    "⁷": "7", "⁸": "8", "⁹": "9", "⁺": "+", "⁻": "-", "ⁿ": "n",
    "₀": "0", "₁": "1", "₂": "2", "₃": "3", "₄": "4", "₅": "5", "₆": "6",
    "₇": "7", "₈": "8", "₉": "9", "₊": "+", "₋": "-",
}

_LIST_MARKER = re.compile(r"^(\d+\.|\(\d+\)|[-•*]|[一二三四五六七八九十]+[、.．])\s")

_INLINE_FORMULA = re.compile(r"(?<!\$)\$(?!\$)([^$]+)\$(?!\$)|\\\(((?:[^\\]|\\[^)])*?)\\\)")


class PerturbError(ValueError):
    pass


def _is_punct(c: str) -> bool:
    return unicodedata.category(c) in ("Po", "Ps", "Pe", "Pi", "Pf")


def apply_edits(text: str, edits: list[tuple[int, int, str]]) -> str:
    """Replay non-overlapping splice edits (sorted by start) over ``text``."""
    out = text
    for start, end, repl in sorted(edits, key=lambda e: e[0], reverse=True):
        out = out[:start] + repl + out[end:]
    return out


def _receipt(error_type, seed, edits, **params):
    return PerturbationReceipt(
        error_type=error_type,
        spans_touched=[(s, e) for s, e, _ in edits],
        rng_seed=seed,
        parameters={"edits": [[s, e, r] for s, e, r in edits], **params},
    )


def _finish(error_type, text, edits, seed, **params):
    out = apply_edits(text, edits)
    if normalize_text(out) == normalize_text(text):
        raise PerturbError(f"{error_type}: perturbation had no canonical effect")
    return out, _receipt(error_type, seed, edits, **params)


def _seed_of(rng: np.random.Generator) -> int:
    # Receipts record the stream seed the caller derived; callers pass it via
    # rng.bit_generator.seed_seq where available.
    seq = rng.bit_generator.seed_seq
    ent = seq.entropy if seq is not None else 0
    return int(ent) & 0xFFFFFFFFFFFFFFFF if isinstance(ent, int) else 0


def grapheme_clusters(text: str) -> list[tuple[int, int]]:
    """Approximate grapheme segmentation: combining marks, ZWJ sequences,
    variation selectors, and regional-indicator pairs stay together."""
    spans = []
    i, n = 0, len(text)
    while i < n:
        j = i + 1
        while j < n:
            c = text[j]
            cat = unicodedata.category(c)
            if cat in ("Mn", "Mc", "Me") or c in ("‍", "︎", "️"):
                j += 1
                if c == "‍" and j < n:
                    j += 1
                continue
            if (
                "\U0001F1E6" <= text[i] <= "\U0001F1FF"
                and "\U0001F1E6" <= c <= "\U0001F1FF"
                and j == i + 1
            ):
                j += 1
                continue
            break
        spans.append((i, j))
        i = j
    return spans


def misrecognize_as_title(text: str, rng: np.random.Generator):
    if not text:
        raise PerturbError("empty input")
    if len(text) > SHORT_TEXT_THRESHOLD:
        raise PerturbError("not short text")
    k = int(rng.integers(1, 4))
    edits = [(0, 0, "#" * k + " ")]
    return _finish("text_misrecognized_as_title", text, edits, _seed_of(rng), k=k)


def paragraph_format_error(text: str, rng: np.random.Generator):
    if len(text) < 2:
        raise PerturbError("text too short")
    newlines = [i for i, c in enumerate(text) if c == "\n"]
    branch = "delete" if newlines and rng.random() < 0.5 else "insert"
    if branch == "delete" and newlines:
        k = int(rng.integers(1, len(newlines) + 1))
        picked = sorted(rng.choice(len(newlines), size=k, replace=False).tolist())
        edits = [(newlines[i], newlines[i] + 1, "") for i in picked]
        return _finish("paragraph_format_error", text, edits, _seed_of(rng), branch=branch)
    positions = [
        i for i in range(1, len(text)) if text[i] != "\n" and text[i - 1] != "\n"
        and not text[i].isspace()
    ]
    if not positions:
        raise PerturbError("no insertable position")
    k = int(rng.integers(1, 6))
    picked = sorted(
        set(rng.choice(len(positions), size=min(k, len(positions)), replace=False).tolist())
    )
    edits = [(positions[i], positions[i], "\n") for i in picked]
    return _finish("paragraph_format_error", text, edits, _seed_of(rng), branch="insert")


def list_format_error(text: str, rng: np.random.Generator):
    lines = text.split("\n")
    marked = [i for i, line in enumerate(lines) if _LIST_MARKER.match(line)]
    if not marked:
        raise PerturbError("no list structure")
    target = marked[int(rng.integers(len(marked)))]
    start = sum(len(l) + 1 for l in lines[:target])
    if target < len(lines) - 1:
        # Drop the newline terminating the marked item.
        pos = start + len(lines[target])
        edits = [(pos, pos + 1, "")]
        sub_rule = "newline_removed"
    else:
        m = _LIST_MARKER.match(lines[target])
        marker = m.group(1)
        repl = "•" if marker != "•" else "-"
        edits = [(start, start + len(marker), repl)]
        sub_rule = "marker_altered"
    return _finish("list_format_error", text, edits, _seed_of(rng), sub_rule=sub_rule)


def title_format_error(text: str, rng: np.random.Generator = None):
    m = re.match(r"^(#+)[ \t]+", text)
    if not m:
        raise PerturbError("no heading syntax")
    edits = [(0, m.end(), "")]
    seed = _seed_of(rng) if rng is not None else 0
    return _finish("title_format_error", text, edits, seed)


def _formula_spans(text: str) -> list[tuple[int, int, str]]:
    """(start, end, interior) for $...$ and \\( ... \\) inline formulas."""
    spans = []
    for m in _INLINE_FORMULA.finditer(text):
        interior = m.group(1) if m.group(1) is not None else m.group(2)
        spans.append((m.start(), m.end(), interior))
    return spans


def superscript_citation_error(text: str, rng: np.random.Generator = None):
    formula_spans = _formula_spans(text)
    edits: list[tuple[int, int, str]] = []
    script_re = re.compile(r"^[\^_]\{([^{}]*)\}$|^[\^_](.)$")
    for start, end, interior in formula_spans:
        m = script_re.match(interior.strip())
        if m:
            edits.append((start, end, m.group(1) if m.group(1) is not None else m.group(2)))
    covered = [(s, e) for s, e, _ in formula_spans]
    for i, c in enumerate(text):
        if c in _SUPERSCRIPT_MAP and not any(s <= i < e for s, e in covered):
            edits.append((i, i + 1, _SUPERSCRIPT_MAP[c]))
    if not edits:
        raise PerturbError("nothing to replace")
    seed = _seed_of(rng) if rng is not None else 0
    return _finish("superscript_citation_error", text, sorted(edits), seed)


def text_repetition(text: str, rng: np.random.Generator):
    puncts = [i for i, c in enumerate(text) if _is_punct(c)]
    spans: list[tuple[int, int]] = []
    for a, b in zip(puncts, puncts[1:]):
        if text[a + 1 : b].strip():
            spans.append((a + 1, b))
    if puncts and text[puncts[-1] + 1 :].strip():
        spans.append((puncts[-1] + 1, len(text)))
    if not puncts and text.strip():
        spans.append((0, len(text)))
    if not spans:
        raise PerturbError("no repeatable span")
    start, end = spans[int(rng.integers(len(spans)))]
    k = int(rng.integers(10, 21))
    segment = text[start:end]
    edits = [(start, end, segment * k)]
    return _finish(
        "text_repetition", text, edits, _seed_of(rng), k=k, span=[start, end]
    )


def text_redundancy(text: str, donor_pool: list[tuple[str, str]], rng: np.random.Generator):
    if not donor_pool:
        raise PerturbError("empty donor pool")
    donor_id, donor = donor_pool[int(rng.integers(len(donor_pool)))]
    if not donor.strip():
        raise PerturbError("donor has no content")
    for _ in range(20):
        a = int(rng.integers(0, len(donor)))
        b = int(rng.integers(a + 1, len(donor) + 1))
        if donor[a:b].strip():
            break
    else:
        raise PerturbError("could not draw a non-blank donor fragment")
    offset = int(rng.integers(0, len(text) + 1))
    edits = [(offset, offset, donor[a:b])]
    return _finish(
        "text_redundancy", text, edits, _seed_of(rng),
        donor_id=donor_id, donor_span=[a, b],
    )


def text_segment_lost(text: str, rng: np.random.Generator):
    puncts = [i for i, c in enumerate(text) if _is_punct(c)]
    if len(puncts) < 2:
        raise PerturbError("need at least two punctuation marks")
    candidates = [
        (a, b) for a, b in zip(puncts, puncts[1:]) if text[a + 1 : b].strip()
    ]
    if not candidates:
        raise PerturbError("no deletable segment between punctuation")
    a, b = candidates[int(rng.integers(len(candidates)))]
    edits = [(a + 1, b, "")]
    return _finish("text_segment_lost", text, edits, _seed_of(rng))


def _is_cjk(c: str) -> bool:
    return "一" <= c <= "鿿" or "㐀" <= c <= "䶿"


def characters_lost(text: str, rng: np.random.Generator):
    clusters = grapheme_clusters(text)
    cjk = [sp for sp in clusters if _is_cjk(text[sp[0]])]
    latin = [sp for sp in clusters if text[sp[0] : sp[1]].isascii() and text[sp[0]].isalpha()]
    words = [(m.start(), m.end()) for m in re.finditer(r"[A-Za-z0-9]+", text)]
    modes = []
    if cjk:
        modes.append(("cjk_chars", cjk, 5))
    if words:
        modes.append(("words", words, 3))
    if latin:
        modes.append(("latin_chars", latin, 5))
    if not modes:
        raise PerturbError("no eligible units")
    mode, units, cap = modes[int(rng.integers(len(modes)))]
    k = int(rng.integers(1, min(cap, len(units)) + 1))
    picked = sorted(rng.choice(len(units), size=k, replace=False).tolist())
    edits = [(units[i][0], units[i][1], "") for i in picked]
    return _finish("text_characters_lost", text, edits, _seed_of(rng), mode=mode, k=k)


def punctuation_error(text: str, rng: np.random.Generator):
    puncts = [i for i, c in enumerate(text) if _is_punct(c)]
    if not puncts:
        raise PerturbError("no punctuation present")

    def try_delete():
        # Avoid deletions that vanish under trailing-whitespace trimming.
        safe = [i for i in puncts if text[i + 1 :].strip() or text[:i].strip()]
        if not safe:
            return None
        i = safe[int(rng.integers(len(safe)))]
        return [(i, i + 1, "")], {"sub_rule": "delete_single", "mark": text[i]}

    def try_paired():
        for opener, closer in _PAIRED:
            o = text.find(opener)
            if o >= 0:
                c = text.find(closer, o + 1)
                if c > o:
                    return (
                        [(o, o + 1, ""), (c, c + 1, "")],
                        {"sub_rule": "delete_paired", "pair": opener + closer},
                    )
        return None

    def try_swap():
        swappable = [i for i in puncts if text[i] in _PUNCT_SWAP_FULL]
        if not swappable:
            return None
        i = swappable[int(rng.integers(len(swappable)))]
        return [(i, i + 1, _PUNCT_SWAP_FULL[text[i]])], {
            "sub_rule": "swap_cn_en",
            "mark": text[i],
        }

    attempts = [try_delete, try_paired, try_swap]
    order = rng.permutation(3).tolist()
    for idx in order:
        result = attempts[idx]()
        if result is not None:
            edits, params = result
            try:
                return _finish("text_punctuation_error", text, edits, _seed_of(rng), **params)
            except PerturbError:
                continue
    raise PerturbError("no punctuation sub-rule feasible")


def space_error(text: str, rng: np.random.Generator):
    if not text:
        raise PerturbError("empty text")
    deletable = [
        i for i, c in enumerate(text)
        if c == " " and i + 1 < len(text) and text[i + 1] not in (" ", "\n")
        and i > 0 and text[i - 1] != "\n"
    ]
    insertable = [
        i for i in range(1, len(text))
        if text[i] not in ("\n", " ") and text[i - 1] != " "
    ]
    branch = None
    if deletable and insertable:
        branch = "delete" if rng.random() < 0.5 else "insert"
    elif deletable:
        branch = "delete"
    elif insertable:
        branch = "insert"
    else:
        raise PerturbError("no feasible space edit")
    if branch == "delete":
        i = deletable[int(rng.integers(len(deletable)))]
        edits = [(i, i + 1, "")]
    else:
        i = insertable[int(rng.integers(len(insertable)))]
        edits = [(i, i, " ")]
    return _finish("extra_missing_spaces", text, edits, _seed_of(rng), branch=branch)


def inline_formula_missed(text: str, rng: np.random.Generator):
    spans = _formula_spans(text)
    if not spans:
        raise PerturbError("no inline formula")
    k = int(rng.integers(1, len(spans) + 1))
    picked = sorted(rng.choice(len(spans), size=k, replace=False).tolist())
    edits = [(spans[i][0], spans[i][1], "") for i in picked]
    return _finish(
        "inline_formula_missed", text, edits, _seed_of(rng),
        removed=[[spans[i][0], spans[i][1]] for i in picked],
    )


def inline_formula_error(text: str, rng: np.random.Generator):
    spans = [
        (s, e, interior)
        for s, e, interior in _formula_spans(text)
        if len(tokenize_latex(interior)) >= MIN_INLINE_TOKENS
    ]
    if not spans:
        raise PerturbError("no sufficiently long inline formula")
    start, end, interior = spans[int(rng.integers(len(spans)))]
    tokens = tokenize_latex(interior)
    sub_rules = [SubRule.CHARACTER, SubRule.STRUCTURE, SubRule.PARTIAL_OMISSION, SubRule.SYNTAX]
    order = rng.permutation(len(sub_rules)).tolist()
    last_err = None
    for idx in order:
        try:
            new_interior, params = perturb_latex.perturb_formula(tokens, sub_rules[idx], rng)
        except perturb_latex.LatexError as exc:
            last_err = exc
            continue
        span_text = text[start:end]
        prefix, suffix = ("\\(", "\\)") if span_text.startswith("\\(") else ("$", "$")
        edits = [(start, end, prefix + new_interior + suffix)]
        try:
            return _finish("inline_formula_error", text, edits, _seed_of(rng), **params)
        except PerturbError as exc:
            last_err = exc
            continue
    raise PerturbError(f"no formula sub-rule feasible: {last_err}")


RULE_BASED_TEXT_INJECTORS = {
    "text_misrecognized_as_title": misrecognize_as_title,
    "paragraph_format_error": paragraph_format_error,
    "list_format_error": list_format_error,
    "title_format_error": title_format_error,
    "superscript_citation_error": superscript_citation_error,
    "text_repetition": text_repetition,
    "text_segment_lost": text_segment_lost,
    "text_characters_lost": characters_lost,
    "text_punctuation_error": punctuation_error,
    "extra_missing_spaces": space_error,
    "inline_formula_missed": inline_formula_missed,
    "inline_formula_error": inline_formula_error,
}
# text_redundancy needs a donor pool, so it is dispatched separately.
