"""Lossless LaTeX tokenizer and the shared formula perturbation kernel.

The kernel produces the four formula error flavors (syntax, structure,
character, partial omission). The first three keep brace balance; syntax
deliberately breaks it, which is the discriminator the synthesis gates
rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class TokenKind(str, Enum):
    COMMAND = "command"
    GROUP_OPEN = "group_open"
    GROUP_CLOSE = "group_close"
    SUBSCRIPT = "subscript"
    SUPERSCRIPT = "superscript"
    LETTER = "letter"
    DIGIT = "digit"
    SPACE = "space"
    SYMBOL = "symbol"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    lexeme: str
    offset: int


class LatexError(ValueError):
    pass


class SubRule(str, Enum):
    SYNTAX = "syntax"
    STRUCTURE = "structure"
    CHARACTER = "character"
    PARTIAL_OMISSION = "partial_omission"


# Latin <-> Greek lookalikes plus the classic OCR confusions. Used by the
# character sub-rule; extensible via config.
CONFUSION_PAIRS = [
    ("O", "0"), ("l", "1"), ("I", "1"), ("S", "5"), ("B", "8"), ("Z", "2"),
    ("a", "\\alpha"), ("b", "\\beta"), ("g", "\\gamma"), ("n", "\\eta"),
    ("v", "\\nu"), ("p", "\\rho"), ("e", "\\epsilon"), ("u", "\\mu"),
    ("w", "\\omega"), ("x", "\\chi"), ("k", "\\kappa"), ("t", "\\tau"),
]
_CONFUSION: dict[str, str] = {}
for _a, _b in CONFUSION_PAIRS:
    _CONFUSION.setdefault(_a, _b)
    _CONFUSION.setdefault(_b, _a)

# Case swap between corresponding Greek commands, e.g. \alpha <-> \Alpha-class.
_GREEK = ["alpha", "beta", "gamma", "delta", "epsilon", "theta", "lambda",
          "sigma", "omega", "phi", "psi", "pi", "xi"]

MIN_INLINE_TOKENS = 6
OMISSION_MAX_FRACTION = 0.30


def tokenize_latex(src: str) -> list[Token]:
    """Lossless lexing; unknown bytes become symbol tokens."""
    tokens: list[Token] = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c == "\\":
            j = i + 1
            while j < n and src[j].isalpha():
                j += 1
            if j == i + 1:  # backslash + single non-letter
                j = min(i + 2, n)
            tokens.append(Token(TokenKind.COMMAND, src[i:j], i))
            i = j
        elif c == "{":
            tokens.append(Token(TokenKind.GROUP_OPEN, c, i))
            i += 1
        elif c == "}":
            tokens.append(Token(TokenKind.GROUP_CLOSE, c, i))
            i += 1
        elif c == "_":
            tokens.append(Token(TokenKind.SUBSCRIPT, c, i))
            i += 1
        elif c == "^":
            tokens.append(Token(TokenKind.SUPERSCRIPT, c, i))
            i += 1
        elif c.isspace():
            j = i
            while j < n and src[j].isspace():
                j += 1
            tokens.append(Token(TokenKind.SPACE, src[i:j], i))
            i = j
        elif c.isalpha():
            tokens.append(Token(TokenKind.LETTER, c, i))
            i += 1
        elif c.isdigit():
            tokens.append(Token(TokenKind.DIGIT, c, i))
            i += 1
        else:
            tokens.append(Token(TokenKind.SYMBOL, c, i))
            i += 1
    return tokens


def detokenize(tokens: list[Token]) -> str:
    return "".join(t.lexeme for t in tokens)


def validate_balanced(tokens: list[Token]) -> bool:
    """True iff braces and \\left/\\right pairs balance."""
    depth = 0
    lr = 0
    for t in tokens:
        if t.kind is TokenKind.GROUP_OPEN:
            depth += 1
        elif t.kind is TokenKind.GROUP_CLOSE:
            depth -= 1
            if depth < 0:
                return False
        elif t.kind is TokenKind.COMMAND:
            if t.lexeme == "\\left":
                lr += 1
            elif t.lexeme == "\\right":
                lr -= 1
                if lr < 0:
                    return False
    return depth == 0 and lr == 0


def _retok(tokens: list[Token]) -> list[Token]:
    return tokenize_latex(detokenize(tokens))


def _group_spans(tokens: list[Token]) -> list[tuple[int, int]]:
    """Token index spans [open, close] of every balanced brace group."""
    stack, spans = [], []
    for idx, t in enumerate(tokens):
        if t.kind is TokenKind.GROUP_OPEN:
            stack.append(idx)
        elif t.kind is TokenKind.GROUP_CLOSE and stack:
            spans.append((stack.pop(), idx))
    return spans


def _character_candidates(tokens: list[Token]) -> list[int]:
    greek_cmds = {"\\" + g for g in _GREEK} | {"\\" + g.capitalize() for g in _GREEK}
    out = []
    for idx, t in enumerate(tokens):
        if t.kind in (TokenKind.LETTER, TokenKind.DIGIT):
            if t.lexeme in _CONFUSION or t.lexeme.swapcase() != t.lexeme:
                out.append(idx)
        elif t.kind is TokenKind.COMMAND and t.lexeme in greek_cmds:
            out.append(idx)
    return out


def _substitute_char(tok: Token, rng: np.random.Generator) -> str:
    options = []
    if tok.lexeme in _CONFUSION:
        options.append(_CONFUSION[tok.lexeme])
    if tok.kind is TokenKind.LETTER and tok.lexeme.swapcase() != tok.lexeme:
        options.append(tok.lexeme.swapcase())
    if tok.kind is TokenKind.COMMAND:
        name = tok.lexeme[1:]
        options.append("\\" + (name.lower() if name[0].isupper() else name.capitalize()))
    return options[int(rng.integers(len(options)))]


def perturb_formula(
    tokens: list[Token], sub_rule: SubRule, rng: np.random.Generator
) -> tuple[str, dict]:
    """Apply one formula error; returns (latex, receipt parameters)."""
    if sub_rule is SubRule.CHARACTER:
        if len(tokens) < MIN_INLINE_TOKENS:
            raise LatexError("formula too short for character perturbation")
        candidates = _character_candidates(tokens)
        if not candidates:
            raise LatexError("no substitutable characters")
        k = int(rng.integers(1, min(5, len(candidates)) + 1))
        picked = sorted(rng.choice(len(candidates), size=k, replace=False).tolist())
        out = list(tokens)
        subs = []
        for ci in picked:
            idx = candidates[ci]
            new = _substitute_char(out[idx], rng)
            subs.append([out[idx].lexeme, new])
            out[idx] = Token(out[idx].kind, new, out[idx].offset)
        return detokenize(out), {"sub_rule": sub_rule.value, "substitutions": subs}

    if sub_rule is SubRule.STRUCTURE:
        if len(tokens) < MIN_INLINE_TOKENS:
            raise LatexError("formula too short for structure perturbation")
        return _perturb_structure(tokens, rng)

    if sub_rule is SubRule.PARTIAL_OMISSION:
        spans = _group_spans(tokens)
        if len(spans) < 2:
            raise LatexError("need at least two groups for partial omission")
        limit = max(3, int(len(tokens) * OMISSION_MAX_FRACTION))
        small = [s for s in spans if s[1] - s[0] + 1 <= limit]
        if not small:
            raise LatexError("all sub-groups exceed the omission bound")
        lo, hi = small[int(rng.integers(len(small)))]
        # Delete the group interior, keeping braces, so balance is preserved.
        out = tokens[: lo + 1] + tokens[hi:]
        return detokenize(out), {
            "sub_rule": sub_rule.value,
            "deleted": detokenize(tokens[lo + 1 : hi]),
        }

    if sub_rule is SubRule.SYNTAX:
        choice = int(rng.integers(3))
        src = detokenize(tokens)
        opens = [i for i, t in enumerate(tokens) if t.kind is TokenKind.GROUP_OPEN]
        closes = [i for i, t in enumerate(tokens) if t.kind is TokenKind.GROUP_CLOSE]
        if choice == 0 and closes:
            idx = closes[int(rng.integers(len(closes)))]
            out = detokenize(tokens[:idx] + tokens[idx + 1 :])
        elif choice == 1 and opens:
            idx = opens[int(rng.integers(len(opens)))]
            out = detokenize(tokens[:idx] + tokens[idx + 1 :]) + "}"
        else:
            out = src + "{"
        return out, {"sub_rule": sub_rule.value}

    raise LatexError(f"unknown sub-rule: {sub_rule}")


_STRUCT_OPS = ("swap_frac", "drop_script_braces", "sqrt_shift", "bracket_delete", "op_swap")
_OP_SWAPS = {"\\hat": "\\vec", "\\vec": "\\hat", "\\bar": "\\tilde", "\\tilde": "\\bar",
             "\\frac": "\\tfrac", "\\tfrac": "\\frac"}


def _arg_span(tokens, start):
    """Span of one command argument starting at token index ``start``."""
    if start < len(tokens) and tokens[start].kind is TokenKind.GROUP_OPEN:
        depth = 0
        for j in range(start, len(tokens)):
            if tokens[j].kind is TokenKind.GROUP_OPEN:
                depth += 1
            elif tokens[j].kind is TokenKind.GROUP_CLOSE:
                depth -= 1
                if depth == 0:
                    return (start, j + 1)
    if start < len(tokens):
        return (start, start + 1)
    return None


def _perturb_structure(tokens, rng):
    feasible: list[tuple[str, int]] = []
    for idx, t in enumerate(tokens):
        if t.kind is not TokenKind.COMMAND:
            continue
        if t.lexeme in ("\\frac", "\\tfrac", "\\dfrac"):
            feasible.append(("swap_frac", idx))
        if t.lexeme == "\\sqrt":
            feasible.append(("sqrt_shift", idx))
        if t.lexeme in _OP_SWAPS:
            feasible.append(("op_swap", idx))
    for idx, t in enumerate(tokens[:-1]):
        if t.kind in (TokenKind.SUBSCRIPT, TokenKind.SUPERSCRIPT) and tokens[
            idx + 1
        ].kind is TokenKind.GROUP_OPEN:
            feasible.append(("drop_script_braces", idx))
    for idx, t in enumerate(tokens):
        if t.kind is TokenKind.SYMBOL and t.lexeme in "()[]":
            feasible.append(("bracket_delete", idx))
    if not feasible:
        raise LatexError("no structural edit applicable")
    op, idx = feasible[int(rng.integers(len(feasible)))]

    out = list(tokens)
    if op == "swap_frac":
        a = _arg_span(out, idx + 1)
        b = _arg_span(out, a[1]) if a else None
        if not a or not b:
            raise LatexError("malformed fraction arguments")
        out = out[: idx + 1] + out[b[0] : b[1]] + out[a[0] : a[1]] + out[b[1] :]
    elif op == "drop_script_braces":
        span = _arg_span(out, idx + 1)
        inner = out[span[0] + 1 : span[1] - 1]
        # Keep a single token after the script so the result stays valid.
        keep = inner[:1] if inner else [Token(TokenKind.LETTER, "x", 0)]
        out = out[: idx + 1] + keep + inner[1:] + out[span[1] :]
    elif op == "sqrt_shift":
        span = _arg_span(out, idx + 1)
        if span is None:
            raise LatexError("sqrt boundary shift infeasible")
        nxt_idx = span[1]
        while nxt_idx < len(out) and out[nxt_idx].kind is TokenKind.SPACE:
            nxt_idx += 1
        if nxt_idx >= len(out):
            raise LatexError("sqrt boundary shift infeasible")
        if out[span[0]].kind is TokenKind.GROUP_OPEN:
            # Pull the next non-space token inside the radical.
            moved = out[nxt_idx]
            close = out[span[1] - 1]
            out = (
                out[: span[1] - 1]
                + out[span[1] : nxt_idx]
                + [moved, close]
                + out[nxt_idx + 1 :]
            )
        else:
            out = (
                out[: span[0]]
                + [Token(TokenKind.GROUP_OPEN, "{", 0)]
                + out[span[0] : span[1] + 1]
                + [Token(TokenKind.GROUP_CLOSE, "}", 0)]
                + out[span[1] + 1 :]
            )
    elif op == "bracket_delete":
        pair = {"(": ")", "[": "]", ")": "(", "]": "["}[out[idx].lexeme]
        mate = None
        rng_iter = range(idx + 1, len(out)) if out[idx].lexeme in "([" else range(idx - 1, -1, -1)
        for j in rng_iter:
            if out[j].kind is TokenKind.SYMBOL and out[j].lexeme == pair:
                mate = j
                break
        drop = sorted({idx} | ({mate} if mate is not None else set()))
        out = [t for j, t in enumerate(out) if j not in drop]
    elif op == "op_swap":
        out[idx] = Token(TokenKind.COMMAND, _OP_SWAPS[out[idx].lexeme], 0)

    result = detokenize(out)
    if not validate_balanced(tokenize_latex(result)):
        raise LatexError("structure edit broke balance")
    if result == detokenize(tokens):
        raise LatexError("structure edit was a no-op")
    return result, {"sub_rule": SubRule.STRUCTURE.value, "edit": op}
