"""Mixed-model formula parsing and random-effects term amalgamation.

The accepted grammar is a small subset of the Wilkinson notation::

    response ~ fixed (+ fixed)* (+ (re_expr | factor) | + zerocorr(re_expr | factor))*

where ``fixed`` and the items of ``re_expr`` are ``0``, ``1`` or a column
name.  Intercepts are implicit unless ``0`` is given.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

INTERCEPT = "1"

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>\d+(?:\.\d*)?)
  | (?P<ident>[^\W\d]\w*)
  | (?P<op>[~+|()])
    """,
    re.VERBOSE | re.UNICODE,
)


class FormulaError(ValueError):
    """Raised for malformed formula text.  ``pos`` is the 0-based offset."""

    def __init__(self, message: str, pos: int | None = None, text: str | None = None):
        self.pos = pos
        self.text = text
        if pos is not None:
            message = f"{message} (at position {pos})"
        super().__init__(message)


@dataclass(frozen=True)
class RETerm:
    """One random-effects term as written, e.g. ``(0 + service | dept)``.

    ``expr`` uses ``"1"`` for the intercept, which always comes first.
    """

    expr: tuple[str, ...]
    grouping: str
    zerocorr: bool = False

    def render(self) -> str:
        inner = f"{_render_expr(self.expr)} | {self.grouping}"
        return f"zerocorr({inner})" if self.zerocorr else f"({inner})"


@dataclass(frozen=True)
class FormulaAST:
    response: str
    fixed_terms: tuple[str, ...]
    re_terms: tuple[RETerm, ...]

    @property
    def intercept(self) -> bool:
        return INTERCEPT in self.fixed_terms

    @property
    def covariates(self) -> tuple[str, ...]:
        return tuple(t for t in self.fixed_terms if t != INTERCEPT)

    def render(self) -> str:
        parts = [_render_expr(self.fixed_terms)]
        parts.extend(t.render() for t in self.re_terms)
        return f"{self.response} ~ " + " + ".join(parts)

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True)
class TermSpec:
    """Random-effects structure for one grouping factor after amalgamation.

    ``corr_mask[i, j]`` (``i >= j``) marks the template entries that are
    free parameters; the strict upper triangle is always ``False``.
    """

    grouping: str
    columns: tuple[str, ...]
    corr_mask: np.ndarray

    @property
    def p(self) -> int:
        return len(self.columns)

    @property
    def n_theta(self) -> int:
        return int(np.count_nonzero(self.corr_mask))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TermSpec):
            return NotImplemented
        return (
            self.grouping == other.grouping
            and self.columns == other.columns
            and np.array_equal(self.corr_mask, other.corr_mask)
        )

    def __hash__(self) -> int:
        return hash((self.grouping, self.columns, self.corr_mask.tobytes()))


def _render_expr(expr: tuple[str, ...]) -> str:
    if not expr or expr[0] != INTERCEPT:
        return " + ".join(("0",) + expr)
    return " + ".join(expr)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise FormulaError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def error(self, expected: str) -> FormulaError:
        kind, value, pos = self.tok
        found = "end of formula" if kind == "end" else repr(value)
        return FormulaError(f"expected {expected}, found {found}", pos, self.text)

    def expect(self, value: str) -> int:
        kind, v, pos = self.tok
        if kind != "op" or v != value:
            raise self.error(repr(value))
        self.i += 1
        return pos

    def at(self, value: str) -> bool:
        kind, v, _ = self.tok
        return kind == "op" and v == value

    def ident(self) -> str:
        kind, v, _ = self.tok
        if kind != "ident":
            raise self.error("a column name")
        self.i += 1
        return v

    def parse(self) -> FormulaAST:
        response = self.ident()
        self.expect("~")
        if self.tok[0] == "end":
            raise FormulaError("empty right-hand side", self.tok[2], self.text)
        fixed: list[tuple[str, int]] = []
        re_terms: list[tuple[RETerm, int]] = []
        while True:
            kind, v, pos = self.tok
            if kind == "op" and v == "(":
                re_terms.append((self.re_term(zerocorr=False), pos))
            elif kind == "ident" and v == "zerocorr" and self.tokens[self.i + 1][1] == "(":
                self.i += 1
                re_terms.append((self.re_term(zerocorr=True), pos))
            else:
                fixed.append((self.atom(), pos))
            if self.at("+"):
                self.i += 1
                continue
            if self.at("|"):
                raise FormulaError("'|' outside parentheses", self.tok[2], self.text)
            if self.tok[0] != "end":
                raise self.error("'+' or end of formula")
            break
        fixed_terms = _normalize_expr(fixed, self.text, allow_empty=True)
        seen: set[RETerm] = set()
        for term, pos in re_terms:
            if term in seen:
                raise FormulaError(f"duplicate term {term.render()}", pos, self.text)
            seen.add(term)
        return FormulaAST(response, fixed_terms, tuple(t for t, _ in re_terms))

    def atom(self) -> str:
        kind, v, pos = self.tok
        if kind == "number":
            if v not in ("0", "1"):
                raise FormulaError(f"only 0 or 1 may appear as a constant, found {v}", pos, self.text)
            self.i += 1
            return v
        if kind == "ident":
            self.i += 1
            return v
        raise self.error("'0', '1', a column name or a random-effects term")

    def re_term(self, zerocorr: bool) -> RETerm:
        self.expect("(")
        items = []
        while True:
            pos = self.tok[2]
            items.append((self.atom(), pos))
            if self.at("+"):
                self.i += 1
                continue
            break
        self.expect("|")
        grouping = self.ident()
        self.expect(")")
        expr = _normalize_expr(items, self.text, allow_empty=False)
        return RETerm(expr, grouping, zerocorr)


def _normalize_expr(items: list[tuple[str, int]], text: str, allow_empty: bool) -> tuple[str, ...]:
    intercept = True
    names: list[str] = []
    for item, pos in items:
        if item == "0":
            intercept = False
        elif item == "1":
            intercept = True
        elif item in names:
            raise FormulaError(f"duplicate term {item!r}", pos, text)
        else:
            names.append(item)
    expr = ((INTERCEPT,) if intercept else ()) + tuple(names)
    if not expr and not allow_empty:
        raise FormulaError("random-effects term has no columns", items[0][1], text)
    return expr


def parse_formula(text: str) -> FormulaAST:
    """Parse ``text`` into a :class:`FormulaAST`.

    >>> parse_formula("y ~ 1 + x + (1 | g)").re_terms[0].grouping
    'g'
    """
    if not text or not text.strip():
        raise FormulaError("empty formula")
    return _Parser(text).parse()


def amalgamate(ast: FormulaAST) -> list[TermSpec]:
    """Merge random-effects terms that share a grouping factor.

    Columns are taken in source order with duplicates dropped.  An
    off-diagonal template entry is free only when some correlated term
    holds both columns and no ``zerocorr`` term holds both.
    """
    groups: dict[str, list[RETerm]] = {}
    for term in ast.re_terms:
        groups.setdefault(term.grouping, []).append(term)

    specs = []
    for grouping, terms in groups.items():
        columns: list[str] = []
        for term in terms:
            columns.extend(c for c in term.expr if c not in columns)
        idx = {c: i for i, c in enumerate(columns)}
        p = len(columns)
        allowed = np.eye(p, dtype=bool)
        forbidden = np.zeros((p, p), dtype=bool)
        for term in terms:
            pos = [idx[c] for c in term.expr]
            target = forbidden if term.zerocorr else allowed
            for a in pos:
                for b in pos:
                    if a != b:
                        target[a, b] = True
        mask = np.tril(allowed & ~forbidden)
        mask[np.diag_indices(p)] = True
        specs.append(TermSpec(grouping, tuple(columns), mask))
    return specs
