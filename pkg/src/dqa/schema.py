"""Schema rules over numeric columns: a tiny DSL, built-in SDP rules, and the checker.

Rule grammar (one rule per line, ``#`` starts a comment)::

    ID: EXPR (>=|=|<=) EXPR
    EXPR  := TERM (+ TERM)*
    TERM  := column | constant | column / column | column * column

Rule ``R1`` of the built-in set is special: it applies "column >= 0" to every
feature column of the dataset under check, and a row violates it if any of
its columns is negative.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from dqa.dataset import Dataset

COMPARATORS = (">=", "=", "<=")

# Expression nodes: ("col", name) | ("const", value) | ("sum", (terms,)) |
# ("div", a, b) | ("mul", a, b) | ("allcols",)
ALL_COLUMNS = ("allcols",)


class SchemaError(ValueError):
    """Raised for malformed rule text or rules referencing unknown columns."""


@dataclass(frozen=True)
class SchemaRule:
    id: str
    lhs: tuple
    comparator: str
    rhs: tuple
    description: str = ""

    def __post_init__(self):
        if self.comparator not in COMPARATORS:
            raise SchemaError(f"unknown comparator {self.comparator!r}")


@dataclass(frozen=True)
class ViolationReport:
    """Per-rule violating row indices plus the distinct-row total.

    Both granularities are kept: ``violations`` counts a row once per rule it
    violates, while ``total_violating_rows`` counts each row once no matter
    how many rules flag it.
    """

    violations: dict[str, tuple[int, ...]]
    total_violating_rows: int

    def all_rows(self) -> tuple[int, ...]:
        rows = set()
        for idx in self.violations.values():
            rows.update(idx)
        return tuple(sorted(rows))

    def to_json_dict(self) -> dict:
        return {rule_id: list(rows) for rule_id, rows in self.violations.items()}


def referenced_columns(expr: tuple) -> set[str]:
    kind = expr[0]
    if kind == "col":
        return {expr[1]}
    if kind in ("const", "allcols"):
        return set()
    if kind == "sum":
        out = set()
        for term in expr[1]:
            out |= referenced_columns(term)
        return out
    if kind in ("div", "mul"):
        return referenced_columns(expr[1]) | referenced_columns(expr[2])
    raise SchemaError(f"unknown expression node {kind!r}")


def rule_columns(rule: SchemaRule) -> set[str]:
    return referenced_columns(rule.lhs) | referenced_columns(rule.rhs)


# -- parsing -----------------------------------------------------------------

_TOKEN = re.compile(r"\s*(>=|<=|=|[+*/:]|[A-Za-z_][A-Za-z0-9_.]*|-?\d+(?:\.\d+)?|\S)")


def _tokenize(line: str):
    pos, out = 0, []
    while pos < len(line):
        m = _TOKEN.match(line, pos)
        if m is None:
            break
        out.append((m.group(1), m.start(1)))
        pos = m.end()
    return out


_NUMBER = re.compile(r"-?\d+(?:\.\d+)?$")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*$")


class _Parser:
    def __init__(self, tokens, line_no: int):
        self.tokens = tokens
        self.line_no = line_no
        self.i = 0

    def error(self, message: str):
        col = self.tokens[self.i][1] + 1 if self.i < len(self.tokens) else -1
        raise SchemaError(f"line {self.line_no}: {message} (column {col})")

    def peek(self):
        return self.tokens[self.i][0] if self.i < len(self.tokens) else None

    def advance(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, token: str):
        if self.peek() != token:
            self.error(f"expected {token!r}")
        return self.advance()

    def atom(self):
        tok = self.peek()
        if tok is None:
            self.error("unexpected end of rule")
        if _NUMBER.match(tok):
            self.advance()
            return ("const", float(tok))
        if _IDENT.match(tok):
            self.advance()
            nxt = self.peek()
            if nxt in ("/", "*"):
                op = self.advance()
                rhs = self.peek()
                if rhs is None or not _IDENT.match(rhs):
                    self.error(f"{op!r} must join two column names")
                self.advance()
                return ("div" if op == "/" else "mul", ("col", tok), ("col", rhs))
            return ("col", tok)
        self.error(f"unexpected token {tok!r}")

    def expression(self):
        terms = [self.atom()]
        while self.peek() == "+":
            self.advance()
            terms.append(self.atom())
        return terms[0] if len(terms) == 1 else ("sum", tuple(terms))


def parse_rules(text: str) -> list[SchemaRule]:
    """Parse rule-DSL text into rules, preserving file order."""
    rules: list[SchemaRule] = []
    seen: set[str] = set()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise SchemaError(f"line {line_no}: missing ':' after rule id")
        rule_id, body = line.split(":", 1)
        rule_id = rule_id.strip()
        if not rule_id or not _IDENT.match(rule_id):
            raise SchemaError(f"line {line_no}: invalid rule id {rule_id!r}")
        if rule_id in seen:
            raise SchemaError(f"line {line_no}: duplicate rule id {rule_id!r}")
        seen.add(rule_id)
        parser = _Parser(_tokenize(body), line_no)
        lhs = parser.expression()
        if parser.peek() not in COMPARATORS:
            parser.error("expected one of >=, =, <=")
        comparator = parser.advance()
        rhs = parser.expression()
        if parser.peek() is not None:
            parser.error(f"trailing token {parser.peek()!r}")
        rules.append(SchemaRule(rule_id, lhs, comparator, rhs))
    return rules


# -- built-in SDP rules --------------------------------------------------------

_BUILTIN_DSL = """
R2:  CountLine >= CountLineComment                  # physical lines >= comment lines
R3:  CountLine >= AvgLine                           # physical lines >= average lines
R4:  CountLine >= CountLineCodeDecl                 # physical lines >= declarative code lines
R5:  CountLine >= CountLineCodeExe                  # physical lines >= executable code lines
R6:  CountLine >= CountStmt                         # physical lines >= statements
R7:  CountLine >= CountLineBlank                    # physical lines >= blank lines
R8:  CountLine >= CountLineBlank + CountLineComment + CountLineDecl + CountLineExe
R9:  CountStmt = CountLineCodeDecl + CountLineCodeExe
R10: RatioCommentToCode = CommentLineCode / CountLineCode
R11: AvgLine >= AvgLineCode
R12: AvgLine >= AvgLineComment
R13: AvgLine >= AvgLineBlank
R14: AvgLine >= AvgLineCode + AvgLineComment + AvgLineBlank
R15: SumCyclomatic >= MaxCyclomatic
R16: SumCyclomaticStrict >= MaxCyclomaticStrict
R17: SumCyclomaticModified >= MaxCyclomaticModified
R18: MaxCyclomatic >= AvgCyclomatic
R19: MaxCyclomaticStrict >= AvgCyclomaticStrict
R20: MaxCyclomaticModified >= AvgCyclomaticModified
"""


def builtin_sdp_rules() -> list[SchemaRule]:
    """The 20 stock rules for software-metric tables (R1..R20).

    R1 expands to one "column >= 0" check per feature column at evaluation
    time; R2-R14 encode referential-integrity relations between line/statement
    counts, R15-R20 the sum >= max >= average identities of the cyclomatic
    complexity aggregates.
    """
    r1 = SchemaRule("R1", ALL_COLUMNS, ">=", ("const", 0.0), "all metrics are nonnegative")
    return [r1] + parse_rules(_BUILTIN_DSL)


def applicable_rules(ds: Dataset, rules) -> list[SchemaRule]:
    """Rules whose referenced columns all exist in ``ds`` (R1-style rules always apply)."""
    names = set(ds.feature_names)
    return [r for r in rules if rule_columns(r) <= names]


# -- evaluation ----------------------------------------------------------------


def _evaluate(expr: tuple, ds: Dataset):
    """Evaluate an expression over all rows.

    Returns (values, masked, divzero): per-row value, whether a referenced
    cell is missing, and whether a division by zero occurred.
    """
    kind = expr[0]
    n = ds.n_rows
    if kind == "const":
        return np.full(n, expr[1]), np.zeros(n, bool), np.zeros(n, bool)
    if kind == "col":
        j = ds.col_index(expr[1])
        return ds.features[:, j], ds.missing_mask[:, j].copy(), np.zeros(n, bool)
    if kind == "sum":
        total = np.zeros(n)
        masked = np.zeros(n, bool)
        divzero = np.zeros(n, bool)
        for term in expr[1]:
            v, m, d = _evaluate(term, ds)
            total = total + v
            masked |= m
            divzero |= d
        return total, masked, divzero
    if kind in ("div", "mul"):
        a, ma, da = _evaluate(expr[1], ds)
        b, mb, db = _evaluate(expr[2], ds)
        masked = ma | mb
        divzero = da | db
        if kind == "mul":
            return a * b, masked, divzero
        zero = b == 0
        divzero = divzero | (zero & ~masked)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(zero, np.nan, a / b)
        return out, masked, divzero
    raise SchemaError(f"unknown expression node {kind!r}")


def _compare(lhs: np.ndarray, comparator: str, rhs: np.ndarray, eq_tolerance: float) -> np.ndarray:
    if comparator == ">=":
        return lhs < rhs
    if comparator == "<=":
        return lhs > rhs
    return np.abs(lhs - rhs) > eq_tolerance * np.maximum(1.0, np.abs(rhs))


def check_schema(ds: Dataset, rules, eq_tolerance: float = 1e-9) -> ViolationReport:
    """Evaluate rules over every row and report violating row indices per rule.

    Rows with a masked cell in any referenced column are skipped for that
    rule.  Equality holds within a relative tolerance so ratio rules do not
    flag floating-point rounding noise.  A division by zero marks the row as
    violating: a zero-denominator metric combination is itself implausible.
    """
    violations: dict[str, tuple[int, ...]] = {}
    hit = np.zeros(ds.n_rows, dtype=bool)
    for rule in rules:
        if rule.lhs == ALL_COLUMNS or rule.rhs == ALL_COLUMNS:
            colwise = (ds.features < 0.0) & ~ds.missing_mask
            if rule.comparator == "<=":
                colwise = (ds.features > 0.0) & ~ds.missing_mask
            bad = colwise.any(axis=1)
        else:
            for name in rule_columns(rule):
                ds.col_index(name)
            lhs, ml, dl = _evaluate(rule.lhs, ds)
            rhs, mr, dr = _evaluate(rule.rhs, ds)
            masked = ml | mr
            divzero = (dl | dr) & ~masked
            with np.errstate(invalid="ignore"):
                bad = _compare(lhs, rule.comparator, rhs, eq_tolerance)
            bad = (bad & ~masked) | divzero
        rows = np.flatnonzero(bad)
        violations[rule.id] = tuple(int(i) for i in rows)
        hit |= bad
    return ViolationReport(violations=violations, total_violating_rows=int(hit.sum()))
