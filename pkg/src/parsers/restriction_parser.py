# src/parsers/restriction_parser.py
"""
Parser for restriction (skip-pattern) expressions such as

    own_home == 'yes' AND (n_homes >= 2 OR second_home != 0)

Comparisons are `variable op constant`; AND binds tighter than OR; parentheses
group. Constants are numbers, quoted labels or bare words (labels). No
arithmetic.
"""
import re
from typing import List, Tuple

from src.domain.enums import BooleanOp, ComparisonOp
from src.domain.errors import ConfigError
from src.domain.variables import BooleanExpression, Comparison, RestrictionRule, RuleNode

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<lparen>\()|(?P<rparen>\))"
    r"|(?P<op>==|!=|<=|>=|<|>)"
    r"|(?P<and>&&|\bAND\b)|(?P<or>\|\||\bOR\b)"
    r"|(?P<quoted>'[^']*'|\"[^\"]*\")"
    r"|(?P<number>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"
    r"|(?P<word>[A-Za-z_][A-Za-z0-9_.]*)"
    r")",
    re.IGNORECASE,
)

Token = Tuple[str, str]


def _tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if not match or match.end() == pos:
            raise ConfigError(f"Cannot parse restriction '{text}' at position {pos}: '{text[pos:pos + 10]}'")
        kind = match.lastgroup
        tokens.append((kind, match.group(kind)))
        pos = match.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def _peek(self) -> Tuple[str, str]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else ("end", "")

    def _take(self, kind: str) -> str:
        tok_kind, value = self._peek()
        if tok_kind != kind:
            raise ConfigError(f"Restriction '{self.text}': expected {kind}, found '{value or 'end of input'}'")
        self.pos += 1
        return value

    def parse(self) -> RuleNode:
        node = self._expression()
        if self.pos != len(self.tokens):
            raise ConfigError(f"Restriction '{self.text}': unexpected '{self._peek()[1]}'")
        return node

    def _expression(self) -> RuleNode:
        operands = [self._term()]
        while self._peek()[0] == "or":
            self.pos += 1
            operands.append(self._term())
        return operands[0] if len(operands) == 1 else BooleanExpression(BooleanOp.OR, tuple(operands))

    def _term(self) -> RuleNode:
        operands = [self._factor()]
        while self._peek()[0] == "and":
            self.pos += 1
            operands.append(self._factor())
        return operands[0] if len(operands) == 1 else BooleanExpression(BooleanOp.AND, tuple(operands))

    def _factor(self) -> RuleNode:
        if self._peek()[0] == "lparen":
            self.pos += 1
            node = self._expression()
            self._take("rparen")
            return node
        variable = self._take("word")
        op = ComparisonOp(self._take("op"))
        kind, value = self._peek()
        if kind == "quoted":
            constant = value[1:-1]
        elif kind in ("number", "word"):
            constant = value
        else:
            raise ConfigError(f"Restriction '{self.text}': expected a constant after '{variable} {op.value}'")
        self.pos += 1
        # Constants stay raw tokens here; load-time resolution maps them to level indices or floats
        return Comparison(variable, op, constant)


def parse_restriction(text: str) -> RestrictionRule:
    if not text or not text.strip():
        raise ConfigError("Empty restriction expression.")
    return RestrictionRule(_Parser(text).parse(), text.strip())
