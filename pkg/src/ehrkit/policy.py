"""Access formulas, LSSS compilation, and ACL rule evaluation.

Three cooperating pieces:

* a parser for monotone boolean access formulas in the style
  ``(Doctor or Nurse) and (Floor in (2-5))``, producing a ``PolicyAst``;
* a compiler from monotone ASTs to linear secret-sharing matrices, plus the
  decryption-side search for satisfying rows and reconstruction coefficients;
* a parser and evaluator for ACL rule blocks (subject / operation / object /
  condition / action) with default-deny, first-match-wins semantics.

Numeric range leaves compile to a conjunction of two comparison gadgets, each
expanded as a disjunction of integer-equality attributes over a bounded
domain.  A range is therefore satisfied when the holder owns one value above
the lower bound and one below the upper bound; holders are expected to carry
a single value per numeric attribute.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

__all__ = [
    "PolicyError",
    "PolicySyntaxError",
    "PolicyRangeError",
    "AclSyntaxError",
    "UnknownOperationError",
    "Leaf",
    "RangeLeaf",
    "And",
    "Or",
    "PolicyAst",
    "parse_policy",
    "policy_to_text",
    "policy_attributes",
    "evaluate_policy",
    "expand_ranges",
    "DEFAULT_RANGE_DOMAIN",
    "LsssMatrix",
    "to_lsss",
    "satisfying_rows",
    "Operation",
    "RuleAction",
    "SubjectFieldEquals",
    "SubjectObjectFieldEquals",
    "SignatureVerified",
    "AclRule",
    "AccessRequest",
    "Decision",
    "parse_acl_rule",
    "parse_acl_rules",
    "evaluate_acl",
    "DEFAULT_DENY_RULE_ID",
]


class PolicyError(ValueError):
    """Base error for policy handling."""


class PolicySyntaxError(PolicyError):
    """Malformed policy text; carries line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class PolicyRangeError(PolicyError):
    """A range leaf cannot be expanded over the configured domain."""


class AclSyntaxError(PolicyError):
    """Malformed ACL rule text."""


class UnknownOperationError(AclSyntaxError):
    """Operation keyword outside READ/WRITE/UPDATE."""


# ---------------------------------------------------------------------------
# Policy AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Leaf:
    name: str


@dataclass(frozen=True)
class RangeLeaf:
    name: str
    low: int
    high: int
    low_open: bool = True
    high_open: bool = True


@dataclass(frozen=True)
class And:
    left: "PolicyAst"
    right: "PolicyAst"


@dataclass(frozen=True)
class Or:
    left: "PolicyAst"
    right: "PolicyAst"


PolicyAst = Union[Leaf, RangeLeaf, And, Or]

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<eq>=)
  | (?P<dash>-)
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<number>\d+)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise PolicySyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        value = m.group()
        if kind != "ws":
            tokens.append(_Token(kind, value, line, col))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            col = len(value) - value.rfind("\n")
        else:
            col += len(value)
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token], source: str):
        self.tokens = tokens
        self.pos = 0
        self.source = source

    def _peek(self) -> Optional[_Token]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _next(self) -> _Token:
        tok = self._peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else _Token("", "", 1, 1)
            raise PolicySyntaxError("unexpected end of policy", last.line, last.column + len(last.text))
        self.pos += 1
        return tok

    def _expect(self, kind: str, what: str) -> _Token:
        tok = self._next()
        if tok.kind != kind:
            raise PolicySyntaxError(f"expected {what}, found {tok.text!r}", tok.line, tok.column)
        return tok

    def parse(self) -> PolicyAst:
        node = self._parse_or()
        tok = self._peek()
        if tok is not None:
            raise PolicySyntaxError(f"unexpected trailing token {tok.text!r}", tok.line, tok.column)
        return node

    def _parse_or(self) -> PolicyAst:
        node = self._parse_and()
        while True:
            tok = self._peek()
            if tok and tok.kind == "word" and tok.text.lower() == "or":
                self._next()
                node = Or(node, self._parse_and())
            else:
                return node

    def _parse_and(self) -> PolicyAst:
        node = self._parse_factor()
        while True:
            tok = self._peek()
            if tok and tok.kind == "word" and tok.text.lower() == "and":
                self._next()
                node = And(node, self._parse_factor())
            else:
                return node

    def _parse_factor(self) -> PolicyAst:
        tok = self._next()
        if tok.kind == "lparen":
            node = self._parse_or()
            self._expect("rparen", "')'")
            return node
        if tok.kind != "word" or tok.text.lower() in ("and", "or", "in"):
            raise PolicySyntaxError(f"expected attribute or '(', found {tok.text!r}", tok.line, tok.column)
        name = tok.text
        nxt = self._peek()
        if nxt and nxt.kind == "eq":
            self._next()
            val = self._next()
            if val.kind not in ("word", "number"):
                raise PolicySyntaxError(f"expected value after '=', found {val.text!r}", val.line, val.column)
            return Leaf(f"{name}={val.text}")
        if nxt and nxt.kind == "word" and nxt.text.lower() == "in":
            self._next()
            self._expect("lparen", "'(' after 'in'")
            low = self._expect("number", "range lower bound")
            self._expect("dash", "'-'")
            high = self._expect("number", "range upper bound")
            self._expect("rparen", "')'")
            low_v, high_v = int(low.text), int(high.text)
            if low_v >= high_v:
                raise PolicySyntaxError(f"empty range ({low_v}-{high_v})", low.line, low.column)
            return RangeLeaf(name, low_v, high_v)
        return Leaf(name)


def parse_policy(text: str) -> PolicyAst:
    """Parse an access formula; raises PolicySyntaxError with position info."""
    if not text or not text.strip():
        raise PolicySyntaxError("empty policy", 1, 1)
    return _Parser(_tokenize(text), text).parse()


def policy_to_text(ast: PolicyAst) -> str:
    """Render an AST back to parseable text (round-trips through parse_policy)."""
    if isinstance(ast, Leaf):
        if "=" in ast.name:
            name, value = ast.name.split("=", 1)
            return f"{name} = {value}"
        return ast.name
    if isinstance(ast, RangeLeaf):
        return f"{ast.name} in ({ast.low}-{ast.high})"
    if isinstance(ast, And):
        return f"({policy_to_text(ast.left)} and {policy_to_text(ast.right)})"
    if isinstance(ast, Or):
        return f"({policy_to_text(ast.left)} or {policy_to_text(ast.right)})"
    raise PolicyError(f"unknown AST node {ast!r}")


DEFAULT_RANGE_DOMAIN = range(0, 16)


def _range_values(leaf: RangeLeaf, domain: Iterable[int]) -> tuple[list[int], list[int]]:
    lo_ok = (lambda v: v > leaf.low) if leaf.low_open else (lambda v: v >= leaf.low)
    hi_ok = (lambda v: v < leaf.high) if leaf.high_open else (lambda v: v <= leaf.high)
    above = [v for v in domain if lo_ok(v)]
    below = [v for v in domain if hi_ok(v)]
    return above, below


def _or_chain(name: str, values: Sequence[int]) -> PolicyAst:
    node: PolicyAst = Leaf(f"{name}={values[0]}")
    for v in values[1:]:
        node = Or(node, Leaf(f"{name}={v}"))
    return node


def expand_ranges(ast: PolicyAst, domain: Iterable[int] = DEFAULT_RANGE_DOMAIN) -> PolicyAst:
    """Replace every RangeLeaf by its comparison gadget over integer equalities.

    ``name in (lo-hi)`` becomes AND(OR(name=v : v > lo), OR(name=v : v < hi)),
    mirroring the two-comparison reading of a range and keeping the ABE layer
    entirely range-free.
    """
    domain = list(domain)
    if isinstance(ast, Leaf):
        return ast
    if isinstance(ast, RangeLeaf):
        above, below = _range_values(ast, domain)
        if not above or not below:
            raise PolicyRangeError(
                f"range {ast.name} in ({ast.low}-{ast.high}) has no satisfying values over the domain"
            )
        return And(_or_chain(ast.name, above), _or_chain(ast.name, below))
    if isinstance(ast, And):
        return And(expand_ranges(ast.left, domain), expand_ranges(ast.right, domain))
    if isinstance(ast, Or):
        return Or(expand_ranges(ast.left, domain), expand_ranges(ast.right, domain))
    raise PolicyError(f"unknown AST node {ast!r}")


def policy_attributes(ast: PolicyAst, domain: Iterable[int] = DEFAULT_RANGE_DOMAIN) -> set[str]:
    """All attribute labels the (range-expanded) policy can reference."""
    if isinstance(ast, Leaf):
        return {ast.name}
    if isinstance(ast, RangeLeaf):
        above, below = _range_values(ast, list(domain))
        return {f"{ast.name}={v}" for v in above + below}
    return policy_attributes(ast.left, domain) | policy_attributes(ast.right, domain)


def evaluate_policy(ast: PolicyAst, owned: Iterable[str]) -> bool:
    """Does the owned attribute set satisfy the formula?

    RangeLeaf follows the comparison-gadget semantics used by expand_ranges:
    one owned value above the lower bound and one below the upper bound.
    """
    owned = set(owned)

    def walk(node: PolicyAst) -> bool:
        if isinstance(node, Leaf):
            return node.name in owned
        if isinstance(node, RangeLeaf):
            values = []
            for label in owned:
                name, _, value = label.partition("=")
                if name == node.name and value.lstrip("-").isdigit():
                    values.append(int(value))
            lo_ok = any((v > node.low if node.low_open else v >= node.low) for v in values)
            hi_ok = any((v < node.high if node.high_open else v <= node.high) for v in values)
            return lo_ok and hi_ok
        if isinstance(node, And):
            return walk(node.left) and walk(node.right)
        return walk(node.left) or walk(node.right)

    return walk(ast)


# ---------------------------------------------------------------------------
# LSSS compilation and reconstruction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LsssMatrix:
    """Share-generating matrix with its row labeling.

    A row subset S spans the target vector (1, 0, ..., 0) over the scalar
    field exactly when the labels of S satisfy the source formula.
    """

    matrix: tuple[tuple[int, ...], ...]
    row_labels: tuple[str, ...]

    @property
    def rows(self) -> int:
        return len(self.matrix)

    @property
    def cols(self) -> int:
        return len(self.matrix[0]) if self.matrix else 0

    def target(self) -> tuple[int, ...]:
        return (1,) + (0,) * (self.cols - 1)


def to_lsss(ast: PolicyAst) -> LsssMatrix:
    """Monotone-formula to LSSS compilation by vector labeling.

    The root carries (1); an AND node extends its label with 1 for the left
    child and hands (0, ..., 0, -1) to the right; an OR node copies its label
    to both children.  Range leaves must be expanded beforehand.
    """
    rows: list[tuple[str, list[int]]] = []
    counter = 1

    def assign(node: PolicyAst, vec: list[int]) -> None:
        nonlocal counter
        if isinstance(node, Leaf):
            rows.append((node.name, vec))
        elif isinstance(node, Or):
            assign(node.left, vec)
            assign(node.right, vec)
        elif isinstance(node, And):
            left = vec + [0] * (counter - len(vec)) + [1]
            right = [0] * counter + [-1]
            counter += 1
            assign(node.left, left)
            assign(node.right, right)
        elif isinstance(node, RangeLeaf):
            raise PolicyError("range leaves must be expanded before LSSS compilation")
        else:
            raise PolicyError(f"unknown AST node {node!r}")

    assign(ast, [1])
    matrix = tuple(tuple(vec + [0] * (counter - len(vec))) for _, vec in rows)
    return LsssMatrix(matrix, tuple(label for label, _ in rows))


def satisfying_rows(
    lsss: LsssMatrix, owned: Iterable[str]
) -> Optional[tuple[list[int], list[int]]]:
    """Rows owned by the caller that reconstruct the target vector.

    Returns (row_indices, coefficients) with
    sum_i coefficients[i] * matrix[row_indices[i]] == (1, 0, ..., 0),
    or None when the owned attributes do not satisfy the policy.  Solved
    exactly, so the coefficients are plain integers or small rationals
    reduced to integers; embed them into the scalar field at use time.
    """
    owned = set(owned)
    candidates = [i for i, label in enumerate(lsss.row_labels) if label in owned]
    if not candidates:
        return None
    k = len(candidates)
    cols = lsss.cols
    # Solve M c = target where M[j][i] = matrix[candidates[i]][j].
    aug = [[Fraction(lsss.matrix[candidates[i]][j]) for i in range(k)] + [Fraction(1 if j == 0 else 0)]
           for j in range(cols)]
    pivot_cols: list[int] = []
    row = 0
    for col in range(k):
        pivot = next((r for r in range(row, cols) if aug[r][col] != 0), None)
        if pivot is None:
            continue
        aug[row], aug[pivot] = aug[pivot], aug[row]
        inv = 1 / aug[row][col]
        aug[row] = [x * inv for x in aug[row]]
        for r in range(cols):
            if r != row and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [a - factor * b for a, b in zip(aug[r], aug[row])]
        pivot_cols.append(col)
        row += 1
        if row == cols:
            break
    # Inconsistent system: a zero row with nonzero rhs.
    for r in range(row, cols):
        if aug[r][k] != 0:
            return None
    solution = [Fraction(0)] * k
    for r, col in enumerate(pivot_cols):
        solution[col] = aug[r][k]
    rows_out: list[int] = []
    coeffs_out: list[int] = []
    for idx, c in zip(candidates, solution):
        if c != 0:
            rows_out.append(idx)
            if c.denominator == 1:
                coeffs_out.append(int(c))
            else:
                # Rare: push the rational into the scalar field lazily by
                # returning numerator/denominator as an exact pair encoded in
                # a Fraction; consumers embed mod the group order.
                coeffs_out.append(c)  # type: ignore[arg-type]
    return rows_out, coeffs_out


# ---------------------------------------------------------------------------
# ACL rules
# ---------------------------------------------------------------------------


class Operation(str, Enum):
    READ = "READ"
    WRITE = "WRITE"
    UPDATE = "UPDATE"


class RuleAction(str, Enum):
    ALLOW = "ALLOW"
    DENY = "DENY"


@dataclass(frozen=True)
class SubjectFieldEquals:
    field: str
    value: str


@dataclass(frozen=True)
class SubjectObjectFieldEquals:
    subject_field: str
    object_field: str


@dataclass(frozen=True)
class SignatureVerified:
    attribute: str


Predicate = Union[SubjectFieldEquals, SubjectObjectFieldEquals, SignatureVerified]


@dataclass(frozen=True)
class AclRule:
    name: str
    description: str
    subject_pattern: str
    operation: Operation
    object_pattern: str
    condition: tuple[Predicate, ...]
    action: RuleAction

    @property
    def conditional(self) -> bool:
        return bool(self.condition)

    def signature_attributes(self) -> list[str]:
        return [p.attribute for p in self.condition if isinstance(p, SignatureVerified)]


@dataclass(frozen=True)
class AccessRequest:
    subject: Mapping[str, str]
    verified_attributes: frozenset[str]
    operation: Operation
    object: Mapping[str, str]


DEFAULT_DENY_RULE_ID = "default-deny"


@dataclass(frozen=True)
class Decision:
    action: RuleAction
    rule_id: str
    reason: str

    @property
    def allowed(self) -> bool:
        return self.action is RuleAction.ALLOW


_RULE_BLOCK_RE = re.compile(r"rule\s+(?P<name>[A-Za-z_][A-Za-z0-9_]*)\s*\{(?P<body>.*?)\}", re.DOTALL)
_FIELD_RE = {
    "description": re.compile(r"description\s*:\s*\"(?P<v>[^\"]*)\"", re.DOTALL),
    "subject": re.compile(r"subject\(v\)\s*:\s*\"(?P<v>[^\"]*)\"", re.DOTALL),
    "operation": re.compile(r"operation\s*:\s*(?P<v>[A-Za-z_]+)"),
    "object": re.compile(r"object\(t\)\s*:\s*\"(?P<v>[^\"]*)\"", re.DOTALL),
    "condition": re.compile(r"condition\s*:\s*\"(?P<v>[^\"]*)\"", re.DOTALL),
    "action": re.compile(r"action\s*:\s*(?P<v>[A-Za-z_]+)"),
}

_PRED_SIG_RE = re.compile(r"^t\.(?P<attr>[A-Za-z_][A-Za-z0-9_]*)\.verify\(\)\s*===\s*true$")
_PRED_SUBJ_OBJ_RE = re.compile(r"^v\.(?P<sf>[A-Za-z_][A-Za-z0-9_]*)\s*===\s*t\.(?P<of>[A-Za-z_][A-Za-z0-9_]*)$")
_PRED_SUBJ_RE = re.compile(r"^v\.(?P<field>[A-Za-z_][A-Za-z0-9_]*)\s*===\s*(?P<value>\"[^\"]*\"|[A-Za-z0-9_.-]+)$")


def _squash(text: str) -> str:
    return " ".join(text.split())


def _parse_predicate(text: str) -> Predicate:
    text = _squash(text)
    m = _PRED_SIG_RE.match(text)
    if m:
        return SignatureVerified(m.group("attr"))
    m = _PRED_SUBJ_OBJ_RE.match(text)
    if m:
        return SubjectObjectFieldEquals(m.group("sf"), m.group("of"))
    m = _PRED_SUBJ_RE.match(text)
    if m:
        value = m.group("value").strip('"')
        return SubjectFieldEquals(m.group("field"), value)
    raise AclSyntaxError(f"malformed condition predicate: {text!r}")


def _parse_rule_body(name: str, body: str) -> AclRule:
    fields = {}
    for key, pattern in _FIELD_RE.items():
        m = pattern.search(body)
        if m:
            fields[key] = _squash(m.group("v"))
    for required in ("subject", "operation", "object", "action"):
        if required not in fields:
            raise AclSyntaxError(f"rule {name}: missing {required}")
    op = fields["operation"].upper()
    if op not in Operation.__members__:
        raise UnknownOperationError(f"rule {name}: unknown operation {fields['operation']!r}")
    action = fields["action"].upper()
    if action not in RuleAction.__members__:
        raise AclSyntaxError(f"rule {name}: unknown action {fields['action']!r}")
    condition: tuple[Predicate, ...] = ()
    if "condition" in fields and fields["condition"]:
        condition = tuple(_parse_predicate(p) for p in fields["condition"].split("&&"))
    return AclRule(
        name=name,
        description=fields.get("description", ""),
        subject_pattern=fields["subject"],
        operation=Operation[op],
        object_pattern=fields["object"],
        condition=condition,
        action=RuleAction[action],
    )


def parse_acl_rule(text: str) -> AclRule:
    """Parse a single rule block in the Rule1 layout."""
    m = _RULE_BLOCK_RE.search(text)
    if m is None:
        raise AclSyntaxError("no rule block found")
    return _parse_rule_body(m.group("name"), m.group("body"))


def parse_acl_rules(text: str) -> list[AclRule]:
    """Parse every rule block in a rule file, in order."""
    rules = [_parse_rule_body(m.group("name"), m.group("body")) for m in _RULE_BLOCK_RE.finditer(text)]
    if not rules:
        raise AclSyntaxError("no rule blocks found")
    return rules


def _glob_match(pattern: str, value: str) -> bool:
    import fnmatch

    return fnmatch.fnmatchcase(value, pattern)


def subject_string(subject: Mapping[str, str]) -> str:
    return f"{subject.get('organization', '')}.{subject.get('role', '')}#{subject.get('id', '')}"


def object_string(obj: Mapping[str, str]) -> str:
    return f"{obj.get('organization', '')}.patient#{obj.get('gid', '')}.data"


def evaluate_acl(
    rules: Sequence[AclRule],
    request: AccessRequest,
    verify: Callable[[str], bool],
) -> Decision:
    """First matching rule wins; no match is a default deny.

    A rule matches when operation, subject pattern, and object pattern all
    apply and every condition predicate holds.  Signature predicates are
    dispatched through the supplied verifier; a predicate that raises counts
    as false.
    """
    for rule in rules:
        if rule.operation is not request.operation:
            continue
        if not _glob_match(rule.subject_pattern, subject_string(request.subject)):
            continue
        if not _glob_match(rule.object_pattern, object_string(request.object)):
            continue
        satisfied = True
        for pred in rule.condition:
            try:
                if isinstance(pred, SignatureVerified):
                    ok = bool(verify(pred.attribute))
                elif isinstance(pred, SubjectFieldEquals):
                    ok = request.subject.get(pred.field) == pred.value
                else:
                    left = request.subject.get(pred.subject_field)
                    right = request.object.get(pred.object_field)
                    ok = left is not None and left == right
            except Exception:
                ok = False
            if not ok:
                satisfied = False
                break
        if satisfied:
            return Decision(rule.action, rule.name, f"matched rule {rule.name}")
    return Decision(RuleAction.DENY, DEFAULT_DENY_RULE_ID, "no matching rule")
