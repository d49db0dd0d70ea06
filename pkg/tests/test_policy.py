"""Formula parsing, LSSS compilation, reconstruction, and ACL evaluation."""

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ehrkit.policy import (
    AccessRequest,
    AclSyntaxError,
    And,
    Leaf,
    Operation,
    Or,
    PolicyRangeError,
    PolicySyntaxError,
    RangeLeaf,
    RuleAction,
    SubjectFieldEquals,
    SubjectObjectFieldEquals,
    UnknownOperationError,
    evaluate_acl,
    evaluate_policy,
    expand_ranges,
    parse_acl_rule,
    parse_acl_rules,
    parse_policy,
    policy_attributes,
    policy_to_text,
    satisfying_rows,
    to_lsss,
)

Q = 21888242871839275222246405745257275088548364400416034343698204186575808495617

SCENARIO = "(Doctor or Nurse) and (Floor in (2-5))"

RULE1_TEXT = """rule Rule1 {
  description: "Only doctor from the
   Mercy Hospital could access EHR"
  subject(v): "Mercy.Doctor#102"
  operation: READ
  object(t):"Mercy.patient#205.data"
  condition: "v.role === Doctor &&
   v.organization === Mercy &&
   t.patient_id.verify() === true &&
   t.driver_license.verify() === true &&
   t.insurance_id.verify() === true"
  action: ALLOW
}"""


class TestParser:
    def test_single_leaf(self):
        assert parse_policy("Doctor") == Leaf("Doctor")

    def test_scenario_policy(self):
        assert parse_policy(SCENARIO) == And(
            Or(Leaf("Doctor"), Leaf("Nurse")), RangeLeaf("Floor", 2, 5)
        )

    def test_equality_leaf(self):
        assert parse_policy("Floor = 3") == Leaf("Floor=3")

    def test_precedence_and_binds_tighter(self):
        assert parse_policy("A or B and C") == Or(Leaf("A"), And(Leaf("B"), Leaf("C")))

    def test_leading_operator_is_syntax_error(self):
        with pytest.raises(PolicySyntaxError) as err:
            parse_policy("and Doctor")
        assert err.value.line == 1 and err.value.column == 1

    def test_error_carries_position(self):
        with pytest.raises(PolicySyntaxError) as err:
            parse_policy("(Doctor or\n or)")
        assert err.value.line == 2

    def test_empty_input(self):
        with pytest.raises(PolicySyntaxError):
            parse_policy("   ")

    def test_unbalanced_paren(self):
        with pytest.raises(PolicySyntaxError):
            parse_policy("(Doctor or Nurse")

    def test_empty_range_rejected(self):
        with pytest.raises(PolicySyntaxError):
            parse_policy("Floor in (5-5)")


_leaves = st.sampled_from(["Doctor", "Nurse", "Floor=3", "Admin", "Lab"]).map(Leaf)
_ranges = st.tuples(st.sampled_from(["Floor", "Ward"]), st.integers(0, 6)).map(
    lambda t: RangeLeaf(t[0], t[1], t[1] + 2)
)


def _ast_strategy():
    return st.recursive(
        _leaves | _ranges,
        lambda children: st.tuples(children, children).map(lambda t: And(*t))
        | st.tuples(children, children).map(lambda t: Or(*t)),
        max_leaves=8,
    )


class TestPrettyPrintRoundtrip:
    @given(_ast_strategy())
    @settings(max_examples=200, deadline=None)
    def test_roundtrip(self, ast):
        assert parse_policy(policy_to_text(ast)) == ast


class TestLsss:
    def test_single_leaf_matrix(self):
        m = to_lsss(Leaf("A"))
        assert m.matrix == ((1,),) and m.row_labels == ("A",)

    def test_or_matrix(self):
        m = to_lsss(Or(Leaf("A"), Leaf("B")))
        assert m.matrix == ((1,), (1,)) and m.row_labels == ("A", "B")

    def test_and_matrix(self):
        m = to_lsss(And(Leaf("A"), Leaf("B")))
        assert m.matrix == ((1, 1), (0, -1)) and m.row_labels == ("A", "B")

    def test_range_leaf_requires_expansion(self):
        with pytest.raises(Exception):
            to_lsss(RangeLeaf("Floor", 2, 5))

    def test_exhaustive_equivalence_on_corpus(self):
        """Row-subset span agrees with formula evaluation for every subset."""
        rng = random.Random(0x1555)
        names = ["A", "B", "C", "D", "E", "F"]

        def formula(depth=0):
            if depth > 3 or rng.random() < 0.4:
                return Leaf(rng.choice(names))
            node = And if rng.random() < 0.5 else Or
            return node(formula(depth + 1), formula(depth + 1))

        for _ in range(60):
            ast = formula()
            m = to_lsss(ast)
            for bits in range(64):
                owned = {names[i] for i in range(6) if bits >> i & 1}
                assert (satisfying_rows(m, owned) is not None) == evaluate_policy(ast, owned)

    def test_reconstruction_is_exact(self):
        ast = parse_policy("(A and B) or (C and (D or E))")
        m = to_lsss(ast)
        result = satisfying_rows(m, {"C", "E"})
        assert result is not None
        rows, coeffs = result
        total = [0] * m.cols
        for idx, c in zip(rows, coeffs):
            scalar = int(c) if not isinstance(c, Fraction) else (c.numerator * pow(c.denominator, -1, Q)) % Q
            for j in range(m.cols):
                total[j] = (total[j] + scalar * m.matrix[idx][j]) % Q
        assert tuple(total) == tuple(x % Q for x in m.target())

    def test_paper_satisfying_cases(self):
        m = to_lsss(expand_ranges(parse_policy(SCENARIO)))
        assert satisfying_rows(m, {"Nurse", "Floor=3"}) is not None
        assert satisfying_rows(m, {"Cardiologist"}) is None
        assert satisfying_rows(m, {"Male", "Doctor", "Floor=5"}) is None

    def test_or_single_row_coefficient(self):
        m = to_lsss(Or(Leaf("Doctor"), Leaf("Nurse")))
        rows, coeffs = satisfying_rows(m, {"Doctor"})
        assert rows == [0] and coeffs == [1]


class TestRangeExpansion:
    def test_open_interval_semantics(self):
        ast = parse_policy("Floor in (2-5)")
        assert evaluate_policy(ast, {"Floor=3"})
        assert evaluate_policy(ast, {"Floor=4"})
        assert not evaluate_policy(ast, {"Floor=2"})
        assert not evaluate_policy(ast, {"Floor=5"})
        expanded = expand_ranges(ast)
        m = to_lsss(expanded)
        for value, expected in [(2, False), (3, True), (4, True), (5, False)]:
            assert (satisfying_rows(m, {f"Floor={value}"}) is not None) == expected

    def test_expansion_matches_evaluation_over_single_values(self):
        ast = parse_policy(SCENARIO)
        expanded = expand_ranges(ast)
        m = to_lsss(expanded)
        for role in ("Doctor", "Nurse", "Admin"):
            for floor in range(0, 8):
                owned = {role, f"Floor={floor}"}
                assert (satisfying_rows(m, owned) is not None) == evaluate_policy(ast, owned)

    def test_domain_exhaustion(self):
        with pytest.raises(PolicyRangeError):
            expand_ranges(parse_policy("Floor in (20-25)"))

    def test_attribute_listing(self):
        labels = policy_attributes(parse_policy(SCENARIO))
        assert "Doctor" in labels and "Floor=3" in labels and "Floor=4" in labels


class TestAclRules:
    def test_rule1_verbatim(self):
        rule = parse_acl_rule(RULE1_TEXT)
        assert rule.name == "Rule1"
        assert rule.operation is Operation.READ
        assert rule.action is RuleAction.ALLOW
        assert len(rule.condition) == 5
        assert rule.signature_attributes() == ["patient_id", "driver_license", "insurance_id"]
        assert SubjectFieldEquals("role", "Doctor") in rule.condition
        assert SubjectFieldEquals("organization", "Mercy") in rule.condition

    def test_unknown_operation(self):
        with pytest.raises(UnknownOperationError):
            parse_acl_rule(RULE1_TEXT.replace("READ", "DELETE"))

    def test_non_conditional_rule(self):
        rule = parse_acl_rule(
            'rule Open { description: "open" subject(v): "*" operation: WRITE object(t): "*" action: ALLOW }'
        )
        assert not rule.conditional

    def test_malformed_predicate(self):
        bad = RULE1_TEXT.replace("v.role === Doctor", "role == Doctor")
        with pytest.raises(AclSyntaxError):
            parse_acl_rule(bad)

    def test_multiple_blocks_in_order(self):
        rules = parse_acl_rules(RULE1_TEXT + "\n" + RULE1_TEXT.replace("Rule1", "Rule2"))
        assert [r.name for r in rules] == ["Rule1", "Rule2"]

    def test_subject_object_predicate(self):
        rule = parse_acl_rule(
            'rule Self { description: "" subject(v): "*" operation: READ object(t): "*" '
            'condition: "v.gid === t.gid" action: ALLOW }'
        )
        assert rule.condition == (SubjectObjectFieldEquals("gid", "gid"),)


def _doctor_request(**overrides):
    base = dict(
        subject={"organization": "Mercy", "role": "Doctor", "id": "102", "gid": "7"},
        verified_attributes=frozenset({"patient_id", "driver_license", "insurance_id"}),
        operation=Operation.READ,
        object={"organization": "Mercy", "gid": "205"},
    )
    base.update(overrides)
    return AccessRequest(**base)


class TestEvaluateAcl:
    def test_mercy_doctor_allowed(self):
        rule = parse_acl_rule(RULE1_TEXT)
        decision = evaluate_acl([rule], _doctor_request(), lambda a: True)
        assert decision.allowed and decision.rule_id == "Rule1"

    def test_failed_signature_predicate_denies(self):
        rule = parse_acl_rule(RULE1_TEXT)
        decision = evaluate_acl([rule], _doctor_request(), lambda a: a != "insurance_id")
        assert not decision.allowed and decision.rule_id == "default-deny"

    def test_no_matching_rule_default_deny(self):
        rule = parse_acl_rule(RULE1_TEXT)
        patient_req = _doctor_request(subject={"organization": "Mercy", "role": "Patient", "id": "3", "gid": "3"})
        decision = evaluate_acl([rule], patient_req, lambda a: True)
        assert decision.action is RuleAction.DENY and decision.rule_id == "default-deny"

    def test_first_match_wins(self):
        deny = parse_acl_rule(
            'rule Block { description: "" subject(v): "Mercy.Doctor#*" operation: READ object(t): "*" action: DENY }'
        )
        allow = parse_acl_rule(RULE1_TEXT)
        decision = evaluate_acl([deny, allow], _doctor_request(), lambda a: True)
        assert decision.action is RuleAction.DENY and decision.rule_id == "Block"

    def test_callback_exception_counts_as_false(self):
        rule = parse_acl_rule(RULE1_TEXT)

        def explode(attr):
            raise RuntimeError("verifier offline")

        decision = evaluate_acl([rule], _doctor_request(), explode)
        assert not decision.allowed

    def test_total_and_deterministic(self):
        rule = parse_acl_rule(RULE1_TEXT)
        req = _doctor_request()
        outcomes = {evaluate_acl([rule], req, lambda a: True).rule_id for _ in range(10)}
        assert outcomes == {"Rule1"}
