"""End-to-end orchestration: registration, upload, access, retrieval, claims."""

import inspect

import pytest

from ehrkit.absa import AttributeStatement, ThresholdSpec
from ehrkit.dagstore import ExpiredTokenError
from ehrkit.maabe import PolicyNotSatisfiedError
from ehrkit.paillier import paillier_decrypt, paillier_encrypt
from ehrkit.policy import Operation, PolicySyntaxError
from ehrkit.workflow import (
    DuplicateGidError,
    EhrSystem,
    Role,
    UnknownParticipantError,
    WorkflowError,
    insurance_claim_check,
)

ANNIE_ATTRS = [
    AttributeStatement("Mercy", "patient_id", "0003231"),
    AttributeStatement("DMV", "driver_license", "9907184"),
    AttributeStatement("BlueSafeguard", "insurance_id", "1EG4-TE5-MK72"),
]
SCENARIO_POLICY = "(Doctor or Nurse) and (Floor in (2-5))"


@pytest.fixture(scope="module")
def system():
    sys = EhrSystem()
    annie = sys.register_participant(Role.PATIENT, "Annie Foster", "Mercy", ANNIE_ATTRS)
    dan = sys.register_participant(
        Role.DOCTOR,
        "Dr. Dan",
        "Mercy",
        [AttributeStatement("Mercy", "Doctor"), AttributeStatement("Mercy", "Floor", "4")],
    )
    charlie = sys.register_participant(
        Role.DOCTOR,
        "Charlie",
        "Mercy",
        [AttributeStatement("Mercy", "Doctor"), AttributeStatement("Mercy", "Floor", "5"),
         AttributeStatement("Mercy", "Male"), AttributeStatement("Mercy", "Cardiologist")],
    )
    insurer = sys.register_participant(Role.INSURER, "Blue Safeguard", "BlueSafeguard", [])
    record = sys.upload_ehr(
        annie.gid,
        b"Annie's encrypted chart",
        SCENARIO_POLICY,
        {"amount": 1500},
        insurer.paillier_public,
    )
    return sys, annie, dan, charlie, insurer, record


class TestRegistration:
    def test_annie_has_three_bundles(self, system):
        _, annie, *_ = system
        assert len(annie.absa_material) == 3
        for bundle in annie.absa_material.values():
            assert len(bundle.signing_keys) == 1
            assert len(bundle.signatures) == 1

    def test_zero_attribute_registration_is_valid(self, system):
        sys, *_ = system
        ghost = sys.register_participant(Role.RESEARCHER, "Ghost", "Lab", [])
        assert ghost.absa_material == {} and ghost.attribute_keys == {}

    def test_duplicate_gid_conflict(self, system):
        sys, annie, *_ = system
        with pytest.raises(DuplicateGidError):
            sys.register_participant(Role.PATIENT, "Clone", "Mercy", [], gid=annie.gid)

    def test_registration_event_committed(self, system):
        sys, annie, *_ = system
        regs = [
            tx
            for tx in sys.ledger.committed_transactions()
            if tx.payload.get("type") == "registration_event" and tx.payload.get("gid") == annie.gid
        ]
        assert len(regs) == 1
        assert sorted(regs[0].payload["attributes"]) == ["driver_license", "insurance_id", "patient_id"]

    def test_gids_are_sequential(self, system):
        _, annie, dan, charlie, insurer, _ = system
        assert [annie.gid, dan.gid, charlie.gid, insurer.gid] == ["1", "2", "3", "4"]


class TestUpload:
    def test_record_resolves_to_policy_bound_envelope(self, system):
        sys, annie, *_ , record = system
        assert record.policy_text == SCENARIO_POLICY
        blob = sys.dag.get_blob(record.root_cid)
        assert b"(Doctor or Nurse)" in blob  # policy text rides in the envelope

    def test_claim_field_roundtrip(self, system):
        sys, annie, dan, charlie, insurer, record = system
        value = paillier_decrypt(insurer.paillier_private, insurer.paillier_public, record.claim_fields["amount"])
        assert value == 1500

    def test_policy_parse_error_propagates(self, system):
        sys, annie, *_ = system
        with pytest.raises(PolicySyntaxError):
            sys.upload_ehr(annie.gid, b"x", "and and")

    def test_claims_require_insurer_key(self, system):
        sys, annie, *_ = system
        with pytest.raises(WorkflowError):
            sys.upload_ehr(annie.gid, b"x", "Doctor", {"amount": 1})

    def test_empty_plaintext_upload(self, system):
        sys, _, dan, *_ = system
        empty_patient = sys.register_participant(Role.PATIENT, "Empty", "Mercy", [])
        record = sys.upload_ehr(empty_patient.gid, b"", "Doctor")
        assert sys.dag.has(record.root_cid)


class TestRequestAccess:
    def test_mercy_doctor_rule1_allow(self, system):
        sys, annie, dan, *_ = system
        grant = sys.request_access(dan.gid, annie.gid, Operation.READ, ThresholdSpec(3, 3))
        assert grant.allowed and grant.decision.rule_id == "Rule1"
        assert grant.token_uri.startswith("otk://")

    def test_threshold_failure_denies(self, system):
        sys, annie, dan, *_ = system
        partial = sys.register_participant(
            Role.PATIENT, "Partial", "Mercy",
            [AttributeStatement("Mercy", "patient_id", "77"), AttributeStatement("DMV", "driver_license", "88")],
        )
        sys.upload_ehr(partial.gid, b"partial chart", "Doctor")
        researcher = sys.register_participant(Role.RESEARCHER, "Rhea", "Mercy", [])
        grant = sys.request_access(researcher.gid, partial.gid, Operation.READ, ThresholdSpec(3, 3))
        assert not grant.allowed
        assert grant.decision.rule_id == "threshold-check"
        assert grant.token_uri is None

    def test_patient_cross_access_denied(self, system):
        sys, annie, *_ = system
        carmen = sys.register_participant(Role.PATIENT, "Carmen Maxwell", "Mercy", [])
        grant = sys.request_access(carmen.gid, annie.gid, Operation.READ)
        assert not grant.allowed and grant.decision.rule_id == "default-deny"

    def test_patient_self_access_allowed(self, system):
        sys, annie, *_ = system
        grant = sys.request_access(annie.gid, annie.gid, Operation.READ)
        assert grant.allowed and grant.decision.rule_id == "PatientSelfAccess"

    def test_unknown_patient(self, system):
        sys, _, dan, *_ = system
        with pytest.raises(UnknownParticipantError):
            sys.request_access(dan.gid, "404", Operation.READ)

    def test_every_request_commits_one_event(self, system):
        sys, annie, dan, *_ = system
        before = len(sys.events())
        sys.request_access(dan.gid, annie.gid, Operation.READ)
        assert len(sys.events()) == before + 1


class TestRetrieve:
    def test_qualified_doctor_roundtrip(self, system):
        sys, annie, dan, *_ = system
        grant = sys.request_access(dan.gid, annie.gid, Operation.READ, ThresholdSpec(1, 3))
        assert grant.allowed
        assert sys.retrieve_and_decrypt(dan.gid, grant.token_uri) == b"Annie's encrypted chart"

    def test_token_single_use(self, system):
        sys, annie, dan, *_ = system
        grant = sys.request_access(dan.gid, annie.gid, Operation.READ)
        sys.retrieve_and_decrypt(dan.gid, grant.token_uri)
        with pytest.raises(ExpiredTokenError):
            sys.retrieve_and_decrypt(dan.gid, grant.token_uri)

    def test_unqualified_keys_burn_token_and_fail(self, system):
        sys, annie, dan, charlie, *_ = system
        grant = sys.request_access(charlie.gid, annie.gid, Operation.READ)
        assert grant.allowed  # Rule1 verifies Annie's attributes, not Charlie's floor
        with pytest.raises(PolicyNotSatisfiedError):
            sys.retrieve_and_decrypt(charlie.gid, grant.token_uri)
        with pytest.raises(ExpiredTokenError):
            sys.retrieve_and_decrypt(charlie.gid, grant.token_uri)


class TestClaims:
    def test_equal_claim_settles(self, system):
        sys, annie, dan, charlie, insurer, record = system
        claimed = paillier_encrypt(insurer.paillier_public, 1500)
        assert sys.claim_check(insurer.gid, annie.gid, "amount", claimed) is True

    def test_off_by_one_rejected(self, system):
        sys, annie, _, _, insurer, record = system
        claimed = paillier_encrypt(insurer.paillier_public, 1501)
        assert sys.claim_check(insurer.gid, annie.gid, "amount", claimed) is False

    def test_unknown_field(self, system):
        sys, annie, _, _, insurer, record = system
        claimed = paillier_encrypt(insurer.paillier_public, 1)
        with pytest.raises(KeyError):
            insurance_claim_check(
                insurer.paillier_private, insurer.paillier_public, record, "copay", claimed
            )

    def test_insurer_isolation_is_structural(self):
        # The claim-check interface has no way to receive attribute keys.
        params = set(inspect.signature(insurance_claim_check).parameters)
        assert params == {"insurer_sk", "insurer_pk", "record", "field_name", "claimed_ct"}


class TestEndToEndSafety:
    """Plaintext comes back only when ACL, threshold, and ABE policy all pass."""

    def test_acl_deny_yields_no_token(self, system):
        sys, annie, *_ = system
        outsider = sys.register_participant(Role.PATIENT, "Outsider", "Mercy", [])
        grant = sys.request_access(outsider.gid, annie.gid, Operation.READ)
        assert not grant.allowed and grant.token_uri is None

    def test_threshold_fail_yields_no_token(self, system):
        sys, annie, dan, *_ = system
        # Annie has 3 verifiable attributes; demanding 4-of-4 cannot be met.
        grant = sys.request_access(dan.gid, annie.gid, Operation.READ, ThresholdSpec(4, 4))
        assert not grant.allowed and grant.token_uri is None

    def test_abe_gate_withholds_plaintext_even_with_token(self, system):
        sys, annie, dan, charlie, *_ = system
        grant = sys.request_access(charlie.gid, annie.gid, Operation.READ)
        assert grant.allowed
        with pytest.raises(PolicyNotSatisfiedError):
            sys.retrieve_and_decrypt(charlie.gid, grant.token_uri)

    def test_all_gates_pass_returns_plaintext(self, system):
        sys, annie, dan, *_ = system
        grant = sys.request_access(dan.gid, annie.gid, Operation.READ, ThresholdSpec(3, 3))
        assert sys.retrieve_and_decrypt(dan.gid, grant.token_uri) == b"Annie's encrypted chart"


class TestAuditInvariants:
    def test_token_conservation(self, system):
        sys, *_ = system
        allows = len(sys.events(decision="ALLOW"))
        retrievals = sum(
            1 for tx in sys.ledger.committed_transactions() if tx.payload.get("type") == "retrieval_event"
        )
        assert retrievals <= allows

    def test_chain_verifies(self, system):
        sys, *_ = system
        assert sys.ledger.verify_chain()

    def test_decision_history_replayable(self, system):
        sys, annie, *_ = system
        events = sys.events(patient_gid=annie.gid)
        assert events, "expected access events for annie"
        for event in events:
            assert event.decision in ("ALLOW", "DENY")
            assert event.rule_id
            if event.decision == "ALLOW":
                assert event.one_time_token_id
            else:
                assert event.one_time_token_id is None
