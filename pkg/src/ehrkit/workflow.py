"""End-to-end orchestration: registration, key issuance, upload, access, claims.

Wires the cryptographic layers to the ledger and the off-chain store:

1. participants register and receive a GID, per-attribute signing keys, and
   GID-bound decryption keys;
2. patients upload hybrid-encrypted records to the content-addressed store,
   with numeric claim fields encrypted separately under the insurer's
   Paillier key;
3. a requestor's access runs the signature threshold check and the ACL rule
   set; an ALLOW mints a one-time retrieval token and both outcomes commit an
   access event to the ledger;
4. retrieval burns the token (even when decryption subsequently fails) and
   attempts hybrid decryption with the requestor's attribute keys;
5. insurers test claim equality on ciphertexts without touching attribute
   keys or plaintext.
"""

from __future__ import annotations

import json
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

from . import absa, maabe, paillier
from .absa import (
    AggregatedSignature,
    AggregatedVerificationKey,
    AttributeStatement,
    ThresholdSpec,
)
from .dagstore import Cid, DagStore, MemoryBlockStore, TokenRegistry
from .encoding import canonical_json
from .ledger import (
    AccessEvent,
    EndorsementPolicy,
    LedgerConfig,
    LedgerSimulator,
    PeerProfile,
)
from .pairing import GroupParams, default_params
from .policy import (
    AccessRequest,
    AclRule,
    Decision,
    Operation,
    RuleAction,
    evaluate_acl,
    expand_ranges,
    parse_acl_rules,
    parse_policy,
    policy_attributes,
)

__all__ = [
    "Role",
    "Participant",
    "EhrRecord",
    "AccessGrant",
    "WorkflowError",
    "UnknownParticipantError",
    "DuplicateGidError",
    "EhrSystem",
    "DEFAULT_RULES_TEXT",
    "insurance_claim_check",
    "TOKEN_URI_SCHEME",
]

TOKEN_URI_SCHEME = "otk"


class WorkflowError(Exception):
    pass


class UnknownParticipantError(WorkflowError):
    pass


class DuplicateGidError(WorkflowError):
    pass


class Role(str, Enum):
    PATIENT = "Patient"
    DOCTOR = "Doctor"
    NURSE = "Nurse"
    RESEARCHER = "Researcher"
    INSURER = "Insurer"


@dataclass
class AbsaAttributeBundle:
    """Everything a participant holds for one attested attribute."""

    attribute: AttributeStatement
    signing_keys: list[absa.GidSigningKey]
    signatures: list[absa.IndividualSignature]
    aggregated: AggregatedSignature
    aggregated_vk: AggregatedVerificationKey


@dataclass
class Participant:
    gid: str
    role: Role
    display_name: str
    organization: str
    attribute_keys: dict[str, maabe.UserAttributeKey] = field(default_factory=dict)
    absa_material: dict[str, AbsaAttributeBundle] = field(default_factory=dict)
    paillier_public: Optional[paillier.PaillierPublicKey] = None
    paillier_private: Optional[paillier.PaillierPrivateKey] = None

    def subject_metadata(self) -> dict[str, str]:
        return {
            "gid": self.gid,
            "role": self.role.value,
            "organization": self.organization,
            "id": self.gid,
        }


@dataclass
class EhrRecord:
    patient_gid: str
    root_cid: Cid
    policy_text: str
    claim_fields: dict[str, paillier.PaillierCiphertext]
    created_at: float


@dataclass(frozen=True)
class AccessGrant:
    decision: Decision
    token_uri: Optional[str]
    event_id: str

    @property
    def allowed(self) -> bool:
        return self.decision.allowed


# Built-in rule set: patients read their own records; doctors read any
# patient in their organization once the three identity attributes verify.
DEFAULT_RULES_TEXT = """
rule PatientSelfAccess {
  description: "A patient can read their own record"
  subject(v): "*.Patient#*"
  operation: READ
  object(t): "*.patient#*.data"
  condition: "v.gid === t.gid"
  action: ALLOW
}

rule Rule1 {
  description: "Only doctor from the
   Mercy Hospital could access EHR"
  subject(v): "Mercy.Doctor#*"
  operation: READ
  object(t): "Mercy.patient#*.data"
  condition: "v.role === Doctor &&
   v.organization === Mercy &&
   t.patient_id.verify() === true &&
   t.driver_license.verify() === true &&
   t.insurance_id.verify() === true"
  action: ALLOW
}

rule ResearcherAccess {
  description: "Researchers read fully authenticated records"
  subject(v): "*.Researcher#*"
  operation: READ
  object(t): "*.patient#*.data"
  condition: "t.patient_id.verify() === true &&
   t.driver_license.verify() === true &&
   t.insurance_id.verify() === true"
  action: ALLOW
}
"""


def insurance_claim_check(
    insurer_sk: paillier.PaillierPrivateKey,
    insurer_pk: paillier.PaillierPublicKey,
    record: EhrRecord,
    field_name: str,
    claimed_ct: paillier.PaillierCiphertext,
) -> bool:
    """Proposition-1 claim settlement: equality on ciphertexts only.

    This operation deliberately has no access to attribute keys; the insurer
    never decrypts the record payload.
    """
    if field_name not in record.claim_fields:
        raise KeyError(f"record has no claim field {field_name!r}")
    return paillier.claim_match(record.claim_fields[field_name], claimed_ct, insurer_sk, insurer_pk)


class EhrSystem:
    """A whole deployment: authorities, participants, store, and ledger."""

    def __init__(
        self,
        peers: Optional[Sequence[PeerProfile]] = None,
        endorsement_k: int = 2,
        ledger_config: Optional[LedgerConfig] = None,
        block_store=None,
        rules_text: str = DEFAULT_RULES_TEXT,
    ):
        self.params: GroupParams = default_params()
        self.gp: maabe.GlobalParams = maabe.abe_global_setup(128)
        self.abe_registry = maabe.AuthorityRegistry()
        # Authorities able to co-attest each attribute, keyed by encoded statement.
        self.absa_authorities: dict[bytes, list[absa.AbsaAuthorityKeypair]] = {}
        self.participants: dict[str, Participant] = {}
        self.records: dict[str, EhrRecord] = {}
        self.rules: list[AclRule] = parse_acl_rules(rules_text)
        self.rules_text = rules_text
        self._gid_counter = 0
        peers = list(peers) if peers else [PeerProfile(f"peer{i}") for i in range(3)]
        policy = EndorsementPolicy(endorsement_k, tuple(p.peer_id for p in peers))
        self.ledger = LedgerSimulator(peers, policy, ledger_config or LedgerConfig())
        self.dag = DagStore(block_store if block_store is not None else MemoryBlockStore())
        self.tokens = TokenRegistry(self.dag)

    # -- authority management -------------------------------------------------

    def add_abe_authority(self, attribute_name: str) -> maabe.AbeAuthorityPublicKey:
        return self.abe_registry.add(self.gp, attribute_name)

    def ensure_abe_authorities(self, attribute_names) -> None:
        for name in attribute_names:
            if name not in self.abe_registry:
                self.abe_registry.add(self.gp, name)

    def add_absa_authority(self, attribute: AttributeStatement) -> absa.AbsaAuthorityKeypair:
        """Add one more co-attesting authority for an attribute."""
        keypair = absa.absa_authority_setup(self.params, attribute)
        self.absa_authorities.setdefault(attribute.encode(), []).append(keypair)
        return keypair

    def _authorities_for(self, attribute: AttributeStatement) -> list[absa.AbsaAuthorityKeypair]:
        pool = self.absa_authorities.get(attribute.encode())
        if not pool:
            pool = [self.add_absa_authority(attribute)]
        return pool

    # -- registration ----------------------------------------------------------

    @staticmethod
    def abe_label(attribute: AttributeStatement) -> str:
        return f"{attribute.name}={attribute.value}" if attribute.value else attribute.name

    def register_participant(
        self,
        role: Role,
        display_name: str,
        organization: str,
        attributes: Sequence[AttributeStatement],
        gid: Optional[str] = None,
    ) -> Participant:
        """Assign a GID, run signature extraction and key issuance, log the event."""
        if gid is None:
            self._gid_counter += 1
            gid = str(self._gid_counter)
        if gid in self.participants:
            raise DuplicateGidError(f"GID {gid} already registered")
        participant = Participant(gid, role, display_name, organization)
        for attribute in attributes:
            bundle = self._issue_absa_bundle(gid, attribute)
            participant.absa_material[attribute.name] = bundle
            label = self.abe_label(attribute)
            if label not in self.abe_registry:
                self.abe_registry.add(self.gp, label)
            participant.attribute_keys[label] = maabe.abe_keygen(
                self.gp, gid, label, self.abe_registry.master_key(label)
            )
        if role is Role.INSURER:
            participant.paillier_public, participant.paillier_private = paillier.paillier_keygen(1024)
        self.participants[gid] = participant
        self.ledger.submit_transaction(
            {
                "type": "registration_event",
                "gid": gid,
                "role": role.value,
                "attributes": sorted(b.attribute.name for b in participant.absa_material.values()),
                "signature_envelopes": [
                    b.aggregated.envelope() for b in participant.absa_material.values()
                ],
            }
        )
        self.ledger.run_until_idle()
        return participant

    def _issue_absa_bundle(self, gid: str, attribute: AttributeStatement) -> AbsaAttributeBundle:
        signing_keys, signatures, user_vks = [], [], []
        for authority in self._authorities_for(attribute):
            key = absa.absa_extract(self.params, gid, attribute, authority)
            signing_keys.append(key)
            signatures.append(absa.absa_sign(key, attribute))
            user_vks.append(key.verification_key(self.params))
        aggregated = absa.aggregate_signatures(signatures, user_vks)
        aggregated_vk = absa.aggregate_verification_keys(user_vks)
        return AbsaAttributeBundle(attribute, signing_keys, signatures, aggregated, aggregated_vk)

    def _get_participant(self, gid: str) -> Participant:
        try:
            return self.participants[gid]
        except KeyError:
            raise UnknownParticipantError(f"unknown participant {gid!r}") from None

    # -- upload ----------------------------------------------------------------

    def upload_ehr(
        self,
        patient_gid: str,
        plaintext: bytes,
        policy_text: str,
        claim_values: Optional[Mapping[str, int]] = None,
        insurer_pk: Optional[paillier.PaillierPublicKey] = None,
    ) -> EhrRecord:
        """Encrypt, store off-chain, commit the record metadata on-chain."""
        patient = self._get_participant(patient_gid)
        ast = parse_policy(policy_text)
        expanded = expand_ranges(ast)
        self.ensure_abe_authorities(policy_attributes(ast))
        envelope = maabe.hybrid_encrypt(
            self.gp, expanded, self.abe_registry.public_keys(), plaintext, policy_text
        )
        root_cid = self.dag.put_blob(canonical_json(envelope.envelope()))
        claim_fields: dict[str, paillier.PaillierCiphertext] = {}
        if claim_values:
            if insurer_pk is None:
                raise WorkflowError("claim values require an insurer public key")
            for name, value in claim_values.items():
                claim_fields[name] = paillier.paillier_encrypt(insurer_pk, int(value))
        record = EhrRecord(patient.gid, root_cid, policy_text, claim_fields, self.ledger.now)
        self.records[patient.gid] = record
        self.ledger.submit_transaction(
            {
                "type": "ehr_upload",
                "patient_gid": patient.gid,
                "root_cid": root_cid.text(),
                "policy": policy_text,
                "claim_fields": sorted(claim_fields),
            }
        )
        self.ledger.run_until_idle()
        return record

    # -- access ----------------------------------------------------------------

    def verified_attributes(self, patient: Participant) -> set[str]:
        """Re-verify every stored aggregated signature; names that pass."""
        verified = set()
        for name, bundle in patient.absa_material.items():
            if absa.absa_verify(
                bundle.attribute.hashed(), bundle.aggregated, bundle.aggregated_vk, self.params
            ):
                verified.add(name)
        return verified

    def request_access(
        self,
        requestor_gid: str,
        patient_gid: str,
        operation: Operation = Operation.READ,
        threshold: Optional[ThresholdSpec] = None,
        rules: Optional[Sequence[AclRule]] = None,
    ) -> AccessGrant:
        """Threshold authentication, then ACL; an ALLOW mints a one-time token.

        Both outcomes commit exactly one access event to the ledger, and no
        token id leaks on a deny.
        """
        requestor = self._get_participant(requestor_gid)
        patient = self._get_participant(patient_gid)
        record = self.records.get(patient_gid)
        if record is None:
            raise WorkflowError(f"patient {patient_gid} has no uploaded record")

        verified = self.verified_attributes(patient)
        decision: Decision
        if threshold is not None and not absa.threshold_check(
            verified & set(patient.absa_material), threshold
        ):
            decision = Decision(
                RuleAction.DENY,
                "threshold-check",
                f"only {len(verified)} of {threshold.n} attributes verified; need {threshold.t}",
            )
        else:
            request = AccessRequest(
                subject=requestor.subject_metadata(),
                verified_attributes=frozenset(verified),
                operation=operation,
                object={"organization": patient.organization, "gid": patient.gid},
            )
            decision = evaluate_acl(rules if rules is not None else self.rules, request, lambda a: a in verified)

        event_id = uuid.uuid4().hex
        token_uri = None
        token_id = None
        if decision.allowed:
            token = self.tokens.issue(record.root_cid)
            token_id = token.token_id
            token_uri = f"{TOKEN_URI_SCHEME}://{token.token_id}"
        event = AccessEvent(
            event_id=event_id,
            timestamp=self.ledger.now,
            requestor=requestor.gid,
            patient_gid=patient.gid,
            operation=operation.value,
            decision=decision.action.value,
            rule_id=decision.rule_id,
            one_time_token_id=token_id,
        )
        self.ledger.append_access_event(event)
        self.ledger.run_until_idle()
        return AccessGrant(decision, token_uri, event_id)

    def retrieve_and_decrypt(self, requestor_gid: str, token: str) -> bytes:
        """Burn the token and attempt decryption with the requestor's keys.

        The token is consumed even when the policy rejects the requestor's
        keys afterwards, matching one-time URL semantics.
        """
        requestor = self._get_participant(requestor_gid)
        token_id = token.split("://", 1)[1] if "://" in token else token
        blob = self.tokens.redeem(token_id)
        self.ledger.submit_transaction(
            {"type": "retrieval_event", "token_id": token_id, "requestor": requestor.gid}
        )
        self.ledger.run_until_idle()
        envelope = maabe.HybridCiphertext.from_envelope(json.loads(blob))
        return maabe.hybrid_decrypt(self.gp, envelope, requestor.attribute_keys, requestor.gid)

    # -- claims ---------------------------------------------------------------

    def claim_check(
        self, insurer_gid: str, patient_gid: str, field_name: str, claimed_ct: paillier.PaillierCiphertext
    ) -> bool:
        insurer = self._get_participant(insurer_gid)
        if insurer.paillier_private is None or insurer.paillier_public is None:
            raise WorkflowError(f"participant {insurer_gid} holds no claim-checking keys")
        record = self.records.get(patient_gid)
        if record is None:
            raise WorkflowError(f"patient {patient_gid} has no uploaded record")
        return insurance_claim_check(
            insurer.paillier_private, insurer.paillier_public, record, field_name, claimed_ct
        )

    # -- queries ---------------------------------------------------------------

    def events(self, **filters) -> list[AccessEvent]:
        return self.ledger.query_events(**filters)
