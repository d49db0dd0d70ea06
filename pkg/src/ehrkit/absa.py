"""Attribute-based signature aggregation with t-of-n threshold authentication.

Per-attribute BLS-style signatures are folded into a single short signature
using coefficients drawn from a hash of the ordered contributor key list; the
matching verification keys fold the same way, so one pairing equation checks
the whole bundle.  A holder authenticates by presenting one aggregated
signature per attribute, and the verifier counts independently verified
attributes against a (t, n) threshold.

Also provides the accountable subgroup multi-signature: group members receive
membership keys (multi-signatures on the aggregated key and their index) and
any dynamically chosen subgroup S can co-sign a message such that the verifier
learns exactly which indices participated.

Secret scalars must be treated as sensitive and discarded after use; this
module keeps them only inside the returned key objects.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .encoding import b64d, b64e, length_prefixed
from .pairing import (
    G1Point,
    G2Point,
    GroupParams,
    hash_to_g1,
    hash_to_scalar,
    hash_to_scalars,
    multi_pairing,
    random_scalar,
)

__all__ = [
    "AttributeStatement",
    "AbsaAuthorityKeypair",
    "GidSigningKey",
    "IndividualSignature",
    "AggregatedSignature",
    "AggregatedVerificationKey",
    "ThresholdSpec",
    "MembershipKey",
    "AccountableSignature",
    "NamespaceError",
    "BindingError",
    "absa_authority_setup",
    "absa_extract",
    "absa_sign",
    "aggregate_signatures",
    "aggregate_verification_keys",
    "absa_verify",
    "threshold_check",
    "issue_membership_keys",
    "accountable_sign_share",
    "accountable_combine",
    "accountable_sign",
    "accountable_verify",
]

_EXTRACT_DST = b"ABSA-EXTRACT-v1"
_ACC_INDEX_TAG = b"/member-index/"


class NamespaceError(ValueError):
    """Attribute presented to an authority outside its namespace."""


class BindingError(ValueError):
    """Key and attribute do not belong together."""


@dataclass(frozen=True)
class AttributeStatement:
    """One attested attribute, e.g. driver_license=9907184 issued by the DMV."""

    authority_id: str
    name: str
    value: str = ""

    def __post_init__(self):
        if not self.name:
            raise ValueError("attribute name must be non-empty")

    def encode(self) -> bytes:
        return length_prefixed(
            self.authority_id.encode(), self.name.encode(), self.value.encode()
        )

    def hashed(self) -> G1Point:
        """H(A): the hashed attribute value that gets signed."""
        return hash_to_g1(self.encode())


@dataclass(frozen=True)
class AbsaAuthorityKeypair:
    attribute: AttributeStatement
    signing_key: int  # SIK
    verification_key: G2Point  # VK = g2^SIK


@dataclass(frozen=True)
class GidSigningKey:
    gid: str
    attribute: AttributeStatement
    key: int  # SK_{i,GID}

    def verification_key(self, params: GroupParams) -> G2Point:
        """Per-user verification key g2^SK published by the issuing authority."""
        return params.generator_g2.mul(self.key)


@dataclass(frozen=True)
class IndividualSignature:
    attribute_ref: AttributeStatement
    sigma: G1Point


@dataclass(frozen=True)
class AggregatedSignature:
    sigma_a: G1Point
    contributor_keys: tuple[G2Point, ...]

    def envelope(self) -> dict:
        return {
            "version": 1,
            "scheme": "absa-aggregate-v1",
            "sigma": b64e(self.sigma_a.serialize()),
            "contributor_keys": [b64e(k.serialize()) for k in self.contributor_keys],
        }

    @classmethod
    def from_envelope(cls, env: Mapping) -> "AggregatedSignature":
        if env.get("version") != 1 or env.get("scheme") != "absa-aggregate-v1":
            raise ValueError("unsupported aggregated-signature envelope")
        return cls(
            G1Point.deserialize(b64d(env["sigma"])),
            tuple(G2Point.deserialize(b64d(k)) for k in env["contributor_keys"]),
        )


@dataclass(frozen=True)
class AggregatedVerificationKey:
    vk_agg: G2Point

    def envelope(self) -> dict:
        return {
            "version": 1,
            "scheme": "absa-vk-aggregate-v1",
            "vk": b64e(self.vk_agg.serialize()),
        }

    @classmethod
    def from_envelope(cls, env: Mapping) -> "AggregatedVerificationKey":
        if env.get("version") != 1 or env.get("scheme") != "absa-vk-aggregate-v1":
            raise ValueError("unsupported aggregated-key envelope")
        return cls(G2Point.deserialize(b64d(env["vk"])))


@dataclass(frozen=True)
class ThresholdSpec:
    t: int
    n: int

    def __post_init__(self):
        if not (1 <= self.t <= self.n):
            raise ValueError(f"invalid threshold spec ({self.t}, {self.n})")


@dataclass(frozen=True)
class MembershipKey:
    holder_index: int
    mk: G1Point


@dataclass(frozen=True)
class AccountableSignature:
    pk: G2Point
    s: G1Point


def absa_authority_setup(params: GroupParams, attribute: AttributeStatement) -> AbsaAuthorityKeypair:
    """Authority key pair for one attribute: SIK uniform, VK = g2^SIK."""
    sik = random_scalar()
    return AbsaAuthorityKeypair(attribute, sik, params.generator_g2.mul(sik))


def absa_extract(
    params: GroupParams,
    gid: str,
    attribute: AttributeStatement,
    authority: AbsaAuthorityKeypair,
) -> GidSigningKey:
    """Issue the signing key for (gid, attribute), deterministically.

    The key is derived from the authority secret by keyed derivation, so
    re-registration returns the same key instead of silently rotating it.
    """
    if attribute.authority_id != authority.attribute.authority_id:
        raise NamespaceError(
            f"attribute authority {attribute.authority_id!r} does not match "
            f"{authority.attribute.authority_id!r}"
        )
    material = length_prefixed(
        int(authority.signing_key).to_bytes(32, "big"),
        gid.encode(),
        attribute.encode(),
    )
    return GidSigningKey(gid, attribute, hash_to_scalar(material, _EXTRACT_DST))


def absa_sign(key: GidSigningKey, attribute: AttributeStatement) -> IndividualSignature:
    """sigma = H(A)^SK. Deterministic: signing twice yields identical output."""
    if key.attribute != attribute:
        raise BindingError("signing key is bound to a different attribute")
    return IndividualSignature(attribute, attribute.hashed().mul(key.key))


def _coefficients(keys: Sequence[G2Point]) -> list[int]:
    return hash_to_scalars(keys)


def aggregate_signatures(
    sigs: Sequence[IndividualSignature], keys: Sequence[G2Point]
) -> AggregatedSignature:
    """sigma_A = prod sigma_i^{t_i} with coefficients hashed from the key list."""
    if not sigs or len(sigs) != len(keys):
        raise ValueError("signature and key lists must be non-empty and equal length")
    coeffs = _coefficients(keys)
    acc = G1Point.identity()
    for sig, t in zip(sigs, coeffs):
        acc = acc.add(sig.sigma.mul(t))
    return AggregatedSignature(acc, tuple(keys))


def aggregate_verification_keys(keys: Sequence[G2Point]) -> AggregatedVerificationKey:
    """VK_agg = prod VK_i^{t_i}, with the same coefficients as the signatures."""
    if not keys:
        raise ValueError("key list must be non-empty")
    coeffs = _coefficients(keys)
    acc = G2Point.identity()
    for key, t in zip(keys, coeffs):
        acc = acc.add(key.mul(t))
    return AggregatedVerificationKey(acc)


def absa_verify(
    attribute_hash: G1Point,
    sigma_a: AggregatedSignature,
    vk_agg: AggregatedVerificationKey,
    params: GroupParams,
) -> bool:
    """Check e(sigma_A, g2) == e(H(A), VK_agg); never raises on mismatch."""
    return multi_pairing(
        [
            (sigma_a.sigma_a.neg(), params.generator_g2),
            (attribute_hash, vk_agg.vk_agg),
        ]
    ).is_identity()


def threshold_check(verified: Iterable[str], spec: ThresholdSpec) -> bool:
    """True iff at least t of the n expected attributes verified."""
    count = len(set(verified))
    if count > spec.n:
        raise ValueError(f"{count} verified attributes exceed the declared n={spec.n}")
    return count >= spec.t


# ---------------------------------------------------------------------------
# Accountable subgroup multi-signature.
# ---------------------------------------------------------------------------


def _acc_message_hash(vk_agg: G2Point, message: bytes) -> G1Point:
    return hash_to_g1(vk_agg.serialize() + message)


def _acc_index_hash(vk_agg: G2Point, index: int) -> G1Point:
    return hash_to_g1(vk_agg.serialize() + _ACC_INDEX_TAG + str(index).encode())


def issue_membership_keys(
    params: GroupParams, signing_keys: Sequence[int], all_keys: Sequence[G2Point]
) -> list[MembershipKey]:
    """Membership keys mk_i: the group multi-signature on (VK_agg, i).

    Every member j contributes the share H1(VK_agg, i)^{a_j * sk_j}; the
    product over all members is the key handed to holder i.
    """
    if len(signing_keys) != len(all_keys):
        raise ValueError("signing keys and public keys must align")
    coeffs = _coefficients(all_keys)
    vk_agg = aggregate_verification_keys(all_keys).vk_agg
    issued = []
    for i in range(len(all_keys)):
        base = _acc_index_hash(vk_agg, i)
        mk = G1Point.identity()
        for a_j, sk_j in zip(coeffs, signing_keys):
            mk = mk.add(base.mul(a_j * sk_j))
        issued.append(MembershipKey(i, mk))
    return issued


def accountable_sign_share(
    params: GroupParams,
    mk: MembershipKey,
    sk: int,
    message: bytes,
    all_keys: Sequence[G2Point],
) -> tuple[G2Point, G1Point]:
    """One signer's share: (pk_i, s_i) with s_i = H0(VK_agg || m)^{sk_i} * mk_i."""
    if not (0 <= mk.holder_index < len(all_keys)):
        raise ValueError("membership key index outside the group key list")
    vk_agg = aggregate_verification_keys(all_keys).vk_agg
    s_i = _acc_message_hash(vk_agg, message).mul(sk).add(mk.mk)
    return all_keys[mk.holder_index], s_i


def accountable_combine(shares: Sequence[tuple[G2Point, G1Point]]) -> AccountableSignature:
    """Fold subgroup shares into the multi-signature (pk, s)."""
    if not shares:
        raise ValueError("no shares to combine")
    pk = G2Point.identity()
    s = G1Point.identity()
    for pk_i, s_i in shares:
        pk = pk.add(pk_i)
        s = s.add(s_i)
    return AccountableSignature(pk, s)


def accountable_sign(
    params: GroupParams,
    subgroup: Iterable[int],
    membership_keys: Mapping[int, MembershipKey],
    signing_keys: Mapping[int, int],
    message: bytes,
    all_keys: Sequence[G2Point],
) -> AccountableSignature:
    """Sign with every member of the (dynamically chosen) subgroup S."""
    shares = []
    for i in sorted(set(subgroup)):
        if not (0 <= i < len(all_keys)):
            raise ValueError(f"signer index {i} outside the group key list")
        shares.append(
            accountable_sign_share(params, membership_keys[i], signing_keys[i], message, all_keys)
        )
    return accountable_combine(shares)


def accountable_verify(
    params: GroupParams,
    vk_agg: G2Point,
    message: bytes,
    subgroup: Iterable[int],
    sigma: AccountableSignature,
) -> bool:
    """Pairing identity: e(H0(VK,m), pk) * e(prod_j H1(VK,j), VK) == e(s, g2)."""
    indices = sorted(set(subgroup))
    if not indices:
        raise ValueError("subgroup must be non-empty")
    h_m = _acc_message_hash(vk_agg, message)
    h_idx = G1Point.identity()
    for j in indices:
        h_idx = h_idx.add(_acc_index_hash(vk_agg, j))
    return multi_pairing(
        [
            (h_m, sigma.pk),
            (h_idx, vk_agg),
            (sigma.s.neg(), params.generator_g2),
        ]
    ).is_identity()
