"""Decentralized multi-authority ciphertext-policy ABE with a hybrid envelope.

Each attribute is managed by its own authority; users are bound to a global
identifier (GID) and collect one key per attribute.  Encryption is a key
encapsulation: the policy is compiled to a share-generating matrix, the
encapsulated GT element kappa is recoverable exactly by attribute sets whose
rows span the sharing target, and GID-binding of keys blocks collusion
between different users.

Bulk payloads ride in an authenticated symmetric envelope keyed by a labeled
hash of kappa; a key commitment makes wrong-key decryptions fail loudly
instead of yielding garbage.
"""

from __future__ import annotations

import hashlib
import secrets
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .encoding import b64d, b64e
from .pairing import (
    CURVE_ORDER,
    G1Point,
    G2Point,
    GroupParams,
    GtElement,
    default_params,
    gt_generator_pow,
    hash_to_g1,
    multi_pairing,
    random_scalar,
)
from .policy import LsssMatrix, PolicyAst, satisfying_rows, to_lsss

__all__ = [
    "MaabeError",
    "PolicyNotSatisfiedError",
    "CollusionError",
    "MissingAuthorityError",
    "AuthenticationError",
    "RegistryError",
    "GlobalParams",
    "AbeAuthorityPublicKey",
    "AbeAuthorityMasterKey",
    "AuthorityRegistry",
    "UserAttributeKey",
    "AbeCiphertext",
    "HybridCiphertext",
    "abe_global_setup",
    "abe_authority_setup",
    "abe_keygen",
    "abe_encrypt",
    "abe_decrypt",
    "hybrid_encrypt",
    "hybrid_decrypt",
]

_GID_DST = b"MAABE-GID-v1"
_KDF_TAG = b"MAABE-KDF-v1"
_COMMIT_TAG = b"MAABE-COMMIT-v1"


class MaabeError(Exception):
    """Base error for the encryption layer."""


class PolicyNotSatisfiedError(MaabeError):
    """The presented attribute keys do not satisfy the ciphertext policy."""


class CollusionError(MaabeError):
    """Attribute keys from different GIDs were combined."""


class MissingAuthorityError(MaabeError):
    """The policy references an attribute with no registered authority."""


class AuthenticationError(MaabeError):
    """Payload failed authenticated decryption."""


class RegistryError(MaabeError):
    """Duplicate attribute registration."""


@dataclass(frozen=True)
class GlobalParams:
    """Global public parameters: the bilinear group plus the GID hash domain."""

    group: GroupParams
    security_parameter: int = 128
    gid_dst: bytes = _GID_DST

    def gid_hash(self, gid: str) -> G1Point:
        return hash_to_g1(gid.encode("utf-8"), self.gid_dst)


@dataclass(frozen=True)
class AbeAuthorityPublicKey:
    attribute_name: str
    e_alpha: GtElement  # e(g1, g2)^alpha
    g_y: G2Point  # g2^y


@dataclass(frozen=True)
class AbeAuthorityMasterKey:
    """Never serialized into ciphertexts or any public artifact."""

    attribute_name: str
    alpha: int
    y: int


@dataclass(frozen=True)
class UserAttributeKey:
    gid: str
    attribute_name: str
    k: G1Point  # g1^alpha * H(gid)^y


def abe_global_setup(security_parameter: int = 128) -> GlobalParams:
    """Public setup; deterministic, so repeated calls agree on all constants."""
    if security_parameter != 128:
        raise ValueError("supported security parameter: 128")
    return GlobalParams(default_params(), security_parameter)


def abe_authority_setup(
    gp: GlobalParams, attribute_name: str
) -> tuple[AbeAuthorityPublicKey, AbeAuthorityMasterKey]:
    """Fresh authority for one attribute: PK = (e(g,g)^alpha, g2^y)."""
    if not attribute_name:
        raise ValueError("attribute name must be non-empty")
    alpha = random_scalar()
    y = random_scalar()
    pk = AbeAuthorityPublicKey(
        attribute_name,
        gt_generator_pow(alpha),
        gp.group.generator_g2.mul(y),
    )
    return pk, AbeAuthorityMasterKey(attribute_name, alpha, y)


class AuthorityRegistry:
    """Single-writer registry mapping attribute names to their authorities."""

    def __init__(self):
        self._public: dict[str, AbeAuthorityPublicKey] = {}
        self._master: dict[str, AbeAuthorityMasterKey] = {}

    def add(self, gp: GlobalParams, attribute_name: str) -> AbeAuthorityPublicKey:
        if attribute_name in self._public:
            raise RegistryError(f"attribute {attribute_name!r} already registered")
        pk, msk = abe_authority_setup(gp, attribute_name)
        self._public[attribute_name] = pk
        self._master[attribute_name] = msk
        return pk

    def install(self, pk: AbeAuthorityPublicKey, msk: AbeAuthorityMasterKey) -> None:
        if pk.attribute_name in self._public:
            raise RegistryError(f"attribute {pk.attribute_name!r} already registered")
        self._public[pk.attribute_name] = pk
        self._master[pk.attribute_name] = msk

    def public_keys(self) -> dict[str, AbeAuthorityPublicKey]:
        return dict(self._public)

    def master_key(self, attribute_name: str) -> AbeAuthorityMasterKey:
        return self._master[attribute_name]

    def __contains__(self, attribute_name: str) -> bool:
        return attribute_name in self._public

    def attributes(self) -> list[str]:
        return sorted(self._public)


def abe_keygen(
    gp: GlobalParams, gid: str, attribute_name: str, msk: AbeAuthorityMasterKey
) -> UserAttributeKey:
    """K = g1^alpha * H(gid)^y; deterministic per (gid, attribute, msk)."""
    if msk.attribute_name != attribute_name:
        raise ValueError(
            f"master key is for {msk.attribute_name!r}, not {attribute_name!r}"
        )
    k = gp.group.generator_g1.mul(msk.alpha).add(gp.gid_hash(gid).mul(msk.y))
    return UserAttributeKey(gid, attribute_name, k)


@dataclass(frozen=True)
class AbeCiphertextRow:
    label: str
    c1: GtElement
    c2: G2Point
    c3: G2Point


@dataclass(frozen=True)
class AbeCiphertext:
    policy_source: str
    lsss: LsssMatrix
    c0: GtElement
    rows: tuple[AbeCiphertextRow, ...]

    def envelope(self) -> dict:
        return {
            "version": 1,
            "scheme": "maabe-ct-v1",
            "policy": self.policy_source,
            "matrix": [list(r) for r in self.lsss.matrix],
            "labels": list(self.lsss.row_labels),
            "c0": b64e(self.c0.serialize()),
            "rows": [
                {
                    "label": row.label,
                    "c1": b64e(row.c1.serialize()),
                    "c2": b64e(row.c2.serialize()),
                    "c3": b64e(row.c3.serialize()),
                }
                for row in self.rows
            ],
        }

    @classmethod
    def from_envelope(cls, env: Mapping) -> "AbeCiphertext":
        if env.get("version") != 1 or env.get("scheme") != "maabe-ct-v1":
            raise ValueError("unsupported ciphertext envelope")
        lsss = LsssMatrix(
            tuple(tuple(int(x) for x in row) for row in env["matrix"]),
            tuple(env["labels"]),
        )
        rows = tuple(
            AbeCiphertextRow(
                r["label"],
                GtElement.deserialize(b64d(r["c1"])),
                G2Point.deserialize(b64d(r["c2"])),
                G2Point.deserialize(b64d(r["c3"])),
            )
            for r in env["rows"]
        )
        return cls(env["policy"], lsss, GtElement.deserialize(b64d(env["c0"])), rows)


def _share_vectors(lsss: LsssMatrix, secret: int) -> list[int]:
    """Row shares of a random vector whose first entry is `secret`."""
    q = int(CURVE_ORDER)
    vec = [secret % q] + [random_scalar() for _ in range(lsss.cols - 1)]
    return [sum(a * b for a, b in zip(row, vec)) % q for row in lsss.matrix]


def abe_encrypt(
    gp: GlobalParams,
    policy: PolicyAst,
    pks: Mapping[str, AbeAuthorityPublicKey],
    policy_source: str | None = None,
) -> tuple[AbeCiphertext, GtElement]:
    """Encapsulate a fresh kappa under a monotone, range-free policy.

    The encryption secret s is shared across the LSSS rows, a second sharing
    of zero blinds each row, and row x is decryptable with the key for its
    labeled attribute.  Returns the ciphertext and kappa.
    """
    q = int(CURVE_ORDER)
    lsss = to_lsss(policy)
    for label in set(lsss.row_labels):
        if label not in pks:
            raise MissingAuthorityError(f"no authority public key for attribute {label!r}")
    s = random_scalar()
    lambdas = _share_vectors(lsss, s)
    omegas = _share_vectors(lsss, 0)
    kappa = gt_generator_pow(random_scalar())
    c0 = kappa.mul(gt_generator_pow(s))
    rows = []
    g2 = gp.group.generator_g2
    for x, label in enumerate(lsss.row_labels):
        pk = pks[label]
        r_x = random_scalar()
        c1 = gt_generator_pow(lambdas[x]).mul(pk.e_alpha.exp(r_x))
        c2 = g2.mul(r_x)
        c3 = pk.g_y.mul(r_x).add(g2.mul(omegas[x]))
        rows.append(AbeCiphertextRow(label, c1, c2, c3))
    source = policy_source if policy_source is not None else _policy_text(policy)
    return AbeCiphertext(source, lsss, c0, tuple(rows)), kappa


def _policy_text(policy: PolicyAst) -> str:
    from .policy import policy_to_text

    return policy_to_text(policy)


def _embed_coefficient(c) -> int:
    """Centered representative in (-q/2, q/2]; small for formula-derived LSSS."""
    q = int(CURVE_ORDER)
    if isinstance(c, Fraction):
        value = int(c.numerator) * pow(int(c.denominator), -1, q) % q
    else:
        value = int(c) % q
    return value - q if value > q // 2 else value


def abe_decrypt(
    gp: GlobalParams,
    ct: AbeCiphertext,
    keys: Mapping[str, UserAttributeKey],
    gid: str,
) -> GtElement:
    """Recover kappa when the key set satisfies the policy.

    Raises PolicyNotSatisfiedError otherwise and CollusionError when keys
    from different GIDs are mixed.
    """
    for key in keys.values():
        if key.gid != gid:
            raise CollusionError(
                f"key for attribute {key.attribute_name!r} belongs to GID {key.gid!r}"
            )
    match = satisfying_rows(ct.lsss, set(keys))
    if match is None:
        raise PolicyNotSatisfiedError(
            f"attribute set {sorted(keys)} does not satisfy policy {ct.policy_source!r}"
        )
    row_indices, coeffs = match
    h_gid = gp.gid_hash(gid)
    gt_part = GtElement.identity()
    pairs = []
    for idx, coeff in zip(row_indices, coeffs):
        c = _embed_coefficient(coeff)
        row = ct.rows[idx]
        gt_part = gt_part.mul(row.c1.exp(c))
        # e(P, Q)^c realized as e(|c|P, Q) with the sign folded into P.
        scaled_h = h_gid.mul(abs(c))
        scaled_k = keys[row.label].k.mul(abs(c))
        if c < 0:
            scaled_h, scaled_k = scaled_h.neg(), scaled_k.neg()
        pairs.append((scaled_h, row.c3))
        pairs.append((scaled_k.neg(), row.c2))
    blinder = gt_part.mul(multi_pairing(pairs))  # = e(g1, g2)^s
    return ct.c0.mul(blinder.inv())


@dataclass(frozen=True)
class HybridCiphertext:
    """ABE key encapsulation plus an AEAD-sealed bulk payload."""

    kem: AbeCiphertext
    nonce: bytes
    payload: bytes
    key_commitment: bytes

    def envelope(self) -> dict:
        return {
            "version": 1,
            "scheme": "maabe-hybrid-v1",
            "kem": self.kem.envelope(),
            "nonce": b64e(self.nonce),
            "payload": b64e(self.payload),
            "key_commitment": b64e(self.key_commitment),
        }

    @classmethod
    def from_envelope(cls, env: Mapping) -> "HybridCiphertext":
        if env.get("version") != 1 or env.get("scheme") != "maabe-hybrid-v1":
            raise ValueError("unsupported hybrid envelope")
        return cls(
            AbeCiphertext.from_envelope(env["kem"]),
            b64d(env["nonce"]),
            b64d(env["payload"]),
            b64d(env["key_commitment"]),
        )


def _derive_data_key(kappa: GtElement) -> bytes:
    return hashlib.sha256(_KDF_TAG + kappa.serialize()).digest()


def _commit_key(data_key: bytes) -> bytes:
    return hashlib.sha256(_COMMIT_TAG + data_key).digest()


def hybrid_encrypt(
    gp: GlobalParams,
    policy: PolicyAst,
    pks: Mapping[str, AbeAuthorityPublicKey],
    plaintext: bytes,
    policy_source: str | None = None,
) -> HybridCiphertext:
    """Seal plaintext of any length under the policy."""
    kem, kappa = abe_encrypt(gp, policy, pks, policy_source)
    data_key = _derive_data_key(kappa)
    commitment = _commit_key(data_key)
    nonce = secrets.token_bytes(12)
    payload = AESGCM(data_key).encrypt(nonce, plaintext, commitment)
    return HybridCiphertext(kem, nonce, payload, commitment)


def hybrid_decrypt(
    gp: GlobalParams,
    hc: HybridCiphertext,
    keys: Mapping[str, UserAttributeKey],
    gid: str,
) -> bytes:
    """Exact plaintext back, or a loud error.

    Policy failures surface as PolicyNotSatisfiedError (including wrong-key
    reconstructions caught by the key commitment); payload tampering surfaces
    as AuthenticationError, never silent corruption.
    """
    kappa = abe_decrypt(gp, hc.kem, keys, gid)
    data_key = _derive_data_key(kappa)
    if _commit_key(data_key) != hc.key_commitment:
        raise PolicyNotSatisfiedError("recovered key fails the ciphertext commitment")
    try:
        return AESGCM(data_key).decrypt(hc.nonce, hc.payload, hc.key_commitment)
    except InvalidTag as exc:
        raise AuthenticationError("payload failed authentication") from exc
