"""Paillier cryptosystem with additive homomorphism and encrypted claim matching.

Uses the small-generator variant g = n + 1, which gives the closed-form
encryption c = (1 + m*n) * r^n mod n^2 and makes key generation cheap.  The
claim-matching predicate decrypts the ciphertext quotient and compares with
zero, so an insurer can test equality of an encrypted claim against a stored
encrypted amount without ever seeing the plaintext.

Key sizes below 1024 bits exist for benchmark parity only and are
cryptographically toy.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass
from math import gcd, lcm
from typing import Mapping

from gmpy2 import invert, is_prime, mpz, powmod

from .encoding import b64d, b64e

__all__ = [
    "PaillierError",
    "CiphertextError",
    "PaillierPublicKey",
    "PaillierPrivateKey",
    "PaillierCiphertext",
    "SUPPORTED_KEY_BITS",
    "paillier_keygen",
    "paillier_encrypt",
    "paillier_decrypt",
    "homomorphic_add",
    "scalar_multiply",
    "claim_match",
]

SUPPORTED_KEY_BITS = (128, 256, 512, 1024, 2048)


class PaillierError(Exception):
    pass


class CiphertextError(PaillierError):
    """Ciphertext outside Z*_{n^2}."""


@dataclass(frozen=True)
class PaillierPublicKey:
    n: int
    n_squared: int
    g: int

    def envelope(self) -> dict:
        nbytes = (int(self.n).bit_length() + 7) // 8
        return {
            "version": 1,
            "scheme": "paillier-pk-v1",
            "n": b64e(int(self.n).to_bytes(nbytes, "big")),
        }

    @classmethod
    def from_envelope(cls, env: Mapping) -> "PaillierPublicKey":
        if env.get("version") != 1 or env.get("scheme") != "paillier-pk-v1":
            raise ValueError("unsupported Paillier public key envelope")
        n = int.from_bytes(b64d(env["n"]), "big")
        return cls(n, n * n, n + 1)


@dataclass(frozen=True)
class PaillierPrivateKey:
    lam: int  # lcm(p - 1, q - 1)
    mu: int  # lam^{-1} mod n

    def envelope(self, pk: PaillierPublicKey) -> dict:
        nbytes = (int(pk.n).bit_length() + 7) // 8
        return {
            "version": 1,
            "scheme": "paillier-sk-v1",
            "lambda": b64e(int(self.lam).to_bytes(nbytes, "big")),
            "mu": b64e(int(self.mu).to_bytes(nbytes, "big")),
        }

    @classmethod
    def from_envelope(cls, env: Mapping) -> "PaillierPrivateKey":
        if env.get("version") != 1 or env.get("scheme") != "paillier-sk-v1":
            raise ValueError("unsupported Paillier private key envelope")
        return cls(
            int.from_bytes(b64d(env["lambda"]), "big"),
            int.from_bytes(b64d(env["mu"]), "big"),
        )


@dataclass(frozen=True)
class PaillierCiphertext:
    c: int
    public_key: PaillierPublicKey

    def envelope(self) -> dict:
        nbytes = 2 * ((int(self.public_key.n).bit_length() + 7) // 8)
        return {
            "version": 1,
            "scheme": "paillier-ct-v1",
            "c": b64e(int(self.c).to_bytes(nbytes, "big")),
            "n": b64e(int(self.public_key.n).to_bytes(nbytes // 2, "big")),
        }

    @classmethod
    def from_envelope(cls, env: Mapping) -> "PaillierCiphertext":
        if env.get("version") != 1 or env.get("scheme") != "paillier-ct-v1":
            raise ValueError("unsupported Paillier ciphertext envelope")
        n = int.from_bytes(b64d(env["n"]), "big")
        return cls(int.from_bytes(b64d(env["c"]), "big"), PaillierPublicKey(n, n * n, n + 1))


def _random_prime(bits: int) -> mpz:
    # Top two bits set so p*q always reaches the full modulus size.
    while True:
        candidate = mpz(secrets.randbits(bits) | (1 << (bits - 1)) | (1 << (bits - 2)) | 1)
        if is_prime(candidate, 40):
            return candidate


def paillier_keygen(bits: int) -> tuple[PaillierPublicKey, PaillierPrivateKey]:
    """Generate an n of the requested size with p, q of bits/2 each."""
    if bits not in SUPPORTED_KEY_BITS:
        raise ValueError(f"unsupported key size {bits}; choose from {SUPPORTED_KEY_BITS}")
    half = bits // 2
    while True:
        p = _random_prime(half)
        q = _random_prime(half)
        if p == q:
            continue
        n = p * q
        lam = lcm(int(p) - 1, int(q) - 1)
        if gcd(lam, int(n)) != 1:
            continue
        mu = int(invert(lam, n))
        return PaillierPublicKey(int(n), int(n * n), int(n) + 1), PaillierPrivateKey(lam, mu)


def paillier_encrypt(pk: PaillierPublicKey, m: int, r: int | None = None) -> PaillierCiphertext:
    """Probabilistic encryption: c = (1 + m*n) * r^n mod n^2."""
    if not 0 <= m < pk.n:
        raise ValueError(f"message must lie in [0, n); got {m}")
    if r is None:
        while True:
            r = secrets.randbelow(pk.n - 1) + 1
            if gcd(r, pk.n) == 1:
                break
    elif not (0 < r < pk.n and gcd(r, pk.n) == 1):
        raise ValueError("blinding factor must be a unit modulo n")
    c = (1 + mpz(m) * pk.n) * powmod(r, pk.n, pk.n_squared) % pk.n_squared
    return PaillierCiphertext(int(c), pk)


def paillier_decrypt(sk: PaillierPrivateKey, pk: PaillierPublicKey, ct: PaillierCiphertext) -> int:
    """m = L(c^lambda mod n^2) * mu mod n, with L(x) = (x - 1) / n."""
    if gcd(int(ct.c), pk.n_squared) != 1:
        raise CiphertextError("ciphertext is not a unit modulo n^2")
    x = powmod(ct.c, sk.lam, pk.n_squared)
    return int((x - 1) // pk.n * sk.mu % pk.n)


def homomorphic_add(a: PaillierCiphertext, b: PaillierCiphertext) -> PaillierCiphertext:
    """Dec(result) = (m_a + m_b) mod n, realized as c_a * c_b mod n^2."""
    if a.public_key != b.public_key:
        raise ValueError("ciphertexts under different public keys")
    return PaillierCiphertext(int(mpz(a.c) * b.c % a.public_key.n_squared), a.public_key)


def scalar_multiply(a: PaillierCiphertext, k: int) -> PaillierCiphertext:
    """Dec(result) = (k * m_a) mod n, realized as c_a^k mod n^2."""
    if k < 0:
        raise ValueError("scalar must be non-negative")
    return PaillierCiphertext(int(powmod(a.c, k, a.public_key.n_squared)), a.public_key)


def claim_match(
    ct_a: PaillierCiphertext,
    ct_b: PaillierCiphertext,
    sk: PaillierPrivateKey,
    pk: PaillierPublicKey,
) -> bool:
    """Equality of underlying plaintexts: Dec(ct_a * ct_b^{-1}) == 0."""
    if ct_a.public_key != pk or ct_b.public_key != pk:
        raise ValueError("ciphertexts must be under the supplied public key")
    if gcd(int(ct_b.c), pk.n_squared) != 1:
        raise CiphertextError("ciphertext is not invertible modulo n^2")
    quotient = PaillierCiphertext(int(mpz(ct_a.c) * invert(ct_b.c, pk.n_squared) % pk.n_squared), pk)
    return paillier_decrypt(sk, pk, quotient) == 0
