"""Hybrid ledger-edge EHR toolkit.

Aggregated attribute signatures with threshold authentication, decentralized
multi-authority CP-ABE with a hybrid payload envelope, Paillier claim
matching, a content-addressed off-chain store with one-time retrieval
tokens, an endorsement-policy ledger simulator, and the end-to-end workflow
tying them together.
"""

from .pairing import (
    CURVE_ORDER,
    G1Point,
    G2Point,
    GroupParams,
    GtElement,
    default_params,
    hash_to_g1,
    hash_to_scalars,
    multi_pairing,
    pairing,
    random_scalar,
)

__version__ = "0.1.0"

__all__ = [
    "CURVE_ORDER",
    "G1Point",
    "G2Point",
    "GroupParams",
    "GtElement",
    "default_params",
    "hash_to_g1",
    "hash_to_scalars",
    "multi_pairing",
    "pairing",
    "random_scalar",
    "__version__",
]
