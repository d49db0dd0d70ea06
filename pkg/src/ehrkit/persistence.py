"""Save/load an EhrSystem under a data directory.

Layout:
    config.yaml   peers, endorsement k, block size/timeout, seed
    state.json    authorities, participants, records, rules
    ledger.json   committed chain (the simulator is drained before saving)
    tokens.json   one-time token registry
    store/        content-addressed node files

This is a simulation artifact: secret material (signing scalars, master keys,
Paillier private keys) is persisted in plain JSON so multi-invocation CLI
sessions can continue where they left off.  Do not reuse this layout for
anything that needs real key custody.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Optional

import yaml

from . import absa, maabe, paillier
from .absa import AttributeStatement
from .dagstore import Cid, DiskBlockStore, TokenRegistry
from .encoding import b64d, b64e
from .ledger import EndorsementPolicy, LedgerConfig, LedgerSimulator, PeerProfile
from .pairing import G1Point, G2Point, GtElement
from .workflow import AbsaAttributeBundle, EhrRecord, EhrSystem, Participant, Role

__all__ = ["save_system", "load_system", "init_data_dir", "data_dir_from_env", "DEFAULT_DATA_DIR"]

DEFAULT_DATA_DIR = "./ehr-data"
_ENV_VAR = "EHR_DATA_DIR"


def data_dir_from_env(explicit: Optional[str] = None) -> Path:
    if explicit:
        return Path(explicit)
    return Path(os.environ.get(_ENV_VAR, DEFAULT_DATA_DIR))


def _attribute_to_dict(attr: AttributeStatement) -> dict:
    return {"authority_id": attr.authority_id, "name": attr.name, "value": attr.value}


def _attribute_from_dict(d: dict) -> AttributeStatement:
    return AttributeStatement(d["authority_id"], d["name"], d["value"])


def _system_state(system: EhrSystem) -> dict:
    abe_auth = {}
    for label in system.abe_registry.attributes():
        pk = system.abe_registry.public_keys()[label]
        msk = system.abe_registry.master_key(label)
        abe_auth[label] = {
            "e_alpha": b64e(pk.e_alpha.serialize()),
            "g_y": b64e(pk.g_y.serialize()),
            "alpha": str(msk.alpha),
            "y": str(msk.y),
        }
    absa_auth = []
    for pool in system.absa_authorities.values():
        for keypair in pool:
            absa_auth.append(
                {
                    "attribute": _attribute_to_dict(keypair.attribute),
                    "sik": str(keypair.signing_key),
                    "vk": b64e(keypair.verification_key.serialize()),
                }
            )
    participants = {}
    for gid, part in system.participants.items():
        bundles = {}
        for name, bundle in part.absa_material.items():
            bundles[name] = {
                "attribute": _attribute_to_dict(bundle.attribute),
                "signing_keys": [str(k.key) for k in bundle.signing_keys],
                "signatures": [b64e(s.sigma.serialize()) for s in bundle.signatures],
                "aggregated": bundle.aggregated.envelope(),
                "aggregated_vk": bundle.aggregated_vk.envelope(),
            }
        entry = {
            "role": part.role.value,
            "display_name": part.display_name,
            "organization": part.organization,
            "attribute_keys": {
                label: {"gid": key.gid, "k": b64e(key.k.serialize())}
                for label, key in part.attribute_keys.items()
            },
            "absa": bundles,
        }
        if part.paillier_public is not None:
            entry["paillier_pk"] = part.paillier_public.envelope()
            entry["paillier_sk"] = part.paillier_private.envelope(part.paillier_public)
        participants[gid] = entry
    records = {
        gid: {
            "patient_gid": rec.patient_gid,
            "root_cid": rec.root_cid.text(),
            "policy": rec.policy_text,
            "claim_fields": {name: ct.envelope() for name, ct in rec.claim_fields.items()},
            "created_at": rec.created_at,
        }
        for gid, rec in system.records.items()
    }
    return {
        "version": 1,
        "gid_counter": system._gid_counter,
        "rules_text": system.rules_text,
        "abe_authorities": abe_auth,
        "absa_authorities": absa_auth,
        "participants": participants,
        "records": records,
    }


def _restore_state(system: EhrSystem, state: dict) -> None:
    system._gid_counter = state["gid_counter"]
    for label, entry in state["abe_authorities"].items():
        pk = maabe.AbeAuthorityPublicKey(
            label,
            GtElement.deserialize(b64d(entry["e_alpha"])),
            G2Point.deserialize(b64d(entry["g_y"])),
        )
        msk = maabe.AbeAuthorityMasterKey(label, int(entry["alpha"]), int(entry["y"]))
        system.abe_registry.install(pk, msk)
    for entry in state["absa_authorities"]:
        attr = _attribute_from_dict(entry["attribute"])
        keypair = absa.AbsaAuthorityKeypair(
            attr, int(entry["sik"]), G2Point.deserialize(b64d(entry["vk"]))
        )
        system.absa_authorities.setdefault(attr.encode(), []).append(keypair)
    for gid, entry in state["participants"].items():
        part = Participant(
            gid,
            Role(entry["role"]),
            entry["display_name"],
            entry["organization"],
        )
        for label, kd in entry["attribute_keys"].items():
            part.attribute_keys[label] = maabe.UserAttributeKey(
                kd["gid"], label, G1Point.deserialize(b64d(kd["k"]))
            )
        for name, bd in entry["absa"].items():
            attr = _attribute_from_dict(bd["attribute"])
            part.absa_material[name] = AbsaAttributeBundle(
                attribute=attr,
                signing_keys=[absa.GidSigningKey(gid, attr, int(k)) for k in bd["signing_keys"]],
                signatures=[
                    absa.IndividualSignature(attr, G1Point.deserialize(b64d(s)))
                    for s in bd["signatures"]
                ],
                aggregated=absa.AggregatedSignature.from_envelope(bd["aggregated"]),
                aggregated_vk=absa.AggregatedVerificationKey.from_envelope(bd["aggregated_vk"]),
            )
        if "paillier_pk" in entry:
            part.paillier_public = paillier.PaillierPublicKey.from_envelope(entry["paillier_pk"])
            part.paillier_private = paillier.PaillierPrivateKey.from_envelope(entry["paillier_sk"])
        system.participants[gid] = part
    for gid, rd in state["records"].items():
        system.records[gid] = EhrRecord(
            rd["patient_gid"],
            Cid.from_text(rd["root_cid"]),
            rd["policy"],
            {name: paillier.PaillierCiphertext.from_envelope(env) for name, env in rd["claim_fields"].items()},
            rd["created_at"],
        )


def _ledger_setup_from_config(cfg: dict) -> tuple[list[PeerProfile], EndorsementPolicy, LedgerConfig]:
    peers = [
        PeerProfile(
            p["peer_id"],
            float(p.get("latency_mean_ms", 20.0)),
            float(p.get("latency_jitter_ms", 5.0)),
            bool(p.get("alive", True)),
        )
        for p in cfg["peers"]
    ]
    policy = EndorsementPolicy(int(cfg["endorsement_k"]), tuple(p.peer_id for p in peers))
    block = cfg.get("block", {})
    ledger_config = LedgerConfig(
        max_block_size=int(block.get("max_size", 10)),
        batch_timeout_ms=float(block.get("timeout_ms", 100.0)),
        validation_mean_ms=float(cfg.get("validation", {}).get("mean_ms", 20.0)),
        validation_jitter_ms=float(cfg.get("validation", {}).get("jitter_ms", 5.0)),
        seed=int(cfg.get("seed", 0)),
    )
    return peers, policy, ledger_config


def init_data_dir(
    data_dir: Path,
    n_peers: int = 3,
    endorsement_k: int = 2,
    seed: int = 0,
    max_block_size: int = 10,
    batch_timeout_ms: float = 100.0,
) -> EhrSystem:
    """Create a fresh deployment and persist its configuration."""
    data_dir = Path(data_dir)
    if (data_dir / "config.yaml").exists():
        raise FileExistsError(f"{data_dir} already holds a deployment")
    data_dir.mkdir(parents=True, exist_ok=True)
    cfg = {
        "peers": [
            {"peer_id": f"peer{i}", "latency_mean_ms": 20.0, "latency_jitter_ms": 5.0}
            for i in range(n_peers)
        ],
        "endorsement_k": endorsement_k,
        "block": {"max_size": max_block_size, "timeout_ms": batch_timeout_ms},
        "validation": {"mean_ms": 20.0, "jitter_ms": 5.0},
        "seed": seed,
    }
    (data_dir / "config.yaml").write_text(yaml.safe_dump(cfg, sort_keys=True))
    peers, policy, ledger_config = _ledger_setup_from_config(cfg)
    system = EhrSystem(
        peers=peers,
        endorsement_k=policy.k,
        ledger_config=ledger_config,
        block_store=DiskBlockStore(data_dir / "store"),
    )
    save_system(system, data_dir)
    return system


def save_system(system: EhrSystem, data_dir: Path) -> None:
    data_dir = Path(data_dir)
    system.ledger.run_until_idle()
    (data_dir / "state.json").write_text(json.dumps(_system_state(system), indent=1))
    (data_dir / "ledger.json").write_text(json.dumps(system.ledger.to_dict()))
    (data_dir / "tokens.json").write_text(json.dumps(system.tokens.to_dict()))


def load_system(data_dir: Path) -> EhrSystem:
    data_dir = Path(data_dir)
    cfg_path = data_dir / "config.yaml"
    if not cfg_path.exists():
        raise FileNotFoundError(f"no deployment at {data_dir}; run `ehr setup` first")
    cfg = yaml.safe_load(cfg_path.read_text())
    peers, policy, ledger_config = _ledger_setup_from_config(cfg)
    state = json.loads((data_dir / "state.json").read_text())
    system = EhrSystem(
        peers=peers,
        endorsement_k=policy.k,
        ledger_config=ledger_config,
        block_store=DiskBlockStore(data_dir / "store"),
        rules_text=state["rules_text"],
    )
    system.ledger = LedgerSimulator.from_dict(
        peers, policy, ledger_config, json.loads((data_dir / "ledger.json").read_text())
    )
    system.tokens = TokenRegistry.from_dict(
        system.dag, json.loads((data_dir / "tokens.json").read_text())
    )
    _restore_state(system, state)
    return system
