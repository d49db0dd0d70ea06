"""Content-addressed off-chain store: chunked Merkle-DAG blobs and one-time tokens.

Blobs are split into fixed-size chunks, each chunk becomes an immutable leaf
node, and balanced link nodes are built bottom-up; every identifier is the
hash of the node's canonical encoding, so links are self-verifying and any
byte change propagates to the root identifier.  Retrieval re-hashes every
node before use and fails loudly on mismatch.

One-time tokens are unguessable 128-bit capabilities that resolve a stored
root exactly once; redemption is an atomic compare-and-set, so concurrent
redeems yield a single winner.
"""

from __future__ import annotations

import base64
import hashlib
import secrets
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Protocol

__all__ = [
    "CHUNK_SIZE",
    "FANOUT",
    "Cid",
    "DagNode",
    "DagStoreError",
    "NotFoundError",
    "IntegrityError",
    "ExpiredTokenError",
    "BlockStore",
    "MemoryBlockStore",
    "DiskBlockStore",
    "DagStore",
    "OneTimeToken",
    "TokenRegistry",
]

CHUNK_SIZE = 256 * 1024
FANOUT = 174

_CODEC_RAW = 0x55
_CODEC_DAG = 0x70
_VERSION = 0x01


class DagStoreError(Exception):
    pass


class NotFoundError(DagStoreError):
    """Unknown identifier or token."""


class IntegrityError(DagStoreError):
    """Stored bytes do not hash to their identifier."""


class ExpiredTokenError(DagStoreError):
    """Token was already redeemed."""


@dataclass(frozen=True)
class Cid:
    """Content identifier: (version, codec, digest) of a node's canonical bytes."""

    version: int
    codec: int
    digest: bytes

    @classmethod
    def for_bytes(cls, codec: int, data: bytes) -> "Cid":
        return cls(_VERSION, codec, hashlib.sha256(data).digest())

    def bytes(self) -> bytes:
        return bytes([self.version, self.codec]) + self.digest

    def text(self) -> str:
        # Multibase-style: 'b' prefix plus unpadded lowercase base32.
        return "b" + base64.b32encode(self.bytes()).decode("ascii").rstrip("=").lower()

    @classmethod
    def from_text(cls, text: str) -> "Cid":
        if not text.startswith("b"):
            raise ValueError("unsupported multibase prefix")
        body = text[1:].upper()
        body += "=" * (-len(body) % 8)
        raw = base64.b32decode(body)
        if len(raw) != 34 or raw[0] != _VERSION:
            raise ValueError("malformed CID")
        return cls(raw[0], raw[1], raw[2:])

    def __str__(self) -> str:
        return self.text()


@dataclass(frozen=True)
class DagNode:
    """Immutable DAG node: ordered child links plus an inline data chunk."""

    links: tuple[tuple[str, Cid, int], ...]
    data: bytes

    def encode(self) -> bytes:
        out = bytearray(b"EHRDAG1")
        out += len(self.links).to_bytes(4, "big")
        for name, cid, size in self.links:
            nb = name.encode("utf-8")
            out += len(nb).to_bytes(2, "big") + nb
            out += cid.bytes()
            out += size.to_bytes(8, "big")
        out += len(self.data).to_bytes(8, "big") + self.data
        return bytes(out)

    @classmethod
    def decode(cls, raw: bytes) -> "DagNode":
        if raw[:7] != b"EHRDAG1":
            raise IntegrityError("bad node magic")
        pos = 7
        nlinks = int.from_bytes(raw[pos : pos + 4], "big")
        pos += 4
        links = []
        for _ in range(nlinks):
            nlen = int.from_bytes(raw[pos : pos + 2], "big")
            pos += 2
            name = raw[pos : pos + nlen].decode("utf-8")
            pos += nlen
            cid = Cid(raw[pos], raw[pos + 1], raw[pos + 2 : pos + 34])
            pos += 34
            size = int.from_bytes(raw[pos : pos + 8], "big")
            pos += 8
            links.append((name, cid, size))
        dlen = int.from_bytes(raw[pos : pos + 8], "big")
        pos += 8
        data = raw[pos : pos + dlen]
        if pos + dlen != len(raw):
            raise IntegrityError("trailing bytes in node encoding")
        return cls(tuple(links), data)

    def cid(self) -> Cid:
        codec = _CODEC_DAG if self.links else _CODEC_RAW
        return Cid.for_bytes(codec, self.encode())


class BlockStore(Protocol):
    """Pluggable key-value backend keyed by digest."""

    def get(self, digest: bytes) -> Optional[bytes]: ...

    def put(self, digest: bytes, data: bytes) -> None: ...

    def __contains__(self, digest: bytes) -> bool: ...


class MemoryBlockStore:
    def __init__(self):
        self._blocks: dict[bytes, bytes] = {}

    def get(self, digest: bytes) -> Optional[bytes]:
        return self._blocks.get(digest)

    def put(self, digest: bytes, data: bytes) -> None:
        # Identical bytes under an identical key: overwrite is a no-op.
        self._blocks[digest] = data

    def __contains__(self, digest: bytes) -> bool:
        return digest in self._blocks


class DiskBlockStore:
    """One file per node, named by hex digest."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, digest: bytes) -> Path:
        return self.root / f"{digest.hex()}.bin"

    def get(self, digest: bytes) -> Optional[bytes]:
        path = self._path(digest)
        try:
            return path.read_bytes()
        except FileNotFoundError:
            return None
        except OSError as exc:
            raise DagStoreError(f"backend read failed: {exc}") from exc

    def put(self, digest: bytes, data: bytes) -> None:
        path = self._path(digest)
        if path.exists():
            return
        tmp = path.with_suffix(".tmp")
        try:
            tmp.write_bytes(data)
            tmp.rename(path)
        except OSError as exc:
            raise DagStoreError(f"backend write failed: {exc}") from exc

    def __contains__(self, digest: bytes) -> bool:
        return self._path(digest).exists()


class DagStore:
    """Chunked Merkle-DAG blob storage over a pluggable block store."""

    def __init__(self, store: Optional[BlockStore] = None, chunk_size: int = CHUNK_SIZE, fanout: int = FANOUT):
        if chunk_size < 1 or fanout < 2:
            raise ValueError("chunk_size must be >= 1 and fanout >= 2")
        self.store = store if store is not None else MemoryBlockStore()
        self.chunk_size = chunk_size
        self.fanout = fanout

    def _put_node(self, node: DagNode) -> Cid:
        raw = node.encode()
        cid = node.cid()
        self.store.put(cid.digest, raw)
        return cid

    def get_node(self, cid: Cid) -> DagNode:
        raw = self.store.get(cid.digest)
        if raw is None:
            raise NotFoundError(f"unknown CID {cid.text()}")
        if hashlib.sha256(raw).digest() != cid.digest:
            raise IntegrityError(f"stored bytes do not match {cid.text()}")
        return DagNode.decode(raw)

    def has(self, cid: Cid) -> bool:
        return cid.digest in self.store

    def put_blob(self, data: bytes) -> Cid:
        """Chunk, hash, and link; returns the root identifier. Idempotent."""
        chunks = [data[i : i + self.chunk_size] for i in range(0, len(data), self.chunk_size)] or [b""]
        level: list[tuple[Cid, int]] = []
        for chunk in chunks:
            cid = self._put_node(DagNode((), chunk))
            level.append((cid, len(chunk)))
        while len(level) > 1:
            parents = []
            for i in range(0, len(level), self.fanout):
                group = level[i : i + self.fanout]
                links = tuple(("", cid, size) for cid, size in group)
                cid = self._put_node(DagNode(links, b""))
                parents.append((cid, sum(size for _, size in group)))
            level = parents
        return level[0][0]

    def _walk_leaves(self, cid: Cid) -> Iterable[bytes]:
        node = self.get_node(cid)
        if not node.links:
            yield node.data
            return
        for _, child, _ in node.links:
            yield from self._walk_leaves(child)

    def get_blob(self, root: Cid) -> bytes:
        """Exact original bytes; every fetched node is re-verified first."""
        return b"".join(self._walk_leaves(root))

    def leaf_cids(self, root: Cid) -> list[Cid]:
        """Identifiers of the chunk-level nodes under a root, in order."""
        node = self.get_node(root)
        if not node.links:
            return [root]
        out: list[Cid] = []
        for _, child, _ in node.links:
            out.extend(self.leaf_cids(child))
        return out


@dataclass
class OneTimeToken:
    token_id: str
    target: Cid
    state: str = "unredeemed"  # unredeemed | redeemed


class TokenRegistry:
    """Single-use retrieval capabilities over a DagStore.

    Redemption is the only mutating operation and is linearizable: the state
    transition happens under a lock before any data is read.
    """

    def __init__(self, dag: DagStore):
        self.dag = dag
        self._tokens: dict[str, OneTimeToken] = {}
        self._lock = threading.Lock()

    def issue(self, target: Cid) -> OneTimeToken:
        if not self.dag.has(target):
            raise NotFoundError(f"cannot issue token for unknown CID {target.text()}")
        token = OneTimeToken(secrets.token_hex(16), target)
        with self._lock:
            self._tokens[token.token_id] = token
        return token

    def peek(self, token_id: str) -> OneTimeToken:
        with self._lock:
            token = self._tokens.get(token_id)
        if token is None:
            raise NotFoundError("unknown token")
        return token

    def redeem(self, token_id: str) -> bytes:
        """Atomically burn the token, then return the target blob."""
        with self._lock:
            token = self._tokens.get(token_id)
            if token is None:
                raise NotFoundError("unknown token")
            if token.state == "redeemed":
                raise ExpiredTokenError("token already redeemed")
            token.state = "redeemed"
        return self.dag.get_blob(token.target)

    def to_dict(self) -> dict:
        with self._lock:
            return {
                tid: {"target": tok.target.text(), "state": tok.state}
                for tid, tok in self._tokens.items()
            }

    @classmethod
    def from_dict(cls, dag: DagStore, data: dict) -> "TokenRegistry":
        registry = cls(dag)
        for tid, entry in data.items():
            registry._tokens[tid] = OneTimeToken(tid, Cid.from_text(entry["target"]), entry["state"])
        return registry
