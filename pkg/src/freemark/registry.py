"""File-backed trusted key store: durable records of key pairs plus their
trigger sets, content-addressed and tamper-evident.

Layout under the store root:

    index.json            key-id -> {owner, created_at, file}
    records/<key-id>.bin  versioned record, trailing SHA-256 over the body

The key id is the SHA-256 of the serialized key pair alone; owner label and
timestamp are informational and never feed the id.  The owner keeps the
watermark itself — only its commitment is stored.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

from filelock import FileLock

from .data import TriggerSet, trigger_from_bytes, trigger_to_bytes
from .errors import (
    CommitmentMismatchError,
    RecordNotFoundError,
    StoreIntegrityError,
)
from .extract import BerReport, extract, verify
from .keygen import SecretKeyPair, WatermarkVector
from .model import ModelCheckpoint
from .serialize import sha256_hex

RECORD_MAGIC = b"FMRC"
RECORD_VERSION = 1


@dataclass
class KeyRecord:
    key_id: str
    owner: str
    created_at: str
    keypair: SecretKeyPair
    trigger: TriggerSet

    @property
    def watermark_commitment(self) -> str:
        return self.keypair.watermark_commitment

    @staticmethod
    def build(
        keypair: SecretKeyPair,
        trigger: TriggerSet,
        owner: str = "",
        created_at: str = "",
    ) -> "KeyRecord":
        if trigger.digest != keypair.trigger_digest:
            raise ValueError("trigger set does not match the digest in the key pair")
        return KeyRecord(keypair.key_id(), owner, created_at, keypair, trigger)

    def to_bytes(self) -> bytes:
        meta = {
            "version": RECORD_VERSION,
            "key_id": self.key_id,
            "owner": self.owner,
            "created_at": self.created_at,
            "watermark_commitment": self.watermark_commitment,
        }
        meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()
        pair_bytes = self.keypair.to_bytes()
        trig_bytes = trigger_to_bytes(self.trigger)
        body = b"".join(
            [
                RECORD_MAGIC,
                struct.pack("<HI", RECORD_VERSION, len(meta_bytes)),
                meta_bytes,
                struct.pack("<Q", len(pair_bytes)),
                pair_bytes,
                struct.pack("<Q", len(trig_bytes)),
                trig_bytes,
            ]
        )
        return body + bytes.fromhex(sha256_hex(body))

    @staticmethod
    def from_bytes(data: bytes) -> "KeyRecord":
        if len(data) < 42 or data[:4] != RECORD_MAGIC:
            raise StoreIntegrityError("not a key record: bad magic")
        body, stored_hash = data[:-32], data[-32:]
        if bytes.fromhex(sha256_hex(body)) != stored_hash:
            raise StoreIntegrityError("record hash mismatch: stored bytes were altered")
        version, meta_len = struct.unpack_from("<HI", body, 4)
        if version != RECORD_VERSION:
            raise StoreIntegrityError(f"unsupported record version {version}")
        pos = 10
        meta = json.loads(body[pos : pos + meta_len].decode())
        pos += meta_len
        (pair_len,) = struct.unpack_from("<Q", body, pos)
        pos += 8
        keypair = SecretKeyPair.from_bytes(body[pos : pos + pair_len])
        pos += pair_len
        (trig_len,) = struct.unpack_from("<Q", body, pos)
        pos += 8
        trigger = trigger_from_bytes(body[pos : pos + trig_len])
        pos += trig_len
        if pos != len(body):
            raise StoreIntegrityError("trailing bytes inside key record")
        if keypair.key_id() != meta["key_id"]:
            raise StoreIntegrityError("key id does not match the stored key pair")
        if trigger.digest != keypair.trigger_digest:
            raise StoreIntegrityError("trigger digest does not match the key pair")
        return KeyRecord(meta["key_id"], meta["owner"], meta["created_at"], keypair, trigger)


class KeyStore:
    """Single-writer, multi-reader store rooted at a directory."""

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self.records_dir = self.root / "records"
        self.index_path = self.root / "index.json"
        self.records_dir.mkdir(parents=True, exist_ok=True)
        self._lock = FileLock(str(self.root / ".lock"))

    def _read_index(self) -> dict:
        if not self.index_path.exists():
            return {}
        return json.loads(self.index_path.read_text())

    def _write_index(self, index: dict) -> None:
        tmp = self.index_path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(index, sort_keys=True, indent=2))
        tmp.replace(self.index_path)

    def _record_path(self, key_id: str) -> Path:
        return self.records_dir / f"{key_id}.bin"

    def register(self, record: KeyRecord) -> str:
        """Persist atomically under the content-derived id.

        Registering identical key material again is a no-op that returns
        the same id.
        """
        expected = record.keypair.key_id()
        if record.key_id != expected:
            raise ValueError("record key id is not the hash of its key pair")
        data = record.to_bytes()
        with self._lock:
            path = self._record_path(record.key_id)
            if not path.exists():
                tmp = path.with_suffix(".bin.tmp")
                tmp.write_bytes(data)
                tmp.replace(path)
            index = self._read_index()
            index[record.key_id] = {
                "owner": record.owner,
                "created_at": record.created_at,
                "file": f"records/{record.key_id}.bin",
            }
            self._write_index(index)
        return record.key_id

    def fetch(self, key_id: str) -> KeyRecord:
        """Load and hash-verify a record; corruption raises, never returns
        a silently wrong record."""
        path = self._record_path(key_id)
        if not path.exists():
            raise RecordNotFoundError(f"no record for key id {key_id}")
        record = KeyRecord.from_bytes(path.read_bytes())
        if record.key_id != key_id:
            raise StoreIntegrityError("record content does not match its file name")
        return record

    def list_ids(self) -> list[str]:
        return sorted(self._read_index().keys())

    def verify_claim(
        self,
        key_id: str,
        suspect: ModelCheckpoint,
        claimed: WatermarkVector,
        theta: float,
    ) -> BerReport:
        """Extraction with escrowed material against an owner's claimed
        watermark; the claim must hash to the registered commitment before
        any extraction happens."""
        record = self.fetch(key_id)
        if claimed.commitment() != record.watermark_commitment:
            raise CommitmentMismatchError(
                "claimed watermark does not match the registered commitment"
            )
        extracted = extract(suspect, record.trigger, record.keypair)
        return verify(
            claimed.bits,
            extracted,
            theta,
            suspect_fingerprint=suspect.fingerprint(),
            key_id=key_id,
        )
