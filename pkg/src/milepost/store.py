"""On-disk store primitives.

Layout under a store directory:

    log/commands.ndjson   append-only command log, one canonical JSON per line
    snapshots/model.json  full-model snapshot: digest header line + payload
    evidence/<digest>     content-addressed evidence bytes

The snapshot header carries a sha256 over the payload bytes, so any byte
flip surfaces as a digest mismatch instead of a silently wrong model.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

from .errors import StoreError
from .model import CommandLogEntry, canonical_json

STORE_FORMAT = "milepost-store"
STORE_VERSION = 1

LOG_DIR = "log"
LOG_FILE = "commands.ndjson"
SNAPSHOT_DIR = "snapshots"
SNAPSHOT_FILE = "model.json"
EVIDENCE_DIR = "evidence"


def init_store_dirs(root: Path) -> None:
    for sub in (LOG_DIR, SNAPSHOT_DIR, EVIDENCE_DIR):
        (root / sub).mkdir(parents=True, exist_ok=True)


def log_path(root: Path) -> Path:
    return root / LOG_DIR / LOG_FILE


def snapshot_path(root: Path) -> Path:
    return root / SNAPSHOT_DIR / SNAPSHOT_FILE


def entry_line(entry: CommandLogEntry) -> str:
    return canonical_json(entry.to_dict()) + "\n"


def append_log_entry(root: Path, entry: CommandLogEntry) -> None:
    with open(log_path(root), "a", encoding="utf-8") as fh:
        fh.write(entry_line(entry))
        fh.flush()


def read_log_entries(root: Path) -> list[CommandLogEntry]:
    path = log_path(root)
    if not path.exists():
        return []
    entries: list[CommandLogEntry] = []
    for lineno, line in enumerate(path.read_bytes().split(b"\n"), start=1):
        if not line.strip():
            continue
        try:
            entries.append(CommandLogEntry.from_dict(json.loads(line.decode("utf-8"))))
        except (json.JSONDecodeError, UnicodeDecodeError, KeyError, TypeError, ValueError) as exc:
            raise StoreError(f"corrupt command log at line {lineno}: {exc}") from exc
    for i, entry in enumerate(entries, start=1):
        if entry.sequence_number != i:
            raise StoreError(
                f"corrupt command log: expected sequence {i}, found {entry.sequence_number}"
            )
    return entries


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def write_snapshot(root: Path, model_dict: dict) -> None:
    payload = canonical_json(model_dict).encode("utf-8")
    header = canonical_json(
        {
            "format": STORE_FORMAT,
            "version": STORE_VERSION,
            "payload_sha256": hashlib.sha256(payload).hexdigest(),
        }
    ).encode("utf-8")
    _atomic_write(snapshot_path(root), header + b"\n" + payload)


def read_snapshot(root: Path) -> dict | None:
    path = snapshot_path(root)
    if not path.exists():
        return None
    raw = path.read_bytes()
    newline = raw.find(b"\n")
    if newline < 0:
        raise StoreError("corrupt store: snapshot has no header line")
    header_bytes, payload = raw[:newline], raw[newline + 1 :]
    try:
        header = json.loads(header_bytes)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise StoreError(f"corrupt store: unreadable snapshot header: {exc}") from exc
    if header.get("format") != STORE_FORMAT:
        raise StoreError(f"not a {STORE_FORMAT} snapshot: format={header.get('format')!r}")
    if header.get("version") != STORE_VERSION:
        raise StoreError(
            f"incompatible store version {header.get('version')!r}; this build reads {STORE_VERSION}"
        )
    digest = hashlib.sha256(payload).hexdigest()
    if digest != header.get("payload_sha256"):
        raise StoreError("corrupt store: snapshot payload digest mismatch")
    try:
        return json.loads(payload)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise StoreError(f"corrupt store: unreadable snapshot payload: {exc}") from exc


def write_blob(root: Path, digest: str, data: bytes) -> None:
    path = root / EVIDENCE_DIR / digest
    if not path.exists():
        _atomic_write(path, data)


def read_blobs(root: Path) -> dict[str, bytes]:
    blob_dir = root / EVIDENCE_DIR
    blobs: dict[str, bytes] = {}
    if not blob_dir.is_dir():
        return blobs
    for path in sorted(blob_dir.iterdir()):
        if not path.is_file():
            continue
        data = path.read_bytes()
        if hashlib.sha256(data).hexdigest() != path.name:
            raise StoreError(f"corrupt store: evidence blob {path.name} fails its digest")
        blobs[path.name] = data
    return blobs


def rewrite_log(root: Path, entries: list[CommandLogEntry]) -> None:
    data = "".join(entry_line(e) for e in entries).encode("utf-8")
    _atomic_write(log_path(root), data)
