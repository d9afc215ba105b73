"""Binary record files.

Each record is a 64-byte little-endian header followed by ``record_len`` int16
codes; a file holds one or more records back to back.

    magic "NKPA" | version u16 | fs f64 | bits u8 | tag u8 (0=OFF, 1=ON)
    | record_len u64 | seed u64 | config digest 32 bytes | payload
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .errors import (
    DigestMismatchError,
    HeaderError,
    MagicError,
    TruncatedError,
    VersionError,
)
from .synth import VoltageRecord

MAGIC = b"NKPA"
VERSION = 1
HEADER = struct.Struct("<4sHdBBQQ32s")
TAGS = {"OFF": 0, "ON": 1}
TAG_NAMES = {v: k for k, v in TAGS.items()}


def encode_record(rec: VoltageRecord) -> bytes:
    codes = np.asarray(rec.samples)
    if not np.issubdtype(codes.dtype, np.integer):
        raise HeaderError("only quantized (integer) records can be written")
    if len(rec.config_hash) != 32:
        raise HeaderError("config digest must be 32 bytes")
    head = HEADER.pack(
        MAGIC, VERSION, float(rec.fs), rec.bits, TAGS[rec.tag], len(codes),
        rec.seed_used, bytes(rec.config_hash),
    )
    return head + codes.astype("<i2").tobytes()


def write_records(path, records):
    """Write ``records`` to ``path`` atomically (temp file + rename)."""
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        for rec in records:
            fh.write(encode_record(rec))
    os.replace(tmp, path)


def decode_records(blob: bytes, expected_digest=None):
    out = []
    pos = 0
    while pos < len(blob):
        if len(blob) - pos < HEADER.size:
            if len(blob) - pos >= 4 and blob[pos:pos + 4] != MAGIC:
                raise MagicError(f"bad magic at byte {pos}")
            raise TruncatedError(f"header cut short at byte {pos}")
        magic, version, fs, bits, tag, n, seed, digest = HEADER.unpack_from(blob, pos)
        if magic != MAGIC:
            raise MagicError(f"bad magic {magic!r} at byte {pos}")
        if version != VERSION:
            raise VersionError(f"unsupported format version {version}")
        if tag not in TAG_NAMES:
            raise HeaderError(f"unknown tag byte {tag}")
        if not 2 <= bits <= 16 or not fs > 0:
            raise HeaderError(f"implausible header: bits={bits}, fs={fs}")
        if expected_digest is not None and digest != bytes(expected_digest):
            raise DigestMismatchError(f"record at byte {pos} has foreign config digest")
        pos += HEADER.size
        end = pos + 2 * n
        if end > len(blob):
            raise TruncatedError(f"payload needs {2 * n} bytes, {len(blob) - pos} present")
        codes = np.frombuffer(blob, dtype="<i2", count=n, offset=pos).astype(np.int16)
        top = 2 ** (bits - 1) - 1
        if n and int(np.abs(codes.astype(np.int32)).max()) > top:
            raise HeaderError(f"codes exceed the {bits}-bit range")
        out.append(VoltageRecord(codes, fs, TAG_NAMES[tag], seed, digest, bits))
        pos = end
    return out


def read_records(path, expected_digest=None):
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob:
        raise TruncatedError(f"{path}: empty file")
    return decode_records(blob, expected_digest)
