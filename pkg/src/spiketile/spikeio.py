"""Raw binary spike tensors.

Layout: 4-byte magic, version byte, bit-order byte, then token count, timestep
count, and feature count as little-endian u32. The payload is the (N, T, D)
tensor flattened token-major (token, then timestep, then feature) and packed
eight spikes per byte, most significant bit first, zero-padded to a whole byte
at the end.
"""
from __future__ import annotations

import struct

import numpy as np

from .errors import ConfigError
from .golden import SpikeTensor

MAGIC = b"SPKT"
VERSION = 1
MSB_FIRST = 0

_HEADER = struct.Struct("<4sBBIII")


def spikes_to_bytes(tensor: SpikeTensor) -> bytes:
    n, t, d = tensor.bits.shape
    header = _HEADER.pack(MAGIC, VERSION, MSB_FIRST, n, t, d)
    payload = np.packbits(tensor.bits.reshape(-1)).tobytes()
    return header + payload


def spikes_from_bytes(data: bytes) -> SpikeTensor:
    if len(data) < _HEADER.size:
        raise ConfigError("spike file shorter than its header")
    magic, version, bit_order, n, t, d = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ConfigError(f"bad spike file magic {magic!r}")
    if version != VERSION:
        raise ConfigError(f"unsupported spike file version {version}")
    if bit_order != MSB_FIRST:
        raise ConfigError(f"unsupported bit order flag {bit_order}")
    total = n * t * d
    expected = (total + 7) // 8
    payload = data[_HEADER.size:]
    if len(payload) != expected:
        raise ConfigError(
            f"spike payload holds {len(payload)} bytes, expected {expected} "
            f"for dims ({n}, {t}, {d})")
    packed = np.frombuffer(payload, dtype=np.uint8)
    bits = np.unpackbits(packed, count=total).reshape(n, t, d)
    return SpikeTensor(bits)


def write_spikes(path, tensor: SpikeTensor) -> None:
    with open(path, "wb") as fh:
        fh.write(spikes_to_bytes(tensor))


def read_spikes(path) -> SpikeTensor:
    with open(path, "rb") as fh:
        return spikes_from_bytes(fh.read())
