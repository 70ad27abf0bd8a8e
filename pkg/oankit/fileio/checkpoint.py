"""Bit-exact parameter container.

Layout (little-endian)::

    b"OANCKPT1"
    u32 entry count
    per entry: u16 name length, UTF-8 name, u8 rank, rank x u32 dims,
               prod(dims) x f32 values
    u64 FNV-1a checksum of every preceding byte
"""

from collections import OrderedDict
from pathlib import Path
import struct
from typing import Dict
from typing import Union

import numpy as np
import torch
from typeguard import check_argument_types

from oankit.utils.errors import FileFormatError

MAGIC = b"OANCKPT1"
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a.

    Examples:
        >>> hex(fnv1a_64(b""))
        '0xcbf29ce484222325'
        >>> hex(fnv1a_64(b"a"))
        '0xaf63dc4c8601ec8c'
    """
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def encode_checkpoint(state: Dict[str, torch.Tensor]) -> bytes:
    assert check_argument_types()
    chunks = [MAGIC, struct.pack("<I", len(state))]
    for name, tensor in state.items():
        encoded = name.encode("utf-8")
        array = tensor.detach().cpu().to(torch.float32).numpy()
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}I", *array.shape))
        chunks.append(np.ascontiguousarray(array, dtype="<f4").tobytes())
    body = b"".join(chunks)
    return body + struct.pack("<Q", fnv1a_64(body))


def decode_checkpoint(
    data: bytes, source: str = "<bytes>"
) -> "OrderedDict[str, torch.Tensor]":
    if len(data) < len(MAGIC) + 4 + 8 or data[: len(MAGIC)] != MAGIC:
        raise FileFormatError(f"{source}: not an OANCKPT1 container")
    body, (stored,) = data[:-8], struct.unpack("<Q", data[-8:])
    if fnv1a_64(body) != stored:
        raise FileFormatError(f"{source}: checksum mismatch")

    state = OrderedDict()
    try:
        pos = len(MAGIC)
        (count,) = struct.unpack_from("<I", body, pos)
        pos += 4
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", body, pos)
            pos += 2
            name = body[pos : pos + name_len].decode("utf-8")
            pos += name_len
            (rank,) = struct.unpack_from("<B", body, pos)
            pos += 1
            dims = struct.unpack_from(f"<{rank}I", body, pos)
            pos += 4 * rank
            numel = int(np.prod(dims)) if rank > 0 else 1
            values = np.frombuffer(body, dtype="<f4", count=numel, offset=pos)
            pos += 4 * numel
            state[name] = torch.from_numpy(values.astype(np.float32).reshape(dims))
    except (struct.error, ValueError, UnicodeDecodeError) as e:
        raise FileFormatError(f"{source}: truncated or corrupt container: {e}")
    if pos != len(body):
        raise FileFormatError(f"{source}: {len(body) - pos} trailing bytes")
    return state


def save_checkpoint(path: Union[Path, str], state: Dict[str, torch.Tensor]) -> int:
    """Write ``state`` and return its trailing checksum."""
    assert check_argument_types()
    data = encode_checkpoint(state)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    return struct.unpack("<Q", data[-8:])[0]


def load_checkpoint(path: Union[Path, str]) -> "OrderedDict[str, torch.Tensor]":
    assert check_argument_types()
    path = Path(path)
    return decode_checkpoint(path.read_bytes(), source=str(path))


def checkpoint_checksum(path: Union[Path, str]) -> int:
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise FileFormatError(f"{path}: too short for a checksum")
    return struct.unpack("<Q", data[-8:])[0]
