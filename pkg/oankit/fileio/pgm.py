"""Binary 8-bit grayscale PGM (P5) reader/writer."""

from pathlib import Path
from typing import Union

import numpy as np
from typeguard import check_argument_types

from oankit.utils.errors import FileFormatError


def write_pgm(path: Union[Path, str], raster: np.ndarray) -> None:
    """Write a (H, W) uint8 raster as ``P5`` with max value 255.

    Examples:
        >>> import tempfile, os
        >>> p = os.path.join(tempfile.mkdtemp(), "a.pgm")
        >>> write_pgm(p, np.zeros((2, 3), dtype=np.uint8))
        >>> open(p, "rb").read()[:11]
        b'P5\\n3 2\\n255\\n'
    """
    assert check_argument_types()
    if raster.ndim != 2 or raster.dtype != np.uint8:
        raise ValueError(
            f"raster must be 2-D uint8, got shape={raster.shape} dtype={raster.dtype}"
        )
    height, width = raster.shape
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    with Path(path).open("wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(raster).tobytes())


def _next_token(data: bytes, pos: int):
    # Skip whitespace and comment lines
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace():
        pos += 1
    return data[start:pos], pos


def read_pgm(path: Union[Path, str]) -> np.ndarray:
    """Read a ``P5`` file with max value < 256 into a (H, W) uint8 array."""
    assert check_argument_types()
    path = Path(path)
    data = path.read_bytes()

    magic, pos = _next_token(data, 0)
    if magic != b"P5":
        raise FileFormatError(f"{path}: not a binary PGM (magic={magic!r})")
    try:
        width_tok, pos = _next_token(data, pos)
        height_tok, pos = _next_token(data, pos)
        maxval_tok, pos = _next_token(data, pos)
        width, height, maxval = int(width_tok), int(height_tok), int(maxval_tok)
    except ValueError:
        raise FileFormatError(f"{path}: broken PGM header")
    if not 0 < maxval < 256:
        raise FileFormatError(f"{path}: only 8-bit PGM is supported, maxval={maxval}")
    # Exactly one whitespace byte separates the header from the pixels
    pos += 1
    body = data[pos : pos + width * height]
    if len(body) != width * height:
        raise FileFormatError(
            f"{path}: expected {width * height} pixel bytes, got {len(body)}"
        )
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width).copy()
