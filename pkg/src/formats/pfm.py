"""
Portable float map (PFM) reader and writer for depth maps.
"""

import re

import numpy as np

from src.errors import InvalidInputError, ParseError

_DIMENSIONS = re.compile(rb"^\s*(\d+)\s+(\d+)\s*$")


def write_pfm(path: str, values: np.ndarray):
    """Write an (H, W) or (H, W, 3) array as little-endian float32, rows bottom to top."""
    values = np.asarray(values)
    if values.ndim == 3 and values.shape[2] == 3:
        header = b"PF"
    elif values.ndim == 2 or (values.ndim == 3 and values.shape[2] == 1):
        header = b"Pf"
        values = values.reshape(values.shape[0], values.shape[1])
    else:
        raise InvalidInputError(f"PFM stores H x W or H x W x 3 arrays, got shape {values.shape}")

    data = np.flipud(values).astype("<f4")
    with open(path, "wb") as f:
        f.write(header + b"\n")
        f.write(b"%d %d\n" % (values.shape[1], values.shape[0]))
        f.write(b"-1.0\n")
        f.write(np.ascontiguousarray(data).tobytes())


def read_pfm(path: str) -> np.ndarray:
    """Read a PFM file into a float32 array with the first row at the top."""
    try:
        with open(path, "rb") as f:
            header = f.readline().rstrip()
            if header == b"PF":
                channels = 3
            elif header == b"Pf":
                channels = 1
            else:
                raise ParseError("not a PFM file", line=1, path=path)

            match = _DIMENSIONS.match(f.readline())
            if not match:
                raise ParseError("malformed dimensions", line=2, path=path)
            width, height = map(int, match.groups())

            try:
                scale = float(f.readline().strip())
            except ValueError:
                raise ParseError("malformed scale", line=3, path=path)
            if scale == 0:
                raise ParseError("scale must be nonzero", line=3, path=path)
            endian = "<" if scale < 0 else ">"

            data = np.frombuffer(f.read(), dtype=endian + "f4")
    except FileNotFoundError:
        raise ParseError("file not found", path=path)

    expected = width * height * channels
    if data.size != expected:
        raise ParseError(f"expected {expected} samples, found {data.size}", path=path)

    shape = (height, width, 3) if channels == 3 else (height, width)
    return np.flipud(data.reshape(shape)).astype(np.float32)
