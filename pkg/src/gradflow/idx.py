"""IDX binary tensor format (the MNIST container): parse and write.

Layout: two zero magic bytes, one element-type byte (0x08 unsigned byte,
0x0D big-endian float32), one dimension-count byte, then each dimension as a
big-endian u32, then the row-major payload.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadMagic, TruncatedPayload, UnsupportedType

__all__ = ["IdxTensor", "parse_idx", "write_idx", "TYPE_U8", "TYPE_F32"]

TYPE_U8 = 0x08
TYPE_F32 = 0x0D

_DTYPES = {TYPE_U8: np.dtype(">u1"), TYPE_F32: np.dtype(">f4")}


@dataclass(frozen=True)
class IdxTensor:
    type_code: int
    shape: tuple[int, ...]
    data: np.ndarray

    def to_float01(self) -> np.ndarray:
        """u8 payloads as floats in [0,1]; float payloads unchanged."""
        if self.type_code == TYPE_U8:
            return self.data.astype(np.float64) / 255.0
        return self.data.astype(np.float64)


def parse_idx(blob: bytes) -> IdxTensor:
    if len(blob) < 4:
        raise BadMagic(f"header needs 4 bytes, got {len(blob)}")
    if blob[0] != 0 or blob[1] != 0:
        raise BadMagic(f"magic must start 0x00 0x00, got 0x{blob[0]:02x} 0x{blob[1]:02x}")
    type_code, ndim = blob[2], blob[3]
    if type_code not in _DTYPES:
        raise UnsupportedType(f"element type 0x{type_code:02x} not supported")
    header_len = 4 + 4 * ndim
    if len(blob) < header_len:
        raise TruncatedPayload(
            f"need {header_len} header bytes for {ndim} dimensions, got {len(blob)}"
        )
    dims = tuple(
        int.from_bytes(blob[4 + 4 * i : 8 + 4 * i], "big", signed=False) for i in range(ndim)
    )
    dtype = _DTYPES[type_code]
    count = int(np.prod(dims, dtype=np.int64)) if dims else 1
    expected = header_len + count * dtype.itemsize
    if len(blob) != expected:
        raise TruncatedPayload(
            f"payload length mismatch: expected {expected - header_len} bytes "
            f"for shape {dims}, got {len(blob) - header_len}"
        )
    data = np.frombuffer(blob, dtype=dtype, count=count, offset=header_len)
    native = data.astype(dtype.newbyteorder("="))
    return IdxTensor(type_code, dims, native.reshape(dims))


def write_idx(array: np.ndarray) -> bytes:
    """Serialize a uint8 or float32 array; inverse of parse_idx."""
    array = np.asarray(array)
    if array.dtype == np.uint8:
        type_code = TYPE_U8
    elif array.dtype == np.float32:
        type_code = TYPE_F32
    else:
        raise UnsupportedType(f"can only write uint8 or float32, got {array.dtype}")
    if array.ndim > 255:
        raise UnsupportedType("too many dimensions for the format")
    out = bytearray([0, 0, type_code, array.ndim])
    for dim in array.shape:
        out += int(dim).to_bytes(4, "big")
    out += array.astype(_DTYPES[type_code]).tobytes(order="C")
    return bytes(out)
