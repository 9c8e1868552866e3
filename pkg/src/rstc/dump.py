"""Binary file formats.

Channel dump (``.csid``)::

    offset  size  content
    0       4     magic b"CSID"
    4       1     version (1)
    5       4     count, uint32 little-endian
    9       4     dim, uint32 little-endian
    13      8*count*dim
                  complex entries as interleaved float32 LE (real, imag),
                  row-major: realization 0 entries 0..dim-1, then realization 1, ...

Codebook (``.cb``)::

    0       4     count, uint32 LE
    4       4     dim, uint32 LE
    8       16*count*dim
                  interleaved float64 LE (real, imag), row-major by codeword
"""

import struct
from pathlib import Path

import numpy as np

from .channel import ChannelBatch
from .errors import FormatError, ValidationError

MAGIC = b"CSID"
VERSION = 1
_HEADER = struct.Struct("<4sBII")
_CB_HEADER = struct.Struct("<II")
_U32_MAX = 2**32 - 1


def _read(path):
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"{path}: cannot read ({exc.strerror or exc})") from exc


def _write(path, data):
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise FormatError(f"{path}: cannot write ({exc.strerror or exc})") from exc


def _interleave(z, dtype):
    z = np.asarray(z, complex)
    out = np.empty(z.shape + (2,), dtype=dtype)
    out[..., 0] = z.real
    out[..., 1] = z.imag
    return out.tobytes()


def encode_channels(batch):
    h = batch.realizations if isinstance(batch, ChannelBatch) else np.asarray(batch)
    count, dim = h.shape
    if count > _U32_MAX or dim > _U32_MAX:
        raise ValidationError("batch too large for the dump header")
    return _HEADER.pack(MAGIC, VERSION, count, dim) + _interleave(h, "<f4")


def decode_channels(data, source="<bytes>"):
    if len(data) < _HEADER.size:
        raise FormatError(f"{source}: truncated header ({len(data)} bytes)")
    magic, version, count, dim = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"{source}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{source}: unsupported version {version}")
    need = _HEADER.size + 8 * count * dim
    if len(data) < need:
        raise FormatError(f"{source}: truncated payload ({len(data)} of {need} bytes)")
    if len(data) > need:
        raise FormatError(f"{source}: {len(data) - need} trailing bytes after payload")
    if count == 0 or dim == 0:
        raise FormatError(f"{source}: empty batch (count={count}, dim={dim})")
    raw = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(count, dim, 2)
    if not np.all(np.isfinite(raw)):
        raise FormatError(f"{source}: non-finite entries")
    h = raw[..., 0].astype(float) + 1j * raw[..., 1].astype(float)
    return ChannelBatch(h)


def write_channels(path, batch):
    _write(path, encode_channels(batch))


def ingest_channels(path):
    """Read a channel dump written by :func:`write_channels` or an external exporter."""
    return decode_channels(_read(path), str(path))


def write_codebook(path, codebook):
    cb = np.asarray(codebook, complex)
    if cb.ndim != 2:
        raise ValidationError("codebook must be a (count, dim) array")
    _write(path, _CB_HEADER.pack(*cb.shape) + _interleave(cb, "<f8"))


def read_codebook(path):
    data = _read(path)
    if len(data) < _CB_HEADER.size:
        raise FormatError(f"{path}: truncated header")
    count, dim = _CB_HEADER.unpack_from(data)
    need = _CB_HEADER.size + 16 * count * dim
    if len(data) != need:
        raise FormatError(f"{path}: expected {need} bytes, found {len(data)}")
    raw = np.frombuffer(data, dtype="<f8", offset=_CB_HEADER.size).reshape(count, dim, 2)
    return raw[..., 0] + 1j * raw[..., 1]
