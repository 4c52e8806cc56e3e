"""Binary file formats: IQ sample containers, serialized filter models, and
raw symbol-estimate streams.

All integers and floats are little-endian.

IQ container (for replaying recorded baseband data through the detector):
    offset 0   magic ``b"APSMIQ\\0\\0"`` (8 bytes)
    offset 8   u32 M (antenna count)
    offset 12  u32 sample_count
    offset 16  payload: float32 I,Q interleaved per antenna, antenna-major
               within each time sample — I(t,0), Q(t,0), I(t,1), Q(t,1), ...

Model container (a trained filter plus its kernel parameters):
    offset 0   magic ``b"APSMMDL1"`` (8 bytes)
    offset 8   u32 M (antenna count; filter vectors have length 2M)
    offset 12  u32 atom_count
    offset 16  f64 w_l, f64 w_g, f64 sigma_sq
    offset 40  theta: 2M f64
    then       atoms: atom_count x 2M f64, row-major
    then       coeffs: atom_count f64

Symbol estimates are written headerless as float32 (I, Q) pairs.

Readers are strict: wrong magic, short payloads, and trailing bytes all raise
:class:`FileFormatError` with the offending byte offset.
"""

from __future__ import annotations

import struct
from typing import Tuple

import numpy as np

from .kernels import FilterState, KernelParams

__all__ = [
    "FileFormatError",
    "IQ_MAGIC",
    "MODEL_MAGIC",
    "save_iq",
    "load_iq",
    "save_model",
    "load_model",
    "save_symbols",
    "load_symbols",
]

IQ_MAGIC = b"APSMIQ\x00\x00"
MODEL_MAGIC = b"APSMMDL1"
_U32_MAX = 2**32 - 1


class FileFormatError(ValueError):
    """A container file failed validation (bad magic, truncation, size)."""


def _check_magic(buf: bytes, magic: bytes, kind: str, path):
    if len(buf) < len(magic):
        raise FileFormatError(
            f"{path}: truncated {kind} file: {len(buf)} bytes, header needs {len(magic)} at offset 0"
        )
    if buf[: len(magic)] != magic:
        raise FileFormatError(
            f"{path}: bad {kind} magic at offset 0: {buf[:len(magic)]!r} != {magic!r}"
        )


def _take(buf: bytes, offset: int, nbytes: int, what: str, path) -> int:
    """Validate that ``nbytes`` are available at ``offset``; return the end."""
    end = offset + nbytes
    if len(buf) < end:
        raise FileFormatError(
            f"{path}: truncated file: {what} needs {nbytes} bytes at offset {offset}, "
            f"file ends at {len(buf)}"
        )
    return end


def _check_end(buf: bytes, offset: int, path):
    if len(buf) > offset:
        raise FileFormatError(
            f"{path}: {len(buf) - offset} trailing bytes after payload at offset {offset}"
        )


def save_iq(path, samples) -> None:
    """Write complex baseband samples (T, M) as an IQ container."""
    rx = np.atleast_2d(np.asarray(samples, dtype=np.complex128))
    t, m = rx.shape
    if m < 1:
        raise ValueError("IQ samples need at least one antenna")
    if t > _U32_MAX or m > _U32_MAX:
        raise ValueError("sample or antenna count exceeds u32 range")
    interleaved = np.empty((t, m, 2), dtype="<f4")
    interleaved[..., 0] = rx.real
    interleaved[..., 1] = rx.imag
    with open(path, "wb") as fh:
        fh.write(IQ_MAGIC)
        fh.write(struct.pack("<II", m, t))
        fh.write(interleaved.tobytes())


def load_iq(path) -> np.ndarray:
    """Read an IQ container; returns complex128 samples of shape (T, M)."""
    with open(path, "rb") as fh:
        buf = fh.read()
    _check_magic(buf, IQ_MAGIC, "IQ", path)
    _take(buf, 8, 8, "IQ header counts", path)
    m, t = struct.unpack_from("<II", buf, 8)
    if m < 1:
        raise FileFormatError(f"{path}: IQ header declares M=0 antennas at offset 8")
    end = _take(buf, 16, t * m * 8, f"payload of {t} samples x {m} antennas", path)
    _check_end(buf, end, path)
    flat = np.frombuffer(buf, dtype="<f4", count=t * m * 2, offset=16).reshape(t, m, 2)
    return (flat[..., 0] + 1j * flat[..., 1]).astype(np.complex128)


def save_model(path, f: FilterState, params: KernelParams) -> None:
    """Serialize a filter and its kernel parameters."""
    if f.dim % 2:
        raise ValueError(f"filter dimension {f.dim} is not 2M for an integer antenna count")
    if f.n_atoms > _U32_MAX:
        raise ValueError("atom count exceeds u32 range")
    m = f.dim // 2
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<II", m, f.n_atoms))
        fh.write(struct.pack("<ddd", params.w_l, params.w_g, params.sigma_sq))
        fh.write(f.theta.astype("<f8").tobytes())
        fh.write(f.atoms.astype("<f8").tobytes())
        fh.write(f.coeffs.astype("<f8").tobytes())


def load_model(path) -> Tuple[FilterState, KernelParams]:
    """Read a model container back into (FilterState, KernelParams)."""
    with open(path, "rb") as fh:
        buf = fh.read()
    _check_magic(buf, MODEL_MAGIC, "model", path)
    _take(buf, 8, 8 + 24, "model header", path)
    m, n_atoms = struct.unpack_from("<II", buf, 8)
    if m < 1:
        raise FileFormatError(f"{path}: model header declares M=0 antennas at offset 8")
    w_l, w_g, sigma_sq = struct.unpack_from("<ddd", buf, 16)
    dim = 2 * m
    offset = 40
    end = _take(buf, offset, dim * 8, f"theta ({dim} f64)", path)
    theta = np.frombuffer(buf, dtype="<f8", count=dim, offset=offset).astype(np.float64)
    offset = end
    end = _take(buf, offset, n_atoms * dim * 8, f"{n_atoms} atoms x {dim} f64", path)
    atoms = (
        np.frombuffer(buf, dtype="<f8", count=n_atoms * dim, offset=offset)
        .reshape(n_atoms, dim)
        .astype(np.float64)
    )
    offset = end
    end = _take(buf, offset, n_atoms * 8, f"{n_atoms} coefficients", path)
    coeffs = np.frombuffer(buf, dtype="<f8", count=n_atoms, offset=offset).astype(np.float64)
    _check_end(buf, end, path)
    try:
        params = KernelParams(w_l, w_g, sigma_sq)
    except ValueError as exc:
        raise FileFormatError(f"{path}: invalid kernel parameters in header: {exc}") from exc
    return FilterState(theta, atoms, coeffs), params


def save_symbols(path, estimates) -> None:
    """Write complex symbol estimates as raw little-endian float32 (I, Q) pairs."""
    est = np.atleast_1d(np.asarray(estimates, dtype=np.complex128))
    pairs = np.empty((est.size, 2), dtype="<f4")
    pairs[:, 0] = est.real
    pairs[:, 1] = est.imag
    with open(path, "wb") as fh:
        fh.write(pairs.tobytes())


def load_symbols(path) -> np.ndarray:
    """Read a raw (I, Q) float32 stream back as complex128."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) % 8:
        raise FileFormatError(
            f"{path}: symbol stream length {len(buf)} is not a multiple of 8 "
            f"(truncated pair at offset {len(buf) - len(buf) % 8})"
        )
    flat = np.frombuffer(buf, dtype="<f4").reshape(-1, 2)
    return (flat[:, 0] + 1j * flat[:, 1]).astype(np.complex128)
