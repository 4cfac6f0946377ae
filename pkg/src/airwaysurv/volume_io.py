"""NIfTI-1 reading and writing for CT volumes and binary masks.

Voxel arrays are held as 3D numpy arrays indexed ``[i, j, k]`` with ``k`` the
axial (slice) axis. On load, slices are reindexed when needed so that
increasing ``k`` points superior in world space.
"""
from __future__ import annotations

import gzip
import math
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, GeometryError, UnsupportedDatatypeError

__all__ = [
    "Geometry",
    "Volume",
    "Mask",
    "MaskCoercionWarning",
    "read_volume",
    "read_mask",
    "write_volume",
    "write_mask",
    "check_same_geometry",
]

HEADER_SIZE = 348
SPACING_RTOL = 1e-4

# 348-byte NIfTI-1 header, in on-disk field order.
_HEADER_FIELDS = [
    ("i", "sizeof_hdr"),
    ("10s", "data_type"),
    ("18s", "db_name"),
    ("i", "extents"),
    ("h", "session_error"),
    ("b", "regular"),
    ("b", "dim_info"),
    ("8h", "dim"),
    ("f", "intent_p1"),
    ("f", "intent_p2"),
    ("f", "intent_p3"),
    ("h", "intent_code"),
    ("h", "datatype"),
    ("h", "bitpix"),
    ("h", "slice_start"),
    ("8f", "pixdim"),
    ("f", "vox_offset"),
    ("f", "scl_slope"),
    ("f", "scl_inter"),
    ("h", "slice_end"),
    ("b", "slice_code"),
    ("b", "xyzt_units"),
    ("f", "cal_max"),
    ("f", "cal_min"),
    ("f", "slice_duration"),
    ("f", "toffset"),
    ("i", "glmax"),
    ("i", "glmin"),
    ("80s", "descrip"),
    ("24s", "aux_file"),
    ("h", "qform_code"),
    ("h", "sform_code"),
    ("f", "quatern_b"),
    ("f", "quatern_c"),
    ("f", "quatern_d"),
    ("f", "qoffset_x"),
    ("f", "qoffset_y"),
    ("f", "qoffset_z"),
    ("4f", "srow_x"),
    ("4f", "srow_y"),
    ("4f", "srow_z"),
    ("16s", "intent_name"),
    ("4s", "magic"),
]
_FORMAT = "".join(code for code, _ in _HEADER_FIELDS)
assert struct.calcsize("<" + _FORMAT) == HEADER_SIZE

# NIfTI datatype code -> numpy dtype (endianness applied at read time).
_DTYPES = {
    2: np.uint8,
    4: np.int16,
    8: np.int32,
    16: np.float32,
    64: np.float64,
    512: np.uint16,
}
_CODES = {np.dtype(v): k for k, v in _DTYPES.items()}


class MaskCoercionWarning(UserWarning):
    """A mask file held values other than 0 and 1."""


@dataclass(frozen=True, eq=False)
class Geometry:
    """Grid shape and voxel-to-world (mm) mapping."""

    dims: tuple
    spacing: tuple
    affine: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        spacing = tuple(float(s) for s in self.spacing)
        if len(dims) != 3 or any(d < 1 for d in dims):
            raise GeometryError(f"dims must be three positive integers, got {self.dims}")
        if len(spacing) != 3 or not all(s > 0 and math.isfinite(s) for s in spacing):
            raise GeometryError(f"spacing must be three positive reals, got {self.spacing}")
        affine = np.array(self.affine, dtype=np.float64)
        if affine.shape != (4, 4):
            raise GeometryError("affine must be 4x4")
        norms = np.linalg.norm(affine[:3, :3], axis=0)
        if not np.allclose(norms, spacing, rtol=SPACING_RTOL, atol=0):
            raise GeometryError(
                f"affine column norms {tuple(norms)} disagree with spacing {spacing}"
            )
        affine.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "affine", affine)

    @classmethod
    def from_spacing(cls, dims, spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)):
        affine = np.diag([*map(float, spacing), 1.0])
        affine[:3, 3] = origin
        return cls(dims, spacing, affine)

    @property
    def voxel_volume(self) -> float:
        sx, sy, sz = self.spacing
        return sx * sy * sz

    def to_world(self, ijk) -> np.ndarray:
        """Map ``(..., 3)`` voxel indices to world millimetres."""
        ijk = np.asarray(ijk, dtype=np.float64)
        return ijk @ self.affine[:3, :3].T + self.affine[:3, 3]

    def __eq__(self, other):
        if not isinstance(other, Geometry):
            return NotImplemented
        return (
            self.dims == other.dims
            and self.spacing == other.spacing
            and np.array_equal(self.affine, other.affine)
        )

    def __hash__(self):
        return hash((self.dims, self.spacing))


def _frozen(arr):
    """Read-only C-contiguous array; writable inputs are copied, not frozen in place."""
    if arr.flags.writeable or not arr.flags.c_contiguous:
        arr = np.array(arr, order="C")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Volume:
    """Scalar CT grid in Hounsfield units."""

    geometry: Geometry
    voxels: np.ndarray

    def __post_init__(self):
        vox = np.asarray(self.voxels, dtype=np.float64)
        if vox.shape != self.geometry.dims:
            raise GeometryError(f"voxel array shape {vox.shape} != dims {self.geometry.dims}")
        if not np.all(np.isfinite(vox)):
            raise FormatError("volume contains non-finite values")
        object.__setattr__(self, "voxels", _frozen(vox))


@dataclass(frozen=True, eq=False)
class Mask:
    """Binary grid; ``voxels`` is a boolean array."""

    geometry: Geometry
    voxels: np.ndarray

    def __post_init__(self):
        vox = np.asarray(self.voxels)
        if vox.shape != self.geometry.dims:
            raise GeometryError(f"mask shape {vox.shape} != dims {self.geometry.dims}")
        if vox.dtype != bool:
            if not np.isin(vox, (0, 1)).all():
                raise ValueError("mask values must be 0 or 1")
            vox = vox.astype(bool)
        object.__setattr__(self, "voxels", _frozen(vox))

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.voxels))

    def with_voxels(self, voxels) -> "Mask":
        return Mask(self.geometry, voxels)


def check_same_geometry(a: Geometry, b: Geometry) -> bool:
    """True iff dims match and spacing agrees within 1e-4 relative."""
    if a.dims != b.dims:
        return False
    return bool(np.allclose(a.spacing, b.spacing, rtol=SPACING_RTOL, atol=0))


# -- reading ---------------------------------------------------------------


def _read_bytes(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        try:
            raw = gzip.decompress(raw)
        except (OSError, EOFError) as exc:
            raise FormatError(f"{path}: corrupt gzip stream") from exc
    return raw


def _parse_header(raw: bytes, path) -> tuple[dict, str]:
    if len(raw) < HEADER_SIZE:
        raise FormatError(f"{path}: truncated header ({len(raw)} < {HEADER_SIZE} bytes)")
    for endian in "<>":
        if struct.unpack(endian + "i", raw[:4])[0] == HEADER_SIZE:
            break
    else:
        raise FormatError(f"{path}: sizeof_hdr is not 348")
    values = struct.unpack(endian + _FORMAT, raw[:HEADER_SIZE])
    hdr = {}
    pos = 0
    for code, name in _HEADER_FIELDS:
        n = int(code[:-1]) if code[:-1] and code[-1] != "s" else 1
        if n == 1:
            hdr[name] = values[pos]
            pos += 1
        else:
            hdr[name] = values[pos:pos + n]
            pos += n
    if hdr["magic"] != b"n+1\x00":
        raise FormatError(f"{path}: bad magic {hdr['magic']!r} (expected single-file n+1)")
    return hdr, endian


def _quaternion_affine(hdr) -> np.ndarray:
    b, c, d = hdr["quatern_b"], hdr["quatern_c"], hdr["quatern_d"]
    a = math.sqrt(max(0.0, 1.0 - (b * b + c * c + d * d)))
    qfac = -1.0 if hdr["pixdim"][0] == -1.0 else 1.0
    rot = np.array([
        [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
        [2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)],
        [2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - b * b - c * c],
    ])
    pix = np.array(hdr["pixdim"][1:4], dtype=np.float64)
    pix[2] *= qfac
    affine = np.eye(4)
    affine[:3, :3] = rot * pix
    affine[:3, 3] = (hdr["qoffset_x"], hdr["qoffset_y"], hdr["qoffset_z"])
    return affine


def _header_affine(hdr, spacing) -> np.ndarray:
    if hdr["sform_code"] > 0:
        affine = np.eye(4)
        affine[0] = hdr["srow_x"]
        affine[1] = hdr["srow_y"]
        affine[2] = hdr["srow_z"]
        return affine
    if hdr["qform_code"] > 0:
        return _quaternion_affine(hdr)
    return np.diag([*spacing, 1.0])


def _load(path) -> tuple[Geometry, np.ndarray]:
    raw = _read_bytes(path)
    hdr, endian = _parse_header(raw, path)
    dim = hdr["dim"]
    ndim = dim[0]
    if not 1 <= ndim <= 7:
        raise GeometryError(f"{path}: invalid dim[0]={ndim}")
    shape = [int(d) for d in dim[1:ndim + 1]]
    if any(d < 1 for d in shape):
        raise GeometryError(f"{path}: non-positive dims {shape}")
    if any(d != 1 for d in shape[3:]):
        raise GeometryError(f"{path}: only 3D images are supported, got dims {shape}")
    dims = tuple((shape + [1, 1, 1])[:3])

    code = hdr["datatype"]
    if code not in _DTYPES:
        raise UnsupportedDatatypeError(f"{path}: unsupported NIfTI datatype code {code}")
    dtype = np.dtype(_DTYPES[code]).newbyteorder(endian)

    spacing = tuple(float(abs(p)) for p in hdr["pixdim"][1:4])
    for ax in range(ndim, 3):
        # Collapsed trailing axes carry no spacing information.
        if spacing[ax] <= 0:
            spacing = spacing[:ax] + (1.0,) + spacing[ax + 1:]
    if any(s <= 0 for s in spacing):
        raise GeometryError(f"{path}: non-positive spacing {spacing}")

    offset = int(hdr["vox_offset"])
    offset = max(offset, HEADER_SIZE)
    nbytes = int(np.prod(dims)) * dtype.itemsize
    if len(raw) < offset + nbytes:
        raise FormatError(f"{path}: data section truncated")
    data = np.frombuffer(raw, dtype=dtype, count=int(np.prod(dims)), offset=offset)
    data = data.reshape(dims, order="F").astype(np.float64)

    slope, inter = hdr["scl_slope"], hdr["scl_inter"]
    if not math.isfinite(slope) or slope == 0:
        slope = 1.0
    if not math.isfinite(inter):
        inter = 0.0
    if slope != 1.0 or inter != 0.0:
        data = data * slope + inter

    affine = _header_affine(hdr, spacing)
    # Trust pixdim for a collapsed axis whose affine column is all zero.
    for ax in range(3):
        if not np.any(affine[:3, ax]):
            affine[ax, ax] = spacing[ax]
    if affine[2, 2] < 0:
        # Reindex slices so that increasing k is superior.
        data = data[:, :, ::-1]
        affine[:3, 3] = affine[:3, 3] + (dims[2] - 1) * affine[:3, 2]
        affine[:3, 2] = -affine[:3, 2]
    return Geometry(dims, spacing, affine), data


def read_volume(path) -> Volume:
    """Read a NIfTI-1 file (``.nii`` or gzip ``.nii.gz``) as a float64 volume."""
    geometry, data = _load(path)
    return Volume(geometry, data)


def read_mask(path) -> Mask:
    """Read a NIfTI-1 file as a binary mask; stored values above 0.5 become 1.

    Values outside {0, 1} and the common {0, 255} convention emit a
    :class:`MaskCoercionWarning`.
    """
    geometry, data = _load(path)
    if not (np.isin(data, (0.0, 1.0)).all() or np.isin(data, (0.0, 255.0)).all()):
        warnings.warn(
            f"{path}: non-binary mask values thresholded at 0.5",
            MaskCoercionWarning,
            stacklevel=2,
        )
    return Mask(geometry, data > 0.5)


# -- writing ---------------------------------------------------------------


def _header_bytes(geometry: Geometry, dtype: np.dtype) -> bytes:
    hdr = {name: (0 if code[-1] != "s" else b"") for code, name in _HEADER_FIELDS}
    for code, name in _HEADER_FIELDS:
        if code[:-1] and code[-1] != "s":
            hdr[name] = (0,) * int(code[:-1])
    hdr["sizeof_hdr"] = HEADER_SIZE
    hdr["dim"] = (3, *geometry.dims, 1, 1, 1, 1)
    hdr["datatype"] = _CODES[dtype]
    hdr["bitpix"] = dtype.itemsize * 8
    hdr["pixdim"] = (1.0, *geometry.spacing, 1.0, 1.0, 1.0, 1.0)
    hdr["vox_offset"] = 352.0
    hdr["scl_slope"] = 1.0
    hdr["xyzt_units"] = 2  # millimetres
    hdr["sform_code"] = 1
    hdr["srow_x"] = tuple(geometry.affine[0])
    hdr["srow_y"] = tuple(geometry.affine[1])
    hdr["srow_z"] = tuple(geometry.affine[2])
    hdr["magic"] = b"n+1\x00"
    flat = []
    for code, name in _HEADER_FIELDS:
        v = hdr[name]
        if isinstance(v, tuple):
            flat.extend(v)
        else:
            flat.append(v)
    return struct.pack("<" + _FORMAT, *flat) + b"\x00" * 4


def _save(path, geometry: Geometry, data: np.ndarray, dtype) -> None:
    base = np.dtype(dtype)
    if base not in _CODES:
        raise UnsupportedDatatypeError(f"cannot write dtype {base}")
    body = np.asarray(data, dtype=base.newbyteorder("<")).tobytes(order="F")
    payload = _header_bytes(geometry, base) + body
    path = Path(path)
    if path.name.endswith(".gz"):
        payload = gzip.compress(payload, mtime=0)
    path.write_bytes(payload)


def write_volume(v: Volume, path, dtype=np.float64) -> None:
    """Write a volume; the default float64 storage is lossless."""
    _save(path, v.geometry, v.voxels, dtype)


def write_mask(m: Mask, path) -> None:
    """Write a mask as uint8 {0, 1}."""
    _save(path, m.geometry, m.voxels.astype(np.uint8), np.uint8)
