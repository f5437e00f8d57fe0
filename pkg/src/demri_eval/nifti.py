"""Minimal single-file NIfTI-1 (``n+1``) reader and writer.

Only what DE-MRI challenge data needs: 2D/3D scalar images, five datatypes,
slope/intercept scaling and optional gzip. Orientation matrices are written
as a plain scaling ``sform`` and ignored on read.
"""
from __future__ import annotations

import gzip
import os
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    CorruptFileError,
    EmptyDatasetError,
    InvalidLabelError,
    NiftiFormatError,
    UnsupportedDatatypeError,
)
from .model import DEFAULT_SLICE_SPACING_MM, PMO, LabelMap, Volume3D

HEADER_SIZE = 348
SINGLE_FILE_OFFSET = 352
MAGIC_SINGLE = b"n+1\x00"
MAGIC_PAIR = b"ni1\x00"
GZIP_PREFIX = b"\x1f\x8b"

# datatype code -> (numpy base type, bitpix)
DATATYPES = {
    2: (np.uint8, 8),
    4: (np.int16, 16),
    8: (np.int32, 32),
    16: (np.float32, 32),
    64: (np.float64, 64),
}

NII_SUFFIXES = (".nii.gz", ".nii")


@dataclass(frozen=True)
class NiftiHeader:
    dim: tuple
    datatype: int
    bitpix: int
    pixdim: tuple
    vox_offset: float
    scl_slope: float
    scl_inter: float
    magic: bytes
    endian: str

    @property
    def ndim(self) -> int:
        return self.dim[0]

    @property
    def shape(self) -> tuple:
        return tuple(self.dim[1:1 + self.ndim])


def _load_bytes(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == GZIP_PREFIX:
        try:
            return gzip.decompress(raw)
        except (OSError, EOFError, zlib.error) as exc:
            raise CorruptFileError(f"{path}: damaged gzip stream ({exc})") from exc
    return raw


def parse_header(buf: bytes) -> NiftiHeader:
    """Decode and validate the 348-byte header at the start of ``buf``."""
    if len(buf) < HEADER_SIZE:
        raise CorruptFileError(f"file holds {len(buf)} bytes, shorter than a NIfTI-1 header")
    magic = bytes(buf[344:348])
    if magic == MAGIC_PAIR:
        raise NiftiFormatError("header/image pairs ('ni1') are not supported; use single-file .nii")
    if magic != MAGIC_SINGLE:
        raise NiftiFormatError(f"bad magic {magic!r}, expected {MAGIC_SINGLE!r}")

    # endianness: dim[0] must be a sane rank in the file's byte order
    for endian in "<>":
        dim0 = struct.unpack_from(endian + "h", buf, 40)[0]
        if 1 <= dim0 <= 7:
            break
    else:
        raise NiftiFormatError("dim[0] is not in 1..7 in either byte order")

    sizeof_hdr = struct.unpack_from(endian + "i", buf, 0)[0]
    if sizeof_hdr != HEADER_SIZE:
        raise NiftiFormatError(f"sizeof_hdr is {sizeof_hdr}, expected {HEADER_SIZE}")
    dim = struct.unpack_from(endian + "8h", buf, 40)
    datatype, bitpix = struct.unpack_from(endian + "2h", buf, 70)
    pixdim = struct.unpack_from(endian + "8f", buf, 76)
    vox_offset, scl_slope, scl_inter = struct.unpack_from(endian + "3f", buf, 108)

    if dim[0] not in (2, 3):
        raise NiftiFormatError(f"only 2D/3D images are supported, dim[0]={dim[0]}")
    if any(d < 1 for d in dim[1:1 + dim[0]]):
        raise NiftiFormatError(f"non-positive extent in dim={dim[1:1 + dim[0]]}")
    if datatype not in DATATYPES:
        raise UnsupportedDatatypeError(f"datatype code {datatype} is not supported")
    if bitpix != DATATYPES[datatype][1]:
        raise NiftiFormatError(f"bitpix {bitpix} inconsistent with datatype {datatype}")
    if not np.isfinite(vox_offset) or vox_offset < HEADER_SIZE or vox_offset != int(vox_offset):
        raise NiftiFormatError(f"invalid vox_offset {vox_offset}")
    return NiftiHeader(
        dim=tuple(dim), datatype=datatype, bitpix=bitpix, pixdim=tuple(pixdim),
        vox_offset=float(vox_offset), scl_slope=float(scl_slope), scl_inter=float(scl_inter),
        magic=magic, endian=endian,
    )


def _spacing(hdr: NiftiHeader) -> tuple[float, float, float]:
    out = []
    for axis in (1, 2, 3):
        p = hdr.pixdim[axis]
        if axis == 3 and hdr.ndim == 2 and not (np.isfinite(p) and p != 0):
            out.append(DEFAULT_SLICE_SPACING_MM)
            continue
        if not np.isfinite(p) or p == 0:
            raise NiftiFormatError(f"pixdim[{axis}]={p} is not a usable spacing")
        out.append(abs(float(p)))
    return tuple(out)


def _read_raw(path) -> tuple[NiftiHeader, np.ndarray]:
    buf = _load_bytes(path)
    hdr = parse_header(buf)
    base, _ = DATATYPES[hdr.datatype]
    dtype = np.dtype(base).newbyteorder(hdr.endian)
    n = int(np.prod(hdr.shape, dtype=object))
    offset = int(hdr.vox_offset)
    expected = offset + n * dtype.itemsize
    if len(buf) < expected:
        raise CorruptFileError(f"{path}: payload truncated ({len(buf)} of {expected} bytes)")
    if len(buf) > expected:
        raise CorruptFileError(f"{path}: {len(buf) - expected} bytes beyond the declared payload")
    data = np.frombuffer(buf, dtype=dtype, count=n, offset=offset)
    shape = hdr.shape if hdr.ndim == 3 else hdr.shape + (1,)
    return hdr, data.reshape(shape, order="F")


def read_volume(path) -> Volume3D:
    """Read a scalar NIfTI-1 image, applying ``scl_slope``/``scl_inter``."""
    hdr, data = _read_raw(path)
    data = data.astype(np.float64)
    if np.isfinite(hdr.scl_slope) and hdr.scl_slope != 0:
        inter = hdr.scl_inter if np.isfinite(hdr.scl_inter) else 0.0
        data = data * hdr.scl_slope + inter
    return Volume3D(data, _spacing(hdr))


def read_labelmap(path) -> LabelMap:
    """Read a label map; values are rounded to the nearest code and checked."""
    vol = read_volume(path)
    data = vol.data
    if not np.all(np.isfinite(data)):
        idx = tuple(int(i) for i in np.argwhere(~np.isfinite(data))[0])
        raise InvalidLabelError(f"{path}: non-finite label value at voxel {idx}")
    codes = np.rint(data)
    bad = (codes < 0) | (codes > PMO)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise InvalidLabelError(f"{path}: invalid label code {int(codes[idx])} at voxel {idx}")
    return LabelMap(codes.astype(np.uint8), vol.spacing)


def _build_header(shape, spacing, datatype) -> bytes:
    _, bitpix = DATATYPES[datatype]
    hdr = bytearray(HEADER_SIZE)
    struct.pack_into("<i", hdr, 0, HEADER_SIZE)
    dim = [3, *shape, 1, 1, 1, 1]
    struct.pack_into("<8h", hdr, 40, *dim)
    struct.pack_into("<2h", hdr, 70, datatype, bitpix)
    struct.pack_into("<8f", hdr, 76, 1.0, *spacing, 1.0, 1.0, 1.0, 1.0)
    struct.pack_into("<3f", hdr, 108, float(SINGLE_FILE_OFFSET), 0.0, 0.0)
    hdr[123] = 10  # xyzt_units: mm + s
    struct.pack_into("<h", hdr, 254, 2)  # sform_code: aligned
    sx, sy, sz = spacing
    struct.pack_into("<12f", hdr, 280, sx, 0, 0, 0, 0, sy, 0, 0, 0, 0, sz, 0)
    hdr[344:348] = MAGIC_SINGLE
    return bytes(hdr)


def _write(path, array, spacing, datatype) -> None:
    path = Path(path)
    payload = _build_header(array.shape, spacing, datatype) + b"\x00" * 4
    payload += np.asarray(array, dtype=np.dtype(DATATYPES[datatype][0]).newbyteorder("<")).tobytes(order="F")
    if path.name.endswith(".gz"):
        payload = gzip.compress(payload, mtime=0)
    with open(path, "wb") as fh:
        fh.write(payload)


def write_labelmap(m: LabelMap, path) -> None:
    """Write ``m`` as uint8 single-file NIfTI-1; ``.gz`` paths are gzip-compressed."""
    _write(path, m.labels, m.spacing, 2)


def write_volume(v: Volume3D, path, dtype="float32") -> None:
    code = {"float32": 16, "float64": 64, "int16": 4, "int32": 8, "uint8": 2}[dtype]
    _write(path, v.data, v.spacing, code)


def case_stem(path) -> str | None:
    name = Path(path).name
    for suffix in NII_SUFFIXES:
        if name.endswith(suffix) and len(name) > len(suffix):
            return name[: -len(suffix)]
    return None


@dataclass(frozen=True)
class CasePair:
    case_id: str
    truth_path: Path
    prediction_path: Path | None

    @property
    def missing_prediction(self) -> bool:
        return self.prediction_path is None


def _index(directory) -> dict:
    found = {}
    for entry in sorted(os.scandir(directory), key=lambda e: e.name):
        if not entry.is_file():
            continue
        stem = case_stem(entry.name)
        if stem is not None:
            # prefer the uncompressed file if both exist
            if stem not in found or entry.name.endswith(".nii"):
                found[stem] = Path(entry.path)
    return found


def discover_cases(truth_dir, pred_dir) -> list[CasePair]:
    """Pair ground-truth and prediction files by filename stem.

    Truths without a prediction are returned with ``prediction_path=None``.
    Predictions without a truth are ignored.
    """
    truths = _index(truth_dir)
    if not truths:
        raise EmptyDatasetError(f"no NIfTI files in {truth_dir}")
    preds = _index(pred_dir) if Path(pred_dir).is_dir() else {}
    return [CasePair(stem, truths[stem], preds.get(stem)) for stem in sorted(truths)]
