"""Activation-tensor and metadata file I/O.

The on-disk interchange format for activations is a strict subset of NPY:
version 1.0 (2.0 readable), little-endian float32/float64, C order, rank 2
(``n x d`` vectors) or rank 4 (``n x c x h x w`` feature maps). Everything
outside the subset is a hard error rather than a silent conversion, and
all data is widened to float64 in memory so the inference numerics are
uniform. Dataset metadata travels as a plain UTF-8 CSV.
"""

import ast
import csv
import struct
from dataclasses import dataclass

import numpy as np

from .errors import MetadataError, NpyFormatError

__all__ = ["DatasetMeta", "load_npy", "save_npy", "load_meta"]

_MAGIC = b"\x93NUMPY"
_SUPPORTED_DESCR = {"<f4": np.float32, "<f8": np.float64}
_HEADER_ALIGN = 64
_META_COLUMNS = ("image_id", "class_label", "patient_id")


@dataclass(frozen=True)
class DatasetMeta:
    """Per-row annotations for a tensor: (image_id, class_label, patient_id)."""

    records: tuple

    def __len__(self):
        return len(self.records)

    @property
    def image_ids(self):
        return [r[0] for r in self.records]

    @property
    def class_labels(self):
        return [r[1] for r in self.records]

    @property
    def patient_ids(self):
        return [r[2] for r in self.records]


def _check_tensor(arr, where):
    if arr.ndim not in (2, 4):
        raise NpyFormatError(
            f"{where}: tensor rank must be 2 or 4, got {arr.ndim}"
        )
    if any(extent <= 0 for extent in arr.shape):
        raise NpyFormatError(f"{where}: invalid shape {arr.shape}, extents must be positive")
    if not np.all(np.isfinite(arr)):
        raise NpyFormatError(f"{where}: tensor contains non-finite values")


def load_npy(path):
    """Read an activation tensor from an NPY file.

    Parameters
    ----------
    path : str or Path
        File to read.

    Returns
    -------
    ndarray
        float64, C-order array of rank 2 or 4, values exactly as stored
        (float32 payloads are widened without other change).

    Raises
    ------
    NpyFormatError
        Bad magic, unsupported version/dtype, Fortran order, bad shape,
        truncated payload, or non-finite data.
    """
    with open(path, "rb") as fh:
        buf = fh.read()

    if buf[:6] != _MAGIC:
        raise NpyFormatError(f"{path}: magic mismatch, not an NPY file")
    if len(buf) < 10:
        raise NpyFormatError(f"{path}: truncated header")
    major, minor = buf[6], buf[7]
    if major == 1:
        (header_len,) = struct.unpack_from("<H", buf, 8)
        header_start = 10
    elif major == 2:
        if len(buf) < 12:
            raise NpyFormatError(f"{path}: truncated header")
        (header_len,) = struct.unpack_from("<I", buf, 8)
        header_start = 12
    else:
        raise NpyFormatError(f"{path}: unsupported version {major}.{minor}")

    header_end = header_start + header_len
    if len(buf) < header_end:
        raise NpyFormatError(f"{path}: truncated header")
    header_text = buf[header_start:header_end].decode("latin1")
    try:
        header = ast.literal_eval(header_text.strip())
    except (SyntaxError, ValueError) as exc:
        raise NpyFormatError(f"{path}: unparsable header: {exc}") from exc
    if not isinstance(header, dict):
        raise NpyFormatError(f"{path}: header is not a dict literal")

    descr = header.get("descr")
    if descr not in _SUPPORTED_DESCR:
        raise NpyFormatError(f"{path}: unsupported dtype descr {descr!r}")
    if header.get("fortran_order") is not False:
        raise NpyFormatError(f"{path}: fortran_order is unsupported")
    shape = header.get("shape")
    if not (
        isinstance(shape, tuple)
        and all(isinstance(s, int) for s in shape)
    ):
        raise NpyFormatError(f"{path}: malformed shape {shape!r}")
    if len(shape) not in (2, 4):
        raise NpyFormatError(f"{path}: tensor rank must be 2 or 4, got {len(shape)}")
    if any(s <= 0 for s in shape):
        raise NpyFormatError(f"{path}: invalid shape {shape}, extents must be positive")

    dtype = np.dtype(_SUPPORTED_DESCR[descr]).newbyteorder("<")
    count = int(np.prod(shape))
    payload = buf[header_end:]
    if len(payload) < count * dtype.itemsize:
        raise NpyFormatError(f"{path}: payload shorter than shape requires")
    arr = np.frombuffer(payload, dtype=dtype, count=count).reshape(shape)
    arr = arr.astype(np.float64)  # always copies: drops the read-only buffer view
    _check_tensor(arr, str(path))
    return arr


def save_npy(tensor, path, dtype="float64"):
    """Write an activation tensor as NPY v1.0.

    The header block (magic, version, length field, padded header text) is
    sized to a multiple of 64 bytes and ends with a newline, matching the
    format written by standard tools; ``load_npy(save_npy(t))`` is
    bit-identical for float64 and value-rounded for float32.

    Parameters
    ----------
    tensor : array_like
        Rank-2 or rank-4 finite real array.
    path : str or Path
        Destination file.
    dtype : {"float64", "float32"}
        On-disk scalar type.
    """
    arr = np.ascontiguousarray(np.asarray(tensor, dtype=np.float64))
    _check_tensor(arr, "save_npy")
    if dtype == "float64":
        descr, out = "<f8", arr
    elif dtype == "float32":
        descr, out = "<f4", arr.astype(np.float32)
    else:
        raise NpyFormatError(f"save_npy: unsupported dtype {dtype!r}")

    shape_text = "(" + ", ".join(str(s) for s in arr.shape) + ")"
    header = f"{{'descr': '{descr}', 'fortran_order': False, 'shape': {shape_text}, }}"
    # magic(6) + version(2) + length field(2) + text + padding + '\n', total % 64 == 0
    unpadded = 6 + 2 + 2 + len(header) + 1
    pad = (-unpadded) % _HEADER_ALIGN
    header_block = header + " " * pad + "\n"

    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(bytes([1, 0]))
        fh.write(struct.pack("<H", len(header_block)))
        fh.write(header_block.encode("latin1"))
        fh.write(out.astype(out.dtype.newbyteorder("<"), copy=False).tobytes(order="C"))


def load_meta(path):
    """Read dataset metadata from a CSV with header image_id,class_label,patient_id.

    Identifiers are restricted to [A-Za-z0-9_.-]; no quoting support.
    patient_id may be empty (stored as None). Row order is preserved.

    Raises
    ------
    MetadataError
        Empty file, wrong header, short rows, or duplicated image ids.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [row for row in rows if row]
    if not rows:
        raise MetadataError(f"{path}: empty metadata file")
    header = tuple(cell.strip() for cell in rows[0])
    if header != _META_COLUMNS:
        missing = [c for c in _META_COLUMNS if c not in header]
        raise MetadataError(
            f"{path}: expected header {','.join(_META_COLUMNS)}"
            + (f", missing column(s) {missing}" if missing else f", got {','.join(header)}")
        )

    records = []
    seen = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) < 2 or len(row) > 3:
            raise MetadataError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
        image_id = row[0].strip()
        class_label = row[1].strip()
        patient = row[2].strip() if len(row) == 3 else ""
        if not image_id:
            raise MetadataError(f"{path}:{lineno}: empty image_id")
        if image_id in seen:
            raise MetadataError(f"{path}:{lineno}: duplicate image_id {image_id!r}")
        seen.add(image_id)
        records.append((image_id, class_label, patient if patient else None))
    if not records:
        raise MetadataError(f"{path}: no data rows")
    return DatasetMeta(records=tuple(records))
