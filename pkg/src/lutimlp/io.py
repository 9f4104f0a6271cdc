"""Serialization: LUT binary tables, model text files, result records.

LUT file layout (72-byte header, little-endian):

    magic    4 bytes  "LUTI"
    version  u32      1
    d        u32      nodes per axis
    k        u32      channels
    bounds   6 f64    lo_x lo_y lo_z hi_x hi_y hi_z
    mode     u8       0 = uniform, 1 = irregular-capable
    reserved 7 bytes  zero

followed by d^3 * k float32 payload, node-major (((ix*d)+iy)*d+iz),
channel-minor.  Tables are float64 in memory; the payload is float32,
and write-then-read preserves every float32 bit.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .lattice import Lattice
from .luti import BasisTable
from .tinynet import BatchNorm, Layer, MlpParams

LUT_MAGIC = b"LUTI"
LUT_VERSION = 1
_HEADER = struct.Struct("<4sIII6dB7s")


class LutFormatError(ValueError):
    """Base for malformed LUT files."""


class LutMagicError(LutFormatError):
    pass


class LutVersionError(LutFormatError):
    pass


class LutTruncatedError(LutFormatError):
    """File too short to hold the header."""


class LutSizeError(LutFormatError):
    """Payload length disagrees with the header."""


def write_lut(tbl, path, mode_hint=1):
    """Write a BasisTable; the payload is the float32 cast of the data."""
    lat = tbl.lattice
    header = _HEADER.pack(LUT_MAGIC, LUT_VERSION, lat.d, tbl.k,
                          lat.lo[0], lat.lo[1], lat.lo[2],
                          lat.hi[0], lat.hi[1], lat.hi[2],
                          mode_hint, b"\x00" * 7)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(tbl.data, dtype="<f4").tobytes())
    return path


def read_lut(path):
    """Read a LUT file back into a (float64) BasisTable."""
    with open(path, "rb") as fh:
        raw = fh.read()
    return parse_lut(raw)


def parse_lut(raw):
    """Decode LUT bytes; every malformation raises a LutFormatError."""
    if len(raw) < _HEADER.size:
        raise LutTruncatedError(f"file is {len(raw)} bytes, header needs {_HEADER.size}")
    magic, version, d, k, *bounds, mode_hint, _ = _HEADER.unpack_from(raw)
    if magic != LUT_MAGIC:
        raise LutMagicError(f"bad magic {magic!r}")
    if version != LUT_VERSION:
        raise LutVersionError(f"unsupported version {version}")
    if d < 2 or k < 1:
        raise LutFormatError(f"invalid dimensions d={d} k={k}")
    lo, hi = np.array(bounds[:3]), np.array(bounds[3:])
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(hi > lo)):
        raise LutFormatError(f"invalid bounds lo={lo} hi={hi}")
    expected = d * d * d * k * 4
    got = len(raw) - _HEADER.size
    if got != expected:
        raise LutSizeError(f"payload is {got} bytes, header implies {expected}")
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(d * d * d, k)
    if not np.all(np.isfinite(data)):
        raise LutFormatError("non-finite table entries")
    return BasisTable(Lattice(d, lo, hi), data.astype(float))


def read_lut_mode_hint(path):
    """Just the header's mode byte (0 uniform, 1 irregular-capable)."""
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise LutTruncatedError(f"file is {len(raw)} bytes, header needs {_HEADER.size}")
    magic, version, *_rest, mode_hint, _ = _HEADER.unpack(raw)
    if magic != LUT_MAGIC:
        raise LutMagicError(f"bad magic {magic!r}")
    if version != LUT_VERSION:
        raise LutVersionError(f"unsupported version {version}")
    return mode_hint


MODEL_FORMAT = "lutimlp-model"
BUNDLE_FORMAT = "lutimlp-bundle"
MODEL_VERSION = 1


class ModelFormatError(ValueError):
    pass


def _mlp_to_doc(mlp):
    layers = []
    for layer in mlp.layers:
        entry = {
            "weight": layer.weight.tolist(),
            "bias": layer.bias.tolist(),
            "activation": layer.activation,
            "dropout": layer.dropout,
            "bn": None,
        }
        if layer.bn is not None:
            entry["bn"] = {
                "gamma": layer.bn.gamma.tolist(),
                "beta": layer.bn.beta.tolist(),
                "running_mean": layer.bn.running_mean.tolist(),
                "running_var": layer.bn.running_var.tolist(),
            }
        layers.append(entry)
    return {"layers": layers}


def _mlp_from_doc(doc, where):
    layers = []
    try:
        for entry in doc["layers"]:
            bn = None
            if entry["bn"] is not None:
                b = entry["bn"]
                bn = BatchNorm(np.array(b["gamma"], dtype=float),
                               np.array(b["beta"], dtype=float),
                               np.array(b["running_mean"], dtype=float),
                               np.array(b["running_var"], dtype=float))
            layers.append(Layer(np.array(entry["weight"], dtype=float),
                                np.array(entry["bias"], dtype=float),
                                bn, entry["activation"], entry["dropout"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{where}: malformed layer block: {exc}") from None
    return MlpParams(layers)


def _load_json(path, expect_format):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != expect_format:
        raise ModelFormatError(f"{path}: not a {expect_format} file")
    if doc.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"{path}: unsupported version {doc.get('version')}")
    return doc


def write_model(mlp, path):
    """Versioned JSON; floats keep their shortest round-trip form."""
    doc = {"format": MODEL_FORMAT, "version": MODEL_VERSION}
    doc.update(_mlp_to_doc(mlp))
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
    return path


def read_model(path):
    return _mlp_from_doc(_load_json(path, MODEL_FORMAT), path)


def write_bundle(path, variant_fields, head, embed_mlp=None):
    """Trained-classifier bundle: variant metadata, head, optional MLP.

    Tables travel separately as .lut files (binary format above).
    """
    doc = {"format": BUNDLE_FORMAT, "version": MODEL_VERSION,
           "variant": dict(variant_fields),
           "head": _mlp_to_doc(head),
           "embed_mlp": _mlp_to_doc(embed_mlp) if embed_mlp is not None else None}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
    return path


def read_bundle(path):
    """-> (variant_fields dict, head MlpParams, embed MlpParams | None)."""
    doc = _load_json(path, BUNDLE_FORMAT)
    try:
        variant_fields = dict(doc["variant"])
        head = _mlp_from_doc(doc["head"], path)
        embed = (_mlp_from_doc(doc["embed_mlp"], path)
                 if doc["embed_mlp"] is not None else None)
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"{path}: malformed bundle: {exc}") from None
    return variant_fields, head, embed


def format_record(record):
    """One record as space-separated key=value pairs (repr for floats)."""
    parts = []
    for key, value in record.items():
        if isinstance(value, float):
            # float() unwraps numpy scalars, whose repr is not parseable
            parts.append(f"{key}={float(value)!r}")
        else:
            parts.append(f"{key}={value}")
    return " ".join(parts)


def write_records(records, path):
    """Line-oriented records; one key=value record per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(format_record(record) + "\n")
    return path


def read_records(path):
    """Inverse of write_records; values come back as strings."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = {}
            for part in line.split():
                key, _, value = part.partition("=")
                rec[key] = value
            out.append(rec)
    return out
