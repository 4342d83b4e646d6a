"""Reproducible outputs: config headers with a content hash, CSV/JSON writers
and a spectral-coefficient container for fields.

Nothing written here carries a timestamp, so identical configs give
byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import zipfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .spectral import FrequencyLattice, ScalarField, VelocityField, make_lattice

__all__ = [
    "canonical_json",
    "config_digest",
    "config_header",
    "write_text",
    "write_json",
    "rows_to_csv",
    "save_field",
    "load_field",
    "FIELD_FORMAT",
]

FIELD_FORMAT = "besovns-field-v1"
_FIXED_DATE = (1980, 1, 1, 0, 0, 0)


def _plain(value):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return value


def canonical_json(payload, indent: int | None = None) -> str:
    return json.dumps(_plain(payload), sort_keys=True, indent=indent, allow_nan=False)


def config_digest(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def config_header(config: dict) -> str:
    """Two comment lines: the config as canonical JSON and its sha256."""
    return f"# config: {canonical_json(config)}\n# config_sha256: {config_digest(config)}\n"


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def write_json(path, payload: dict, config: dict) -> Path:
    body = {"config": config, "config_sha256": config_digest(config), **payload}
    return write_text(path, canonical_json(body, indent=2) + "\n")


def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    if value is None:
        return ""
    return str(value)


def rows_to_csv(rows: Iterable[dict], columns: Sequence[str] | None = None,
                config: dict | None = None) -> str:
    rows = list(rows)
    buf = io.StringIO()
    if config is not None:
        buf.write(config_header(config))
    if columns is None:
        columns = list(rows[0]) if rows else []
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


# -- field container ---------------------------------------------------------------

def _npy_bytes(array: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.lib.format.write_array(buf, np.ascontiguousarray(array), allow_pickle=False)
    return buf.getvalue()


def save_field(path, f: ScalarField | VelocityField) -> Path:
    """Zip archive holding ``header.json`` (format, kind, shape, lengths) and
    ``coefficients.npy`` (the half-spectrum, complex128)."""
    kind = "vector" if isinstance(f, VelocityField) else "scalar"
    header = {
        "format": FIELD_FORMAT,
        "kind": kind,
        "shape": list(f.lattice.shape),
        "lengths": [float(x) for x in f.lattice.lengths],
        "layout": "rfftn over the last three axes, Nyquist planes zero",
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        for name, data in (("header.json", canonical_json(header, indent=2).encode()),
                           ("coefficients.npy", _npy_bytes(f.spectral.astype(complex)))):
            info = zipfile.ZipInfo(name, date_time=_FIXED_DATE)
            info.compress_type = zipfile.ZIP_DEFLATED
            zf.writestr(info, data)
    return path


def load_field(path) -> ScalarField | VelocityField:
    try:
        with zipfile.ZipFile(path) as zf:
            header = json.loads(zf.read("header.json"))
            coeffs = np.lib.format.read_array(io.BytesIO(zf.read("coefficients.npy")),
                                              allow_pickle=False)
    except (zipfile.BadZipFile, KeyError) as exc:
        raise ValueError(f"{path}: not a field container ({exc})") from exc
    if header.get("format") != FIELD_FORMAT:
        raise ValueError(f"{path}: unknown field format {header.get('format')!r}")
    lattice: FrequencyLattice = make_lattice(tuple(header["shape"]), tuple(header["lengths"]))
    lead = (3,) if header["kind"] == "vector" else ()
    expected = lead + lattice.spectral_shape
    if coeffs.shape != expected:
        raise ValueError(f"{path}: coefficient array has shape {coeffs.shape}, expected {expected}")
    cls = VelocityField if header["kind"] == "vector" else ScalarField
    return cls.from_spectral(lattice, coeffs)
