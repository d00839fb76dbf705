"""File formats: dataset manifests, signals, PSD tables, filters and reports.

Signals
    ``f64le``: raw little-endian float64, channel-major (all samples of
    channel 0, then channel 1, ...), no header; size is ``8 * C * L`` bytes.
    ``csv``: one row per sample, one column per channel, no header.
PSD tables
    CSV with header ``freq_hz,power`` and one row per bin.
Filters
    JSON ``{fs_hz, nfft, eps, scheme, matched_source_id, impulse, magnitude_sum}``.
Reports
    TSV, one row per target subject, written in manifest order.

Floats are written with ``repr`` so text round-trips are exact.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FileMissing, ParseError, SizeMismatch, ValidationError
from .filterbank import NormalizingFilter
from .spectral import Psd, SignalRecord

DTYPES = ("f64le", "csv")
REPORT_COLUMNS = (
    "subject_id",
    "scheme",
    "matched_source_id",
    "w2_before",
    "w2_after",
    "hellinger_before",
    "hellinger_after",
)


def fmt(x: float) -> str:
    return repr(float(x))


def _read_json(path: Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise FileMissing(f"{path}: no such file")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _write_json(obj: dict, path: Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


@dataclass
class SubjectEntry:
    subject_id: str
    fs_hz: float
    channels: int
    samples: int
    data_path: str
    dtype: str = "f64le"

    def to_json(self) -> dict:
        return {
            "subject_id": self.subject_id,
            "fs_hz": self.fs_hz,
            "channels": self.channels,
            "samples": self.samples,
            "data_path": self.data_path,
            "dtype": self.dtype,
        }


@dataclass
class DatasetManifest:
    """A dataset: subjects and where their signals live.

    Relative ``data_path`` values resolve against ``root`` (the manifest's
    directory when read from disk).
    """

    dataset_id: str
    subjects: list[SubjectEntry] = field(default_factory=list)
    root: Path = field(default_factory=Path)

    def __post_init__(self):
        seen = set()
        for s in self.subjects:
            if s.subject_id in seen:
                raise ValidationError(f"duplicate subject_id {s.subject_id!r} in manifest {self.dataset_id!r}")
            seen.add(s.subject_id)

    def path_of(self, entry: SubjectEntry) -> Path:
        p = Path(entry.data_path)
        return p if p.is_absolute() else self.root / p

    def to_json(self) -> dict:
        return {"dataset_id": self.dataset_id, "subjects": [s.to_json() for s in self.subjects]}


def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    raw = _read_json(path)
    try:
        subjects = [
            SubjectEntry(
                subject_id=str(s["subject_id"]),
                fs_hz=float(s["fs_hz"]),
                channels=int(s["channels"]),
                samples=int(s["samples"]),
                data_path=str(s["data_path"]),
                dtype=str(s.get("dtype", "f64le")),
            )
            for s in raw.get("subjects", [])
        ]
        dataset_id = str(raw["dataset_id"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed manifest ({exc!r})") from exc
    for s in subjects:
        if s.dtype not in DTYPES:
            raise ParseError(f"{path}: subject {s.subject_id!r} has unknown dtype {s.dtype!r}")
    return DatasetManifest(dataset_id, subjects, path.parent)


def write_manifest(manifest: DatasetManifest, path) -> None:
    _write_json(manifest.to_json(), path)


def load_record(entry: SubjectEntry, root=".") -> SignalRecord:
    """Read one subject's signal as a ``(C, L)`` record."""
    path = Path(entry.data_path)
    if not path.is_absolute():
        path = Path(root) / path
    if not path.is_file():
        raise FileMissing(f"{path}: no such file (subject {entry.subject_id!r})")
    c, n = entry.channels, entry.samples
    if entry.dtype == "f64le":
        expected = 8 * c * n
        actual = path.stat().st_size
        if actual != expected:
            raise SizeMismatch(
                f"{path}: expected {expected} bytes for {c} channels x {n} samples of f64le, found {actual}"
            )
        data = np.fromfile(path, dtype="<f8").reshape(c, n)
    elif entry.dtype == "csv":
        data = _read_signal_csv(path).T
        if data.shape != (c, n):
            raise SizeMismatch(f"{path}: declared {c} channels x {n} samples, file holds {data.shape[0]} x {data.shape[1]}")
    else:
        raise ParseError(f"unknown dtype {entry.dtype!r}")
    return SignalRecord(entry.subject_id, entry.fs_hz, data)


def _read_signal_csv(path: Path) -> np.ndarray:
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                values = [float(cell) for cell in row]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise ParseError(f"{path}:{lineno}: expected {width} columns, found {len(values)}")
            rows.append(values)
    if not rows:
        raise ParseError(f"{path}: no samples")
    return np.array(rows, dtype=np.float64)


def save_record(record: SignalRecord, path, dtype: str = "f64le") -> SubjectEntry:
    """Write a record and return the manifest entry describing it."""
    path = Path(path)
    if dtype == "f64le":
        path.write_bytes(np.ascontiguousarray(record.data, dtype="<f8").tobytes())
    elif dtype == "csv":
        with open(path, "w", newline="") as fh:
            for row in record.data.T:
                fh.write(",".join(fmt(v) for v in row) + "\n")
    else:
        raise ValidationError(f"unknown dtype {dtype!r}")
    return SubjectEntry(record.subject_id, record.fs_hz, record.n_channels, record.n_samples, path.name, dtype)


def write_psd(psd: Psd, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("freq_hz,power\n")
        for f, p in zip(psd.freqs, psd.values):
            fh.write(f"{fmt(f)},{fmt(p)}\n")


def read_psd(path) -> Psd:
    """Read a ``freq_hz,power`` table; ``fs`` and ``nfft`` are inferred from the grid."""
    path = Path(path)
    if not path.is_file():
        raise FileMissing(f"{path}: no such file")
    freqs, values = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["freq_hz", "power"]:
            raise ParseError(f"{path}:1: expected header 'freq_hz,power'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(f"{path}:{lineno}: expected 2 columns, found {len(row)}")
            try:
                freqs.append(float(row[0]))
                values.append(float(row[1]))
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    if len(values) < 2:
        raise ParseError(f"{path}: a PSD table needs at least 2 bins")
    nfft = 2 * (len(values) - 1)
    fs = 2.0 * freqs[-1]
    expected = np.arange(len(values)) * fs / nfft
    if not np.allclose(freqs, expected, rtol=1e-9, atol=1e-12):
        raise ParseError(f"{path}: frequencies are not a uniform grid from 0 to fs/2")
    try:
        return Psd(np.array(values), fs, nfft)
    except ValidationError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def filter_to_json(f: NormalizingFilter, scheme: str | None = None, matched_source_id: str | None = None) -> dict:
    return {
        "fs_hz": f.fs_hz,
        "nfft": f.n_taps,
        "eps": f.eps,
        "scheme": scheme,
        "matched_source_id": matched_source_id,
        "magnitude_sum": math.fsum(f.magnitude),
        "impulse": [float(v) for v in f.impulse],
    }


def write_filter(f: NormalizingFilter, path, scheme: str | None = None, matched_source_id: str | None = None) -> None:
    _write_json(filter_to_json(f, scheme, matched_source_id), path)


def read_filter(path) -> tuple[NormalizingFilter, dict]:
    """Load a filter and its metadata; the magnitude is recomputed from the impulse.

    The recomputed magnitude must reproduce the stored ``magnitude_sum``.
    """
    path = Path(path)
    raw = _read_json(path)
    try:
        impulse = np.array(raw["impulse"], dtype=np.float64)
        fs = float(raw["fs_hz"])
        nfft = int(raw["nfft"])
        eps = float(raw.get("eps", 0.0))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed filter file ({exc!r})") from exc
    if impulse.size != nfft:
        raise ParseError(f"{path}: impulse has {impulse.size} taps, nfft says {nfft}")
    try:
        f = NormalizingFilter.from_impulse(impulse, fs, eps)
    except ValidationError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if "magnitude_sum" in raw:
        stored = float(raw["magnitude_sum"])
        if abs(math.fsum(f.magnitude) - stored) > 1e-9 * max(1.0, abs(stored)):
            raise ParseError(f"{path}: magnitude checksum mismatch (stored {stored!r}, recomputed {math.fsum(f.magnitude)!r})")
    meta = {k: raw.get(k) for k in ("scheme", "matched_source_id")}
    return f, meta


def format_report(rows: list[dict]) -> str:
    lines = ["\t".join(REPORT_COLUMNS)]
    for row in rows:
        cells = []
        for col in REPORT_COLUMNS:
            v = row.get(col)
            cells.append("" if v is None else fmt(v) if isinstance(v, float) else str(v))
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def write_report(rows: list[dict], path) -> None:
    Path(path).write_text(format_report(rows))


def read_report(path) -> list[dict]:
    path = Path(path)
    if not path.is_file():
        raise FileMissing(f"{path}: no such file")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        rows = []
        for row in reader:
            for col in REPORT_COLUMNS[3:]:
                row[col] = float(row[col])
            row["matched_source_id"] = row["matched_source_id"] or None
            rows.append(row)
    return rows
