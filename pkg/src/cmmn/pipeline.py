"""Batch pipeline: fit a reference on source subjects, then map target subjects onto it.

Every subject is reduced to a single channel-averaged PSD, so sources and
targets may have different channel counts. One filter is designed per target
subject and applied identically to all of its channels.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import DataIOError, EmptyInput, GridMismatch, ParseError, ValidationError
from .filterbank import NormalizingFilter, apply_filter, design_filter
from .io import (
    DatasetManifest,
    SubjectEntry,
    _read_json,
    _write_json,
    load_record,
    read_psd,
    save_record,
    write_filter,
    write_manifest,
    write_psd,
    write_report,
)
from .spectral import Psd, SignalRecord, WelchConfig, l1_normalize, same_rate, subject_psd
from .transport import SCHEMES, ReferenceSpectrum, barycenter, hellinger, match_subject, w2_spectral

log = logging.getLogger(__name__)

REFERENCE_FILE = "reference.json"


@dataclass(frozen=True)
class PipelineConfig:
    welch: WelchConfig = field(default_factory=WelchConfig)
    scheme: str = "barycenter"
    eps: float | None = None
    normalize_target: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValidationError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.eps is not None and not self.eps >= 0:
            raise ValidationError(f"eps must be nonnegative, got {self.eps}")


@dataclass(frozen=True, eq=False)
class SourceModel:
    """Channel-averaged PSDs of all source subjects plus the collapsed reference.

    ``reference`` is ``None`` for the subject-to-subject scheme, which keeps
    every source PSD and picks one per target.
    """

    scheme: str
    source_ids: tuple[str, ...]
    source_psds: tuple[Psd, ...]
    welch: WelchConfig
    reference: Psd | None = None

    @property
    def fs_hz(self) -> float:
        return self.source_psds[0].fs_hz

    @property
    def nfft(self) -> int:
        return self.source_psds[0].nfft

    def with_scheme(self, scheme: str) -> SourceModel:
        if scheme == self.scheme:
            return self
        return build_source_model(self.source_ids, self.source_psds, scheme, self.welch)

    def reference_for(self, target: Psd) -> ReferenceSpectrum:
        """Reference spectrum a given target PSD should be mapped onto."""
        n = len(self.source_psds)
        if self.scheme != "subject_to_subject":
            return ReferenceSpectrum(self.scheme, self.reference, n)
        sources = [(sid, p, l1_normalize(p)) for sid, p in zip(self.source_ids, self.source_psds)]
        i, matched = match_subject(l1_normalize(target), sources)
        return ReferenceSpectrum(self.scheme, matched, n, matched_source_id=self.source_ids[i])


def build_source_model(source_ids, source_psds, scheme: str, welch: WelchConfig) -> SourceModel:
    if len(source_psds) == 0:
        raise EmptyInput("no source subjects")
    if scheme not in SCHEMES:
        raise ValidationError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    reference = None if scheme == "subject_to_subject" else barycenter(list(source_psds), scheme)
    return SourceModel(scheme, tuple(source_ids), tuple(source_psds), welch, reference)


def _load(manifest: DatasetManifest, entry: SubjectEntry) -> SignalRecord:
    try:
        return load_record(entry, manifest.root)
    except DataIOError as exc:
        raise type(exc)(f"subject {entry.subject_id!r}: {exc}") from exc


def _subject_psd(record: SignalRecord, welch: WelchConfig) -> Psd:
    try:
        return subject_psd(record, welch)
    except ValidationError as exc:
        raise type(exc)(f"subject {record.subject_id!r}: {exc}") from exc


def fit_reference(manifest: DatasetManifest, config: PipelineConfig) -> SourceModel:
    """Channel-averaged PSD per source subject, collapsed according to ``config.scheme``."""
    if not manifest.subjects:
        raise EmptyInput(f"manifest {manifest.dataset_id!r} lists no source subjects")
    ids, psds = [], []
    for entry in manifest.subjects:
        record = _load(manifest, entry)
        psds.append(_subject_psd(record, config.welch))
        ids.append(entry.subject_id)
        log.info("source %s: %d channels", entry.subject_id, record.n_channels)
    if any(not same_rate(p.fs_hz, psds[0].fs_hz) for p in psds):
        rates = sorted({p.fs_hz for p in psds})
        raise GridMismatch(f"source subjects have different sample rates {rates}; resample them upstream")
    return build_source_model(ids, psds, config.scheme, config.welch)


def save_source_model(model: SourceModel, out_dir) -> Path:
    """Write ``reference.json`` plus one PSD table per source (and the reference)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sources = []
    for sid, p in zip(model.source_ids, model.source_psds):
        name = f"source_{sid}.csv"
        write_psd(p, out / name)
        sources.append({"subject_id": sid, "psd_path": name})
    psd_path = None
    if model.reference is not None:
        psd_path = "reference.csv"
        write_psd(model.reference, out / psd_path)
    doc = {
        "scheme": model.scheme,
        "fs_hz": model.fs_hz,
        "nfft": model.nfft,
        "source_count": len(model.source_psds),
        "matched_source_id": None,
        "welch": asdict(model.welch),
        "psd_path": psd_path,
        "sources": sources,
    }
    path = out / REFERENCE_FILE
    _write_json(doc, path)
    return path


def load_source_model(path) -> SourceModel:
    path = Path(path)
    if path.is_dir():
        path = path / REFERENCE_FILE
    doc = _read_json(path)
    try:
        welch = WelchConfig(**doc["welch"])
        ids = [s["subject_id"] for s in doc["sources"]]
        psds = [read_psd(path.parent / s["psd_path"]) for s in doc["sources"]]
        scheme = doc["scheme"]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{path}: malformed reference file ({exc!r})") from exc
    reference = read_psd(path.parent / doc["psd_path"]) if doc.get("psd_path") else None
    if reference is None and scheme != "subject_to_subject":
        reference = barycenter(psds, scheme)
    model = SourceModel(scheme, tuple(ids), tuple(psds), welch, reference)
    if not psds or model.nfft != int(doc["nfft"]) or not same_rate(model.fs_hz, float(doc["fs_hz"])):
        raise ParseError(f"{path}: stored grid does not match the source PSD tables")
    return model


@dataclass(frozen=True, eq=False)
class TargetResult:
    subject_id: str
    reference: ReferenceSpectrum
    filter: NormalizingFilter
    filtered: SignalRecord
    report: dict


def check_grid(model: SourceModel, fs_hz: float, welch: WelchConfig, subject_id: str) -> None:
    if not same_rate(fs_hz, model.fs_hz) or welch.nfft != model.nfft:
        raise GridMismatch(
            f"subject {subject_id!r} gives a PSD grid (fs={fs_hz} Hz, nfft={welch.nfft}) but the reference "
            f"was fit on (fs={model.fs_hz} Hz, nfft={model.nfft}); resample the target or refit the "
            f"reference PSDs with matching settings"
        )


def map_subject(record: SignalRecord, model: SourceModel, config: PipelineConfig) -> TargetResult:
    """Design and apply the normalizing filter for one target subject."""
    check_grid(model, record.fs_hz, config.welch, record.subject_id)
    target = _subject_psd(record, config.welch)
    ref = model.reference_for(target)
    if config.normalize_target:
        # shape-only mapping: both spectra on the simplex, so total power is kept
        filt = design_filter(l1_normalize(ref.psd), l1_normalize(target), eps=config.eps)
    else:
        filt = design_filter(ref.psd, target, eps=config.eps)
    filtered = apply_filter(filt, record)
    after = _subject_psd(filtered, config.welch)
    ref_n = l1_normalize(ref.psd)
    report = {
        "subject_id": record.subject_id,
        "scheme": ref.scheme,
        "matched_source_id": ref.matched_source_id,
        "w2_before": w2_spectral(target, ref.psd),
        "w2_after": w2_spectral(after, ref.psd),
        "hellinger_before": hellinger(l1_normalize(target), ref_n),
        "hellinger_after": hellinger(l1_normalize(after), ref_n),
    }
    return TargetResult(record.subject_id, ref, filt, filtered, report)


def fit_apply_target(
    manifest: DatasetManifest,
    model: SourceModel,
    config: PipelineConfig,
    out_dir=None,
) -> list[TargetResult]:
    """Map every target subject onto the reference; optionally persist the results.

    With ``out_dir`` set, writes per subject ``<id>.f64`` (filtered signal) and
    ``<id>.filter.json``, plus ``manifest.json`` for the filtered dataset and
    ``report.tsv``, all in manifest order.
    """
    if not manifest.subjects:
        raise EmptyInput(f"manifest {manifest.dataset_id!r} lists no target subjects")
    model = model.with_scheme(config.scheme)
    for entry in manifest.subjects:
        check_grid(model, entry.fs_hz, config.welch, entry.subject_id)

    results = [map_subject(_load(manifest, entry), model, config) for entry in manifest.subjects]

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        entries = []
        for r in results:
            entries.append(save_record(r.filtered, out / f"{r.subject_id}.f64"))
            write_filter(r.filter, out / f"{r.subject_id}.filter.json", r.reference.scheme, r.reference.matched_source_id)
        write_manifest(DatasetManifest(f"{manifest.dataset_id}-normalized", entries, out), out / "manifest.json")
        write_report([r.report for r in results], out / "report.tsv")
    return results
