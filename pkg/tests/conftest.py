import json
from pathlib import Path

import numpy as np
import pytest

from cmmn.io import save_record
from cmmn.spectral import Psd

FS = 256.0

_CRITERIA: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record an acceptance criterion's outcome for the terminal summary."""

    def record(name: str, passed: bool, detail: str = "") -> bool:
        _CRITERIA[name] = (bool(passed), detail)
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA, key=lambda s: int(s.split()[0])):
        passed, detail = _CRITERIA[name]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_psd(rng, nfft=16, fs=FS, low=0.1, high=2.0):
    return Psd(rng.uniform(low, high, nfft // 2 + 1), fs, nfft)


def write_dataset(directory: Path, dataset_id: str, records, dtype="f64le") -> Path:
    """Save records next to a manifest; return the manifest path."""
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for rec in records:
        suffix = "f64" if dtype == "f64le" else "csv"
        entries.append(save_record(rec, directory / f"{rec.subject_id}.{suffix}", dtype).to_json())
    path = directory / "manifest.json"
    path.write_text(json.dumps({"dataset_id": dataset_id, "subjects": entries}))
    return path
