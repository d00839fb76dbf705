import json

import numpy as np
import pytest

from cmmn import io
from cmmn.errors import FileMissing, ParseError, SizeMismatch, ValidationError
from cmmn.filterbank import design_filter
from cmmn.spectral import Psd, SignalRecord

from .conftest import FS, random_psd


def entry(path, channels, samples, dtype="f64le", sid="s"):
    return io.SubjectEntry(sid, FS, channels, samples, str(path), dtype)


class TestSignals:
    def test_zeros(self, tmp_path):
        (tmp_path / "z.f64").write_bytes(np.zeros(4, "<f8").tobytes())
        rec = io.load_record(entry("z.f64", 1, 4), tmp_path)
        np.testing.assert_array_equal(rec.data, [[0.0, 0.0, 0.0, 0.0]])

    def test_channel_major_layout(self, tmp_path):
        (tmp_path / "x.f64").write_bytes(np.arange(6, dtype="<f8").tobytes())
        rec = io.load_record(entry("x.f64", 2, 3), tmp_path)
        np.testing.assert_array_equal(rec.data, [[0, 1, 2], [3, 4, 5]])

    def test_csv_columns_are_channels(self, tmp_path):
        (tmp_path / "x.csv").write_text("0.0,1.0\n2.0,3.0\n")
        rec = io.load_record(entry("x.csv", 2, 2, "csv"), tmp_path)
        np.testing.assert_array_equal(rec.data, [[0.0, 2.0], [1.0, 3.0]])

    def test_truncated(self, tmp_path):
        (tmp_path / "t.f64").write_bytes(np.zeros(7, "<f8").tobytes())
        with pytest.raises(SizeMismatch, match="expected 64 bytes.*found 56"):
            io.load_record(entry("t.f64", 2, 4), tmp_path)

    def test_missing(self, tmp_path):
        with pytest.raises(FileMissing):
            io.load_record(entry("nope.f64", 1, 4), tmp_path)

    def test_csv_errors(self, tmp_path):
        (tmp_path / "bad.csv").write_text("1.0,2.0\n3.0,abc\n")
        with pytest.raises(ParseError, match=":2:"):
            io.load_record(entry("bad.csv", 2, 2, "csv"), tmp_path)
        (tmp_path / "ragged.csv").write_text("1.0,2.0\n3.0\n")
        with pytest.raises(ParseError, match="expected 2 columns"):
            io.load_record(entry("ragged.csv", 2, 2, "csv"), tmp_path)
        (tmp_path / "shape.csv").write_text("1.0,2.0\n3.0,4.0\n")
        with pytest.raises(SizeMismatch):
            io.load_record(entry("shape.csv", 2, 3, "csv"), tmp_path)

    @pytest.mark.parametrize("dtype", ["f64le", "csv"])
    def test_round_trip_exact(self, tmp_path, rng, dtype):
        rec = SignalRecord("r", FS, rng.standard_normal((3, 50)) * 1e3)
        e = io.save_record(rec, tmp_path / f"r.{dtype}", dtype)
        assert (e.channels, e.samples, e.dtype) == (3, 50, dtype)
        back = io.load_record(e, tmp_path)
        np.testing.assert_array_equal(back.data, rec.data)
        assert back.fs_hz == FS and back.subject_id == "r"


class TestManifest:
    def test_round_trip(self, tmp_path):
        m = io.DatasetManifest("d", [entry("a.f64", 2, 10, sid="a"), entry("b.csv", 1, 5, "csv", sid="b")])
        io.write_manifest(m, tmp_path / "m.json")
        back = io.read_manifest(tmp_path / "m.json")
        assert back.to_json() == m.to_json()
        assert back.root == tmp_path
        assert back.path_of(back.subjects[0]) == tmp_path / "a.f64"

    def test_duplicate_ids(self):
        with pytest.raises(ValidationError):
            io.DatasetManifest("d", [entry("a", 1, 1, sid="x"), entry("b", 1, 1, sid="x")])

    def test_malformed(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text("{not json")
        with pytest.raises(ParseError, match="line 1"):
            io.read_manifest(p)
        p.write_text(json.dumps({"dataset_id": "d", "subjects": [{"subject_id": "a"}]}))
        with pytest.raises(ParseError):
            io.read_manifest(p)
        p.write_text(json.dumps({"dataset_id": "d", "subjects": [
            {"subject_id": "a", "fs_hz": 1, "channels": 1, "samples": 1, "data_path": "a", "dtype": "int16"}]}))
        with pytest.raises(ParseError, match="dtype"):
            io.read_manifest(p)
        with pytest.raises(FileMissing):
            io.read_manifest(tmp_path / "absent.json")


class TestPsdTable:
    def test_round_trip_exact(self, tmp_path, rng):
        p = random_psd(rng, nfft=64)
        io.write_psd(p, tmp_path / "p.csv")
        back = io.read_psd(tmp_path / "p.csv")
        np.testing.assert_array_equal(back.values, p.values)
        assert back.nfft == 64 and back.same_grid(p)

    def test_format(self, tmp_path):
        io.write_psd(Psd([1.0, 0.5, 0.25], 4.0, 4), tmp_path / "p.csv")
        assert (tmp_path / "p.csv").read_bytes() == b"freq_hz,power\n0.0,1.0\n1.0,0.5\n2.0,0.25\n"

    def test_bad_tables(self, tmp_path):
        p = tmp_path / "p.csv"
        p.write_text("f,p\n0,1\n1,1\n")
        with pytest.raises(ParseError, match="header"):
            io.read_psd(p)
        p.write_text("freq_hz,power\n0,1\n1,x\n")
        with pytest.raises(ParseError, match=":3:"):
            io.read_psd(p)
        p.write_text("freq_hz,power\n0,1\n0.7,1\n2,1\n")
        with pytest.raises(ParseError, match="uniform"):
            io.read_psd(p)
        p.write_text("freq_hz,power\n0,1\n1,-1\n")
        with pytest.raises(ParseError):
            io.read_psd(p)
        with pytest.raises(FileMissing):
            io.read_psd(tmp_path / "none.csv")


class TestFilterFile:
    def test_round_trip(self, tmp_path, rng):
        f = design_filter(random_psd(rng, nfft=64), random_psd(rng, nfft=64))
        io.write_filter(f, tmp_path / "f.json", "subject_to_subject", "s3")
        back, meta = io.read_filter(tmp_path / "f.json")
        np.testing.assert_array_equal(back.impulse, f.impulse)
        np.testing.assert_allclose(back.magnitude, f.magnitude, atol=1e-12)
        assert meta == {"scheme": "subject_to_subject", "matched_source_id": "s3"}
        assert back.eps == f.eps and back.fs_hz == f.fs_hz

    def test_checksum(self, tmp_path, rng):
        f = design_filter(random_psd(rng, nfft=32), random_psd(rng, nfft=32))
        doc = io.filter_to_json(f)
        doc["magnitude_sum"] += 1e-3
        (tmp_path / "f.json").write_text(json.dumps(doc))
        with pytest.raises(ParseError, match="checksum"):
            io.read_filter(tmp_path / "f.json")

    def test_tampered_impulse(self, tmp_path, rng):
        f = design_filter(random_psd(rng, nfft=32), random_psd(rng, nfft=32))
        doc = io.filter_to_json(f)
        doc["impulse"][3] += 0.5  # breaks the even symmetry
        (tmp_path / "f.json").write_text(json.dumps(doc))
        with pytest.raises(ParseError):
            io.read_filter(tmp_path / "f.json")

    def test_length_mismatch(self, tmp_path, rng):
        doc = io.filter_to_json(design_filter(random_psd(rng, nfft=32), random_psd(rng, nfft=32)))
        doc["nfft"] = 64
        (tmp_path / "f.json").write_text(json.dumps(doc))
        with pytest.raises(ParseError, match="taps"):
            io.read_filter(tmp_path / "f.json")


class TestReport:
    def test_round_trip(self, tmp_path):
        rows = [
            {"subject_id": "a", "scheme": "barycenter", "matched_source_id": None,
             "w2_before": 0.1, "w2_after": 1e-17, "hellinger_before": 0.3, "hellinger_after": 2.5e-3},
            {"subject_id": "b", "scheme": "subject_to_subject", "matched_source_id": "s1",
             "w2_before": 1 / 3, "w2_after": 0.0, "hellinger_before": 0.0, "hellinger_after": 0.0},
        ]
        io.write_report(rows, tmp_path / "r.tsv")
        text = (tmp_path / "r.tsv").read_text()
        assert text.splitlines()[0] == "\t".join(io.REPORT_COLUMNS)
        assert io.read_report(tmp_path / "r.tsv") == rows
