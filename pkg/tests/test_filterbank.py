import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cmmn.errors import DivisionByZero, MismatchedGrids, SampleRateMismatch, ValidationError
from cmmn.filterbank import (
    NormalizingFilter,
    _overlap_add,
    apply_filter,
    default_eps,
    design_filter,
    frequency_response,
)
from cmmn.spectral import Psd, SignalRecord

from .conftest import FS, random_psd


def unit_pulse(n):
    e = np.zeros(n)
    e[n // 2] = 1.0
    return e


class TestDesign:
    def test_identity(self, rng):
        p = random_psd(rng, nfft=32)
        f = design_filter(p, p)
        np.testing.assert_allclose(f.magnitude, 1.0, rtol=1e-15)
        np.testing.assert_allclose(f.impulse, unit_pulse(32), atol=1e-15)

    def test_flat_ratio(self, rng):
        p = random_psd(rng, nfft=32)
        f = design_filter(p.scaled(4.0), p, eps=0.0)
        np.testing.assert_allclose(f.magnitude, 2.0, rtol=1e-15)
        np.testing.assert_allclose(f.impulse, 2 * unit_pulse(32), atol=1e-14)

    def test_notch(self):
        target = np.ones(17)
        target[6] = 100.0
        f = design_filter(Psd(np.ones(17), FS, 32), Psd(target, FS, 32), eps=0.0)
        expected = np.ones(17)
        expected[6] = 0.1
        np.testing.assert_allclose(f.magnitude, expected, rtol=1e-15)

    def test_formula_with_eps(self, rng):
        s, t = random_psd(rng), random_psd(rng)
        f = design_filter(s, t, eps=0.3)
        np.testing.assert_allclose(f.magnitude, np.sqrt((s.values + 0.3) / (t.values + 0.3)), rtol=1e-15)
        assert f.eps == 0.3

    def test_default_eps(self, rng):
        s, t = random_psd(rng), random_psd(rng)
        assert design_filter(s, t).eps == default_eps(s) == 1e-12 * s.values.max()

    def test_zero_target_bin(self):
        s = Psd([1.0, 1.0, 1.0], FS, 4)
        t = Psd([1.0, 0.0, 1.0], FS, 4)
        with pytest.raises(DivisionByZero):
            design_filter(s, t, eps=0.0)
        # the default eps regularizes the same case
        assert np.isfinite(design_filter(s, t).magnitude).all()

    def test_both_zero_gives_unit_gain(self):
        f = design_filter(Psd([1.0, 0.0, 1.0], FS, 4), Psd([1.0, 0.0, 1.0], FS, 4), eps=0.0)
        np.testing.assert_array_equal(f.magnitude, [1.0, 1.0, 1.0])

    def test_errors(self, rng):
        with pytest.raises(MismatchedGrids):
            design_filter(random_psd(rng, nfft=16), random_psd(rng, nfft=32))
        with pytest.raises(ValidationError):
            design_filter(random_psd(rng), random_psd(rng), eps=-1.0)

    def test_invariants(self, rng):
        f = design_filter(random_psd(rng, nfft=64), random_psd(rng, nfft=64))
        # FFT magnitude of the (centered) impulse reproduces the stored magnitude
        np.testing.assert_allclose(np.abs(np.fft.rfft(f.impulse)), f.magnitude, atol=1e-9)
        # shifted back by F/2 the impulse is even-symmetric
        h0 = np.roll(f.impulse, -f.delay)
        np.testing.assert_allclose(h0, np.roll(h0[::-1], 1), atol=1e-9)
        assert f.delay == 32 and f.n_taps == 64

    def test_from_impulse_roundtrip(self, rng):
        f = design_filter(random_psd(rng, nfft=64), random_psd(rng, nfft=64))
        g = NormalizingFilter.from_impulse(f.impulse, f.fs_hz, f.eps)
        np.testing.assert_allclose(g.magnitude, f.magnitude, atol=1e-12)

    def test_from_impulse_rejects_causal(self):
        h = np.zeros(16)
        h[0] = 1.0  # pure delay of -F/2 relative to center: linear phase, not zero phase
        with pytest.raises(ValidationError):
            NormalizingFilter.from_impulse(h, FS)


class TestApply:
    def test_overlap_add_matches_convolve(self, rng):
        h = rng.standard_normal(32)
        for n in (1, 31, 32, 100, 1000):
            x = rng.standard_normal((2, n))
            out = _overlap_add(x, h)
            for c in range(2):
                np.testing.assert_allclose(out[c], np.convolve(x[c], h), atol=1e-12)

    def test_same_alignment(self, rng):
        f = design_filter(random_psd(rng, nfft=32), random_psd(rng, nfft=32))
        x = rng.standard_normal((3, 500))
        y = apply_filter(f, SignalRecord("s", FS, x)).data
        expected = np.stack([np.convolve(row, f.impulse)[16 : 16 + 500] for row in x])
        np.testing.assert_allclose(y, expected, atol=1e-12)

    def test_identity(self, rng):
        p = random_psd(rng, nfft=64)
        x = rng.standard_normal((4, 3000))
        y = apply_filter(design_filter(p, p), SignalRecord("s", FS, x))
        assert np.max(np.abs(y.data - x)) < 1e-9
        assert y.subject_id == "s" and y.fs_hz == FS

    def test_zero(self, rng):
        f = design_filter(random_psd(rng, nfft=64), random_psd(rng, nfft=64))
        y = apply_filter(f, SignalRecord("s", FS, np.zeros((2, 777))))
        np.testing.assert_array_equal(y.data.shape, (2, 777))
        assert np.max(np.abs(y.data)) < 1e-15

    def test_short_record(self, rng):
        f = design_filter(random_psd(rng, nfft=64), random_psd(rng, nfft=64))
        x = rng.standard_normal((1, 5))
        y = apply_filter(f, SignalRecord("s", FS, x))
        np.testing.assert_allclose(y.data[0], np.convolve(x[0], f.impulse)[32:37], atol=1e-12)

    def test_rate_mismatch(self, rng):
        f = design_filter(random_psd(rng), random_psd(rng))
        with pytest.raises(SampleRateMismatch):
            apply_filter(f, SignalRecord("s", 2 * FS, np.zeros((1, 100))))

    def test_linearity(self, rng):
        f = design_filter(random_psd(rng, nfft=64), random_psd(rng, nfft=64))
        x, z = rng.standard_normal((2, 3, 2000))
        a, b = 1.7, -0.4
        lhs = apply_filter(f, SignalRecord("s", FS, a * x + b * z)).data
        rhs = a * apply_filter(f, SignalRecord("s", FS, x)).data + b * apply_filter(f, SignalRecord("s", FS, z)).data
        assert np.max(np.abs(lhs - rhs)) < 1e-9

    def test_zero_phase(self, rng):
        """A narrowband component comes out aligned with the input (peak lag 0)."""
        n = 4096
        t = np.arange(n) / FS
        x = np.sin(2 * np.pi * 20.0 * t) * np.hanning(n)
        f = design_filter(random_psd(rng, nfft=128, low=0.5, high=2.0), random_psd(rng, nfft=128, low=0.5, high=2.0))
        y = apply_filter(f, SignalRecord("s", FS, x)).data[0]
        lags = np.arange(-20, 21)
        xc = [np.dot(np.roll(x, k), y) for k in lags]
        assert lags[int(np.argmax(xc))] == 0


class TestFrequencyResponse:
    def test_identity(self, rng):
        p = random_psd(rng, nfft=64)
        _, mag = frequency_response(design_filter(p, p), 300)
        np.testing.assert_allclose(mag, 1.0, atol=1e-12)

    def test_flat_ratio(self, rng):
        p = random_psd(rng, nfft=64)
        freqs, mag = frequency_response(design_filter(p.scaled(4.0), p, eps=0.0), 257)
        np.testing.assert_allclose(mag, 2.0, atol=1e-12)
        assert freqs[0] == 0.0 and freqs[-1] == FS / 2

    def test_notch(self):
        target = np.ones(33)
        target[10] = 100.0
        f = design_filter(Psd(np.ones(33), FS, 64), Psd(target, FS, 64), eps=0.0)
        # sample on the DFT grid so the notch bin is hit exactly
        freqs, mag = frequency_response(f, 33)
        assert int(np.argmin(mag)) == 10
        assert mag[10] == pytest.approx(0.1, abs=1e-9)

    def test_interpolates_design_bins(self, rng):
        f = design_filter(random_psd(rng, nfft=64), random_psd(rng, nfft=64))
        _, mag = frequency_response(f, 33)
        np.testing.assert_allclose(mag, f.magnitude, atol=1e-12)

    def test_bad_points(self, rng):
        p = random_psd(rng)
        with pytest.raises(ValidationError):
            frequency_response(design_filter(p, p), 1)


@settings(max_examples=50, deadline=None)
@given(
    s=arrays(np.float64, 9, elements=st.floats(1e-6, 1e6)),
    t=arrays(np.float64, 9, elements=st.floats(1e-6, 1e6)),
)
def test_design_properties(s, t):
    f = design_filter(Psd(s, FS, 16), Psd(t, FS, 16))
    assert np.all(f.magnitude >= 0)
    scale = max(1.0, f.magnitude.max())
    np.testing.assert_allclose(np.abs(np.fft.rfft(f.impulse)), f.magnitude, atol=1e-9 * scale)
    h0 = np.roll(f.impulse, -f.delay)
    np.testing.assert_allclose(h0, np.roll(h0[::-1], 1), atol=1e-9 * scale)
