"""Ground-truth Gaussian machinery: circulant embeddings, Bures-Wasserstein, synthetic processes.

These routines exist to check the spectral shortcuts elsewhere in the package
against the general matrix formulas, and to generate reproducible
stationary test signals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import circulant

from .errors import (
    DimensionMismatch,
    FrequencyOutOfRange,
    InvalidLength,
    NonPositiveSpectrum,
    NotPSD,
    ValidationError,
)
from .spectral import Psd, SignalRecord

SPECTRUM_ATOL = 1e-9
MAX_ORACLE_DIM = 64


@dataclass(frozen=True, eq=False)
class CirculantGaussian:
    """Zero-mean stationary Gaussian described by a truncated autocorrelation."""

    acf: np.ndarray
    zero_pad: int
    first_column: np.ndarray
    spectrum: np.ndarray

    @property
    def n(self) -> int:
        return self.first_column.size

    @property
    def valid(self) -> bool:
        return bool(np.all(self.spectrum >= -SPECTRUM_ATOL))

    def covariance(self) -> np.ndarray:
        return circulant(self.first_column)


def circulant_from_acf(acf, zero_pad: int = 0, check: bool = True) -> CirculantGaussian:
    """Embed ``acf`` (lags ``0..K-1``) as the first column of a symmetric circulant matrix.

    The column is ``[r0, ..., r[K-1], 0 * zero_pad, r[K-1], ..., r1]`` of length
    ``2K - 1 + zero_pad``; its DFT is the eigenvalue spectrum. With ``check``
    set, a spectrum with entries below ``-1e-9`` raises :class:`NonPositiveSpectrum`.
    """
    r = np.asarray(acf, dtype=np.float64).ravel()
    if r.size < 1:
        raise ValidationError("acf needs at least one lag")
    if int(zero_pad) != zero_pad or zero_pad < 0:
        raise ValidationError(f"zero_pad must be a nonnegative integer, got {zero_pad!r}")
    col = np.concatenate([r, np.zeros(int(zero_pad)), r[:0:-1]])
    full = np.fft.fft(col)
    if np.max(np.abs(full.imag), initial=0.0) > SPECTRUM_ATOL * max(1.0, np.max(np.abs(full))):
        raise ValidationError("circulant spectrum is not real")
    g = CirculantGaussian(r, int(zero_pad), col, full.real)
    if check and not g.valid:
        k = int(np.argmin(g.spectrum))
        raise NonPositiveSpectrum(
            f"circulant embedding is not positive semidefinite: spectrum[{k}] = {g.spectrum[k]:.6g}"
        )
    return g


def bartlett_taper(acf) -> np.ndarray:
    """Multiply an autocorrelation by the triangular window ``1 - k/K``.

    The Fejer kernel is nonnegative, so the tapered sequence of any genuine
    autocorrelation embeds into a positive semidefinite circulant matrix.
    """
    r = np.asarray(acf, dtype=np.float64).ravel()
    return r * (1.0 - np.arange(r.size) / r.size)


def _sqrtm_psd(cov: np.ndarray, name: str) -> np.ndarray:
    evals, evecs = np.linalg.eigh(cov)
    scale = max(float(np.max(np.abs(evals), initial=0.0)), np.finfo(float).tiny)
    if evals.size and evals.min() < -1e-6 * scale:
        raise NotPSD(f"{name} has eigenvalue {evals.min():.3g}, not positive semidefinite")
    return (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.T


def bures_wasserstein(mean_a, cov_a, mean_b, cov_b) -> float:
    """W2 distance between two Gaussians via matrix square roots.

    ``tr((A^1/2 B A^1/2)^1/2)`` is evaluated as the nuclear norm of
    ``A^1/2 B^1/2``, which avoids square-rooting tiny eigenvalues twice.
    """
    ma = np.atleast_1d(np.asarray(mean_a, dtype=np.float64))
    mb = np.atleast_1d(np.asarray(mean_b, dtype=np.float64))
    A = np.atleast_2d(np.asarray(cov_a, dtype=np.float64))
    B = np.atleast_2d(np.asarray(cov_b, dtype=np.float64))
    n = A.shape[0]
    if A.shape != (n, n) or B.shape != (n, n) or ma.shape != (n,) or mb.shape != (n,):
        raise DimensionMismatch(f"shapes {ma.shape}, {A.shape}, {mb.shape}, {B.shape} are not compatible")
    if n > MAX_ORACLE_DIM:
        raise DimensionMismatch(f"oracle limited to N <= {MAX_ORACLE_DIM}, got {n}")
    for name, M in (("cov_a", A), ("cov_b", B)):
        if not np.all(np.isfinite(M)):
            raise ValidationError(f"{name} has non-finite entries")
        if not np.allclose(M, M.T, rtol=0, atol=1e-12 * max(1.0, np.max(np.abs(M)))):
            raise NotPSD(f"{name} is not symmetric")
    sa = _sqrtm_psd((A + A.T) / 2, "cov_a")
    sb = _sqrtm_psd((B + B.T) / 2, "cov_b")
    cross = np.sum(np.linalg.svd(sa @ sb, compute_uv=False))
    bures2 = np.trace(A) + np.trace(B) - 2.0 * cross
    return float(np.sqrt(np.sum((ma - mb) ** 2) + max(bures2, 0.0)))


def _seed(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) & 0xFFFF_FFFF_FFFF_FFFF)


def synth_gaussian_process(
    psd: Psd,
    length: int,
    seed: int = 0,
    subject_id: str = "synth",
    oversample: int = 4,
) -> SignalRecord:
    """Single-channel stationary Gaussian realization with population PSD ``psd``.

    Blocks of ``oversample * nfft`` samples are drawn by spectral synthesis
    (the PSD linearly interpolated onto the finer grid), then cross-faded with
    a half-overlapping sine window whose squares sum to one, so the variance
    stays constant across seams.
    """
    if int(length) != length or length < psd.nfft:
        raise InvalidLength(f"length must be an integer >= nfft={psd.nfft}, got {length!r}")
    length = int(length)
    rng = _seed(seed)
    fs = psd.fs_hz
    n_block = oversample * psd.nfft
    hop = n_block // 2
    fine = np.arange(n_block // 2 + 1) * fs / n_block
    density = np.interp(fine, psd.freqs, psd.values)

    # E|X_k|^2 = n_block * fs * two-sided density; interior bins carry half the one-sided value
    var = n_block * fs * density
    var[1:-1] /= 2.0
    amp = np.sqrt(var)
    window = np.sin(np.pi * (np.arange(n_block) + 0.5) / n_block)

    n_blocks = int(np.ceil((length + n_block) / hop))
    total = np.zeros((n_blocks + 1) * hop)
    for b in range(n_blocks):
        re = rng.standard_normal(amp.size)
        im = rng.standard_normal(amp.size)
        spec = amp * (re + 1j * im) / np.sqrt(2.0)
        spec[0] = amp[0] * re[0]
        spec[-1] = amp[-1] * re[-1]
        block = np.fft.irfft(spec, n=n_block)
        total[b * hop : b * hop + n_block] += window * block
    x = total[hop : hop + length]
    return SignalRecord(subject_id, fs, x[np.newaxis, :])


def inject_line_noise(record: SignalRecord, freq_hz: float, amplitude: float, seed: int = 0) -> SignalRecord:
    """Add a sinusoid of the given amplitude and a random per-channel phase."""
    if not 0 < freq_hz < record.fs_hz / 2:
        raise FrequencyOutOfRange(f"freq_hz must lie in (0, {record.fs_hz / 2}), got {freq_hz}")
    rng = _seed(seed)
    phases = rng.uniform(0.0, 2 * np.pi, size=record.n_channels)
    t = np.arange(record.n_samples) / record.fs_hz
    tone = amplitude * np.sin(2 * np.pi * freq_hz * t[np.newaxis, :] + phases[:, np.newaxis])
    return SignalRecord(record.subject_id, record.fs_hz, record.data + tone)


def synth_record(
    psd: Psd,
    n_channels: int,
    length: int,
    seed: int = 0,
    subject_id: str = "synth",
    line_freq_hz: float | None = None,
    line_amplitude: float = 0.0,
) -> SignalRecord:
    """Multichannel record of independent realizations, optionally with line noise.

    Channel seeds are spawned from ``seed`` so channels are independent yet the
    whole record is reproducible.
    """
    if int(n_channels) != n_channels or n_channels < 1:
        raise ValidationError(f"n_channels must be a positive integer, got {n_channels!r}")
    ss = np.random.SeedSequence(int(seed) & 0xFFFF_FFFF_FFFF_FFFF)
    children = ss.spawn(int(n_channels) + 1)
    rows = [
        synth_gaussian_process(psd, length, int(child.generate_state(1, np.uint64)[0])).data[0]
        for child in children[:-1]
    ]
    rec = SignalRecord(subject_id, psd.fs_hz, np.stack(rows))
    if line_freq_hz is not None and line_amplitude != 0:
        rec = inject_line_noise(rec, line_freq_hz, line_amplitude, int(children[-1].generate_state(1, np.uint64)[0]))
    return rec


def eeg_like_psd(
    fs_hz: float,
    nfft: int,
    scale: float = 1.0,
    highpass_hz: float = 1.0,
    knee_hz: float = 5.0,
    exponent: float = 1.0,
) -> Psd:
    """High-passed ``1/f`` background, ``scale * f^2/(f^2 + hp^2) / (1 + f/knee)^exponent``.

    Vanishes at DC like a high-pass filtered recording.
    """
    freqs = np.arange(nfft // 2 + 1) * fs_hz / nfft
    highpass = freqs**2 / (freqs**2 + highpass_hz**2) if highpass_hz > 0 else 1.0
    return Psd(scale * highpass / (1.0 + freqs / knee_hz) ** exponent, fs_hz, nfft)


def add_spectral_line(psd: Psd, freq_hz: float, power: float, width_hz: float = 1.0) -> Psd:
    """Add a narrowband Gaussian-shaped peak carrying ``power`` (signal units squared).

    A stochastic stand-in for mains interference; see :func:`inject_line_noise`
    for a deterministic sinusoid.
    """
    if not 0 < freq_hz < psd.fs_hz / 2:
        raise FrequencyOutOfRange(f"freq_hz must lie in (0, {psd.fs_hz / 2}), got {freq_hz}")
    if width_hz <= 0 or power < 0:
        raise ValidationError("width_hz must be positive and power nonnegative")
    bump = np.exp(-0.5 * ((psd.freqs - freq_hz) / width_hz) ** 2)
    bump *= power / (np.sum(bump) * psd.df)
    return Psd(psd.values + bump, psd.fs_hz, psd.nfft)
