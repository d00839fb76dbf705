"""Zero-phase normalizing filters: design from two PSDs and application to records."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivisionByZero, NonFinite, SampleRateMismatch, ValidationError
from .spectral import Psd, SignalRecord, check_same_grid, same_rate

# default regularizer, relative to max(source_ref)
DEFAULT_EPS_SCALE = 1e-12


@dataclass(frozen=True, eq=False)
class NormalizingFilter:
    """Centered, even-symmetric FIR filter with a real nonnegative response.

    ``impulse`` has length ``F`` (the PSD ``nfft``) and is centered on sample
    ``F // 2``; ``magnitude`` holds ``|H|`` on the ``F // 2 + 1`` nonnegative
    frequency bins.
    """

    impulse: np.ndarray
    magnitude: np.ndarray
    fs_hz: float
    eps: float = 0.0

    def __post_init__(self):
        for name in ("impulse", "magnitude"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.impulse.ndim != 1 or self.impulse.size < 2 or self.impulse.size % 2:
            raise ValidationError(f"impulse must be 1-D with even length, got shape {self.impulse.shape}")
        if self.magnitude.shape != (self.impulse.size // 2 + 1,):
            raise ValidationError("magnitude length must be len(impulse) // 2 + 1")
        if not (np.all(np.isfinite(self.impulse)) and np.all(np.isfinite(self.magnitude))):
            raise NonFinite("filter contains non-finite values")
        if np.any(self.magnitude < 0):
            raise ValidationError("magnitude must be nonnegative")

    @property
    def n_taps(self) -> int:
        return self.impulse.size

    @property
    def delay(self) -> int:
        """Group delay, in samples, of the centered impulse."""
        return self.impulse.size // 2

    @property
    def freqs(self) -> np.ndarray:
        return np.arange(self.magnitude.size) * self.fs_hz / self.n_taps

    @classmethod
    def from_magnitude(cls, magnitude, fs_hz: float, eps: float = 0.0) -> NormalizingFilter:
        magnitude = np.asarray(magnitude, dtype=np.float64)
        n_taps = 2 * (magnitude.size - 1)
        impulse = np.roll(np.fft.irfft(magnitude, n=n_taps), n_taps // 2)
        return cls(impulse, magnitude, fs_hz, eps)

    @classmethod
    def from_impulse(cls, impulse, fs_hz: float, eps: float = 0.0) -> NormalizingFilter:
        """Rebuild a filter from its impulse, recomputing the magnitude.

        Raises :class:`ValidationError` if the impulse is not a centered
        zero-phase response (real, nonnegative transfer function).
        """
        impulse = np.asarray(impulse, dtype=np.float64)
        if impulse.ndim != 1 or impulse.size < 2 or impulse.size % 2:
            raise ValidationError(f"impulse must be 1-D with even length, got shape {impulse.shape}")
        response = np.fft.rfft(np.roll(impulse, -(impulse.size // 2)))
        scale = max(1.0, float(np.max(np.abs(response))))
        if np.max(np.abs(response.imag)) > 1e-9 * scale or np.min(response.real) < -1e-9 * scale:
            raise ValidationError("impulse is not a centered zero-phase filter")
        return cls(impulse, np.clip(response.real, 0.0, None), fs_hz, eps)


def default_eps(source_ref: Psd) -> float:
    return DEFAULT_EPS_SCALE * float(np.max(source_ref.values))


def design_filter(source_ref: Psd, target: Psd, eps: float | None = None) -> NormalizingFilter:
    """Filter whose squared magnitude maps ``target`` onto ``source_ref``.

    ``|H| = sqrt((source_ref + eps) / (target + eps))`` per bin. With ``eps=0``
    bins where both spectra vanish get unit gain, and a zero target bin under a
    nonzero source bin raises :class:`DivisionByZero`.
    """
    check_same_grid([source_ref, target])
    if eps is None:
        eps = default_eps(source_ref)
    if not (np.isfinite(eps) and eps >= 0):
        raise ValidationError(f"eps must be finite and nonnegative, got {eps}")
    num = source_ref.values + eps
    den = target.values + eps
    if eps == 0:
        bad = (den == 0) & (num > 0)
        if np.any(bad):
            k = int(np.flatnonzero(bad)[0])
            raise DivisionByZero(
                f"target PSD is zero at bin {k} ({k * target.df:g} Hz) where the reference is not; use eps > 0"
            )
    with np.errstate(divide="ignore", invalid="ignore"):
        magnitude = np.where(den == 0, 1.0, np.sqrt(num / np.where(den == 0, 1.0, den)))
    if not np.all(np.isfinite(magnitude)):
        raise NonFinite("filter magnitude is not finite; increase eps")
    return NormalizingFilter.from_magnitude(magnitude, source_ref.fs_hz, float(eps))


def _overlap_add(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Full linear convolution of each row of ``x`` with ``h`` by overlap-add."""
    n_ch, n = x.shape
    m = h.size
    n_fft = 1 << (2 * m - 1).bit_length()
    step = n_fft - m + 1
    H = np.fft.rfft(h, n=n_fft)
    out = np.zeros((n_ch, n + n_fft))
    for start in range(0, n, step):
        block = x[:, start : start + step]
        out[:, start : start + n_fft] += np.fft.irfft(np.fft.rfft(block, n=n_fft, axis=1) * H, n=n_fft, axis=1)
    return out[:, : n + m - 1]


def apply_filter(f: NormalizingFilter, record: SignalRecord) -> SignalRecord:
    """Convolve every channel with the same impulse, compensating the group delay.

    Output has the input length ("same" alignment); edges are zero-padded.
    """
    if not same_rate(record.fs_hz, f.fs_hz):
        raise SampleRateMismatch(f"record is sampled at {record.fs_hz} Hz, filter was designed for {f.fs_hz} Hz")
    full = _overlap_add(record.data, f.impulse)
    y = full[:, f.delay : f.delay + record.n_samples]
    return SignalRecord(record.subject_id, record.fs_hz, y)


def frequency_response(f: NormalizingFilter, n_points: int = 512) -> tuple[np.ndarray, np.ndarray]:
    """``|H|`` of the FIR filter on ``n_points`` uniform frequencies in ``[0, fs/2]``."""
    if int(n_points) != n_points or n_points < 2:
        raise ValidationError(f"n_points must be an integer >= 2, got {n_points!r}")
    freqs = np.linspace(0.0, f.fs_hz / 2, int(n_points))
    n = np.arange(f.n_taps) - f.delay
    omega = 2 * np.pi * freqs / f.fs_hz
    response = np.exp(-1j * np.outer(omega, n)) @ f.impulse
    return freqs, np.abs(response)
