"""Welch power spectral densities, channel averaging and l1 normalization."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import signal

from .errors import (
    EmptyInput,
    InvalidConfig,
    MismatchedGrids,
    SignalTooShort,
    ValidationError,
    ZeroSpectrum,
)

WINDOWS = ("hann", "bartlett", "rectangular")
_SCIPY_WINDOW = {"hann": "hann", "bartlett": "bartlett", "rectangular": "boxcar"}

# tolerance on sum(values) for a NormalizedPsd
SIMPLEX_ATOL = 1e-9


@dataclass(frozen=True, eq=False)
class SignalRecord:
    """Multichannel, uniformly sampled recording.

    ``data`` is stored channel-major with shape ``(C, L)``.
    """

    subject_id: str
    fs_hz: float
    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim == 1:
            data = data[np.newaxis, :]
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValidationError(
                f"record {self.subject_id!r}: expected a non-empty (channels, samples) matrix, "
                f"got shape {data.shape}"
            )
        if not np.all(np.isfinite(data)):
            raise ValidationError(f"record {self.subject_id!r}: non-finite samples")
        if not (np.isfinite(self.fs_hz) and self.fs_hz > 0):
            raise ValidationError(f"record {self.subject_id!r}: fs_hz must be positive, got {self.fs_hz}")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "fs_hz", float(self.fs_hz))

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class WelchConfig:
    """Welch estimator settings.

    ``noverlap`` defaults to half a segment and ``nfft`` to ``nperseg``.
    """

    nperseg: int = 512
    noverlap: int | None = None
    nfft: int | None = None
    window: str = "hann"
    detrend: bool = True

    def __post_init__(self):
        if isinstance(self.nperseg, bool) or int(self.nperseg) != self.nperseg or self.nperseg < 1:
            raise InvalidConfig(f"nperseg must be a positive integer, got {self.nperseg!r}")
        object.__setattr__(self, "nperseg", int(self.nperseg))
        if self.noverlap is None:
            object.__setattr__(self, "noverlap", self.nperseg // 2)
        if self.nfft is None:
            object.__setattr__(self, "nfft", self.nperseg)
        if int(self.noverlap) != self.noverlap or not 0 <= self.noverlap < self.nperseg:
            raise InvalidConfig(f"noverlap must lie in [0, nperseg={self.nperseg}), got {self.noverlap!r}")
        if int(self.nfft) != self.nfft or self.nfft < self.nperseg:
            raise InvalidConfig(f"nfft must be an integer >= nperseg={self.nperseg}, got {self.nfft!r}")
        if self.nfft % 2:
            raise InvalidConfig(f"nfft must be even, got {self.nfft}")
        if self.window not in WINDOWS:
            raise InvalidConfig(f"window must be one of {WINDOWS}, got {self.window!r}")
        object.__setattr__(self, "noverlap", int(self.noverlap))
        object.__setattr__(self, "nfft", int(self.nfft))

    @property
    def n_bins(self) -> int:
        return self.nfft // 2 + 1

    @property
    def hop(self) -> int:
        return self.nperseg - self.noverlap

    def taper(self) -> np.ndarray:
        return signal.get_window(_SCIPY_WINDOW[self.window], self.nperseg, fftbins=True).astype(np.float64)


@dataclass(frozen=True, eq=False)
class Psd:
    """One-sided power spectral density on ``nfft // 2 + 1`` bins."""

    values: np.ndarray
    fs_hz: float
    nfft: int

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValidationError(f"PSD values must be 1-D, got shape {values.shape}")
        if int(self.nfft) != self.nfft or self.nfft < 2 or self.nfft % 2:
            raise ValidationError(f"nfft must be a positive even integer, got {self.nfft!r}")
        if values.size != self.nfft // 2 + 1:
            raise ValidationError(f"expected {self.nfft // 2 + 1} bins for nfft={self.nfft}, got {values.size}")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValidationError("PSD values must be finite and nonnegative")
        if not (np.isfinite(self.fs_hz) and self.fs_hz > 0):
            raise ValidationError(f"fs_hz must be positive, got {self.fs_hz}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "fs_hz", float(self.fs_hz))
        object.__setattr__(self, "nfft", int(self.nfft))

    @property
    def n_bins(self) -> int:
        return self.values.size

    @property
    def df(self) -> float:
        return self.fs_hz / self.nfft

    @property
    def freqs(self) -> np.ndarray:
        return np.arange(self.n_bins) * self.df

    def total_power(self) -> float:
        """Integrated power, ``sum(values) * df``."""
        return float(np.sum(self.values) * self.df)

    def same_grid(self, other: Psd) -> bool:
        return self.nfft == other.nfft and same_rate(self.fs_hz, other.fs_hz)

    def scaled(self, alpha: float) -> Psd:
        return Psd(alpha * self.values, self.fs_hz, self.nfft)

    def bin_of(self, freq_hz: float) -> int:
        """Index of the bin nearest ``freq_hz``."""
        return int(np.clip(np.rint(freq_hz / self.df), 0, self.n_bins - 1))


@dataclass(frozen=True, eq=False)
class NormalizedPsd(Psd):
    """A PSD on the probability simplex (values sum to one)."""

    def __post_init__(self):
        super().__post_init__()
        total = float(np.sum(self.values))
        if abs(total - 1.0) > SIMPLEX_ATOL:
            raise ValidationError(f"normalized PSD must sum to 1, sums to {total!r}")


def same_rate(a: float, b: float) -> bool:
    """Sample rates equal up to text round-off."""
    return math.isclose(a, b, rel_tol=1e-12)


def check_same_grid(psds: Sequence[Psd]) -> None:
    """Raise :class:`MismatchedGrids` unless all PSDs share ``fs_hz`` and ``nfft``."""
    first = psds[0]
    for i, p in enumerate(psds[1:], start=1):
        if not first.same_grid(p):
            raise MismatchedGrids(
                f"PSD {i} is on grid (fs={p.fs_hz}, nfft={p.nfft}), "
                f"expected (fs={first.fs_hz}, nfft={first.nfft})"
            )


def welch_psd(channel, fs_hz: float, cfg: WelchConfig | None = None) -> Psd:
    """Welch estimate of a single channel's one-sided, density-scaled PSD.

    Segments that would run past the end of the signal are dropped.
    """
    cfg = cfg or WelchConfig()
    x = np.asarray(channel, dtype=np.float64)
    if x.ndim != 1:
        raise ValidationError(f"expected a 1-D channel, got shape {x.shape}")
    if x.size < cfg.nperseg:
        raise SignalTooShort(f"signal has {x.size} samples, fewer than nperseg={cfg.nperseg}")
    if not (np.isfinite(fs_hz) and fs_hz > 0):
        raise InvalidConfig(f"fs_hz must be positive, got {fs_hz}")

    _, power = signal.welch(
        x,
        fs=fs_hz,
        window=cfg.taper(),
        nperseg=cfg.nperseg,
        noverlap=cfg.noverlap,
        nfft=cfg.nfft,
        detrend="constant" if cfg.detrend else False,
        return_onesided=True,
        scaling="density",
        average="mean",
    )
    return Psd(power, fs_hz, cfg.nfft)


def psd_matrix(record: SignalRecord, cfg: WelchConfig | None = None) -> list[Psd]:
    """Per-channel Welch PSDs of ``record``, in channel order."""
    out = []
    for c, channel in enumerate(record.data):
        try:
            out.append(welch_psd(channel, record.fs_hz, cfg))
        except ValidationError as exc:
            raise type(exc)(f"channel {c} of {record.subject_id!r}: {exc}") from exc
    return out


def channel_average(psds: Sequence[Psd]) -> Psd:
    """Elementwise mean of per-channel PSDs."""
    if len(psds) == 0:
        raise EmptyInput("channel_average needs at least one PSD")
    check_same_grid(psds)
    values = np.mean(np.stack([p.values for p in psds]), axis=0)
    return Psd(values, psds[0].fs_hz, psds[0].nfft)


def subject_psd(record: SignalRecord, cfg: WelchConfig | None = None) -> Psd:
    """Channel-averaged PSD of a record; one spectrum regardless of channel count."""
    return channel_average(psd_matrix(record, cfg))


def l1_normalize(p: Psd) -> NormalizedPsd:
    total = float(np.sum(p.values))
    if not total > 0:
        raise ZeroSpectrum("cannot l1-normalize an all-zero spectrum")
    return NormalizedPsd(p.values / total, p.fs_hz, p.nfft)
