"""Transport distances between stationary-Gaussian spectra, barycenters and subject matching.

For zero-mean stationary Gaussian processes whose covariances are diagonalized
by the same Fourier basis, the Wasserstein-2 distance reduces to the Euclidean
distance between square-rooted spectra. On l1-normalized spectra this is
``sqrt(2)`` times the Hellinger distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyInput, MismatchedGrids, NotNormalized, ValidationError
from .spectral import NormalizedPsd, Psd, check_same_grid, l1_normalize

SCHEMES = ("barycenter", "normalized_barycenter", "wasserstein_barycenter", "subject_to_subject")

# allowed deviation of sum(values) from 1 before hellinger() refuses an input
HELLINGER_SIMPLEX_ATOL = 1e-6


@dataclass(frozen=True, eq=False)
class ReferenceSpectrum:
    """Spectrum a target subject is mapped onto.

    ``matched_source_id`` is set exactly when ``scheme == "subject_to_subject"``.
    """

    scheme: str
    psd: Psd
    source_count: int
    matched_source_id: str | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValidationError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if (self.matched_source_id is not None) != (self.scheme == "subject_to_subject"):
            raise ValidationError("matched_source_id must be set iff scheme is subject_to_subject")
        if self.scheme == "normalized_barycenter" and abs(float(np.sum(self.psd.values)) - 1.0) > 1e-9:
            raise ValidationError("a normalized_barycenter reference must sum to 1")
        if self.source_count < 1:
            raise ValidationError("source_count must be >= 1")


def _values(x) -> np.ndarray:
    return x.values if isinstance(x, Psd) else np.asarray(x, dtype=np.float64)


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(a, Psd) and isinstance(b, Psd):
        check_same_grid([a, b])
    va, vb = _values(a), _values(b)
    if va.shape != vb.shape:
        raise MismatchedGrids(f"spectra have different lengths: {va.shape} vs {vb.shape}")
    return va, vb


def w2_spectral(a, b) -> float:
    """Wasserstein-2 distance between two commuting stationary Gaussians.

    Accepts :class:`Psd` objects (grids are checked) or plain arrays of
    eigenvalues, e.g. a full circulant spectrum.
    """
    va, vb = _pair(a, b)
    if np.any(va < 0) or np.any(vb < 0):
        raise ValidationError("spectra must be nonnegative")
    return float(np.linalg.norm(np.sqrt(va) - np.sqrt(vb)))


def hellinger(a, b) -> float:
    """Hellinger distance between two PMFs on the same frequency grid."""
    va, vb = _pair(a, b)
    for name, v in (("a", va), ("b", vb)):
        if np.any(v < 0) or abs(float(np.sum(v)) - 1.0) > HELLINGER_SIMPLEX_ATOL:
            raise NotNormalized(f"{name} is not on the probability simplex (sum={float(np.sum(v))!r})")
    return min(1.0, float(np.linalg.norm(np.sqrt(va) - np.sqrt(vb))) / math.sqrt(2.0))


def _stack(psds: Sequence[Psd]) -> np.ndarray:
    if len(psds) == 0:
        raise EmptyInput("need at least one source PSD")
    check_same_grid(psds)
    return np.stack([p.values for p in psds])


def barycenter_arithmetic(psds: Sequence[Psd]) -> Psd:
    """Plain mean of the source PSDs."""
    values = _stack(psds).mean(axis=0)
    return Psd(values, psds[0].fs_hz, psds[0].nfft)


def barycenter_normalized(psds: Sequence[Psd]) -> NormalizedPsd:
    """Mean of the l1-normalized source PSDs, so each source weighs the same."""
    _stack(psds)
    values = np.mean(np.stack([l1_normalize(p).values for p in psds]), axis=0)
    # renormalize away accumulated rounding so the result is exactly a PMF
    return NormalizedPsd(values / values.sum(), psds[0].fs_hz, psds[0].nfft)


def barycenter_wasserstein(psds: Sequence[Psd]) -> Psd:
    """W2 barycenter of commuting Gaussians: the squared mean of square-rooted spectra."""
    values = np.sqrt(_stack(psds)).mean(axis=0) ** 2
    return Psd(values, psds[0].fs_hz, psds[0].nfft)


BARYCENTERS = {
    "barycenter": barycenter_arithmetic,
    "normalized_barycenter": barycenter_normalized,
    "wasserstein_barycenter": barycenter_wasserstein,
}


def barycenter(psds: Sequence[Psd], scheme: str) -> Psd:
    try:
        fn = BARYCENTERS[scheme]
    except KeyError:
        raise ValidationError(f"{scheme!r} is not a barycenter scheme; choose from {tuple(BARYCENTERS)}") from None
    return fn(psds)


def match_subject(target: NormalizedPsd, sources: Sequence[tuple]) -> tuple[int, Psd]:
    """Nearest source subject to ``target`` in Hellinger distance.

    ``sources`` holds ``(id, raw_psd, normalized_psd)`` triples; the normalized
    PSD may be ``None`` and is then computed. Returns the index of the closest
    source (lowest index on ties) and its *unnormalized* PSD.
    """
    if len(sources) == 0:
        raise EmptyInput("match_subject needs at least one source")
    check_same_grid([target] + [s[1] for s in sources])
    best, best_d = 0, math.inf
    for i, (_, raw, normed) in enumerate(sources):
        d = hellinger(normed if normed is not None else l1_normalize(raw), target)
        if d < best_d:
            best, best_d = i, d
    return best, sources[best][1]


def hellinger_to_sources(target: NormalizedPsd, sources: Sequence[tuple]) -> np.ndarray:
    """Hellinger distance from ``target`` to every source, in source order."""
    return np.array(
        [hellinger(n if n is not None else l1_normalize(raw), target) for _, raw, n in sources]
    )
