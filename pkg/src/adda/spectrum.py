"""Raw vibration signals to normalized 2048-bin amplitude spectra.

The preprocessing pipeline: cut 4096-sample windows at random offsets, run a
radix-2 FFT, keep the magnitudes of the first 2048 bins (the second half of a
real signal's spectrum mirrors the first), scale by 1/4096 and max-normalize.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .rng import as_generator

WINDOW_LEN = 4096
SPECTRUM_LEN = WINDOW_LEN // 2


@dataclass(frozen=True)
class RawSignal:
    """A time-domain vibration record and its sampling rate in Hz."""

    samples: np.ndarray
    sample_rate: float = 12_000.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if not np.all(np.isfinite(samples)):
            raise ValueError("signal contains non-finite samples")
        object.__setattr__(self, "samples", samples)


@dataclass
class SpectrumSample:
    """2048 non-negative spectrum amplitudes with class and domain labels.

    `class_label` is 1-based; `domain_label` is 0 for source, 1 for target.
    """

    amplitudes: np.ndarray
    class_label: int
    domain_label: int

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=np.float64)
        if a.shape != (SPECTRUM_LEN,):
            raise ValueError(f"amplitudes must have length {SPECTRUM_LEN}, got {a.shape}")
        if not np.all(np.isfinite(a)) or a.min() < 0.0:
            raise ValueError("amplitudes must be finite and non-negative")
        if self.class_label < 1:
            raise ValueError(f"class_label must be >= 1, got {self.class_label}")
        if self.domain_label not in (0, 1):
            raise ValueError(f"domain_label must be 0 or 1, got {self.domain_label}")
        self.amplitudes = a


@lru_cache(maxsize=8)
def _bit_reversal(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev = (rev << 1) | ((idx >> b) & 1)
    return rev


def _check_pow2(n: int) -> None:
    if n < 2 or n & (n - 1):
        raise ValueError(f"length must be a power of two >= 2, got {n}")


def fft_radix2(x) -> np.ndarray:
    """Unnormalized DFT of a power-of-two-length sequence.

    Iterative decimation-in-time Cooley-Tukey: bit-reversal permutation
    followed by log2(n) butterfly stages.
    """
    a = np.asarray(x, dtype=np.complex128)
    if a.ndim != 1:
        raise ValueError(f"expected a 1-D sequence, got shape {a.shape}")
    n = a.shape[0]
    _check_pow2(n)
    a = a[_bit_reversal(n)]
    size = 2
    while size <= n:
        half = size // 2
        twiddle = np.exp((-2j * np.pi / size) * np.arange(half))
        blocks = a.reshape(-1, size)
        even = blocks[:, :half]
        odd = blocks[:, half:] * twiddle
        a = np.concatenate((even + odd, even - odd), axis=1).reshape(-1)
        size *= 2
    return a


def ifft_radix2(x) -> np.ndarray:
    """Inverse of fft_radix2 via the conjugate method, normalized by 1/n."""
    a = np.asarray(x, dtype=np.complex128)
    return np.conj(fft_radix2(np.conj(a))) / a.shape[0]


def window_signal(signal, count: int, seed) -> list[np.ndarray]:
    """Cut `count` windows of 4096 samples at seeded uniform random offsets.

    Offsets are drawn independently with replacement from [0, len - 4096],
    so windows may overlap.
    """
    samples = signal.samples if isinstance(signal, RawSignal) else np.asarray(
        signal, dtype=np.float64)
    n = samples.shape[0]
    if n < WINDOW_LEN:
        raise ValueError(f"signal length {n} is shorter than a window ({WINDOW_LEN})")
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    rng = as_generator(seed)
    offsets = rng.integers(0, n - WINDOW_LEN, size=count, endpoint=True)
    return [samples[o:o + WINDOW_LEN].copy() for o in offsets]


def make_spectrum(window, class_label: int, domain_label: int,
                  normalization: str = "max") -> SpectrumSample:
    """Turn one 4096-sample window into a labeled spectrum sample.

    Amplitude k is |DFT(window)[k]| / 4096 for k < 2048. With
    normalization="max" (the default) amplitudes are then divided by their
    maximum, so every sample lies in [0, 1] and overall signal scale cancels;
    "none" keeps the raw scaled magnitudes.
    """
    w = np.asarray(window, dtype=np.float64)
    if w.shape != (WINDOW_LEN,):
        raise ValueError(f"window must have length {WINDOW_LEN}, got {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError("window contains non-finite values")
    if normalization not in ("max", "none"):
        raise ValueError(f"normalization must be 'max' or 'none', got {normalization!r}")
    amplitudes = np.abs(fft_radix2(w))[:SPECTRUM_LEN] / WINDOW_LEN
    if normalization == "max":
        peak = amplitudes.max()
        if peak > 0.0:
            amplitudes = amplitudes / peak
    return SpectrumSample(amplitudes, class_label, domain_label)
