"""Real-valued OFDM per transmit branch.

Data rides on subcarriers 1 .. fft_size/2 - 1; DC and Nyquist stay empty and
the upper half of the spectrum is the conjugate mirror, so each branch's
time-domain drive signal is real. Transforms are unitary (1/sqrt(N) both ways).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class OfdmConfig:
    fft_size: int = 256
    cyclic_prefix_len: int = 0

    def __post_init__(self):
        n = self.fft_size
        if n < 4 or n & (n - 1):
            raise ValueError(f"fft_size must be a power of two >= 4, got {n}")
        if self.cyclic_prefix_len < 0 or self.cyclic_prefix_len > n:
            raise ValueError("cyclic_prefix_len must lie in [0, fft_size]")

    @property
    def data_subcarriers(self) -> np.ndarray:
        return np.arange(1, self.fft_size // 2)

    @property
    def n_data(self) -> int:
        return self.fft_size // 2 - 1

    @property
    def frame_len(self) -> int:
        return self.fft_size + self.cyclic_prefix_len


def _check_subcarriers(config: OfdmConfig, subcarriers) -> np.ndarray:
    if subcarriers is None:
        return config.data_subcarriers
    sc = np.asarray(subcarriers, dtype=np.int64).ravel()
    if sc.size and (sc.min() < 1 or sc.max() > config.fft_size // 2 - 1):
        raise ValueError(f"subcarrier indices must lie in [1, {config.fft_size // 2 - 1}]")
    return sc


def hermitian_extend(config: OfdmConfig, freq: np.ndarray, subcarriers=None) -> np.ndarray:
    """Full-length spectrum with X[N-k] = conj(X[k]) and empty DC/Nyquist bins."""
    sc = _check_subcarriers(config, subcarriers)
    freq = np.asarray(freq)
    if freq.shape[-1] != sc.size:
        raise ValueError(f"expected {sc.size} subcarrier values per branch, got {freq.shape[-1]}")
    spec = np.zeros(freq.shape[:-1] + (config.fft_size,), dtype=complex)
    spec[..., sc] = freq
    spec[..., config.fft_size - sc] = np.conj(freq)
    return spec


def modulate(config: OfdmConfig, freq: np.ndarray, subcarriers=None, imag_tol: float = 1e-10) -> np.ndarray:
    """Map ``(..., n_sc)`` subcarrier values to ``(..., fft_size + cp)`` real samples."""
    spec = hermitian_extend(config, freq, subcarriers)
    x = np.fft.ifft(spec, norm="ortho")
    residue = np.max(np.abs(x.imag), initial=0.0)
    if residue > imag_tol * max(1.0, np.max(np.abs(x.real), initial=0.0)):
        raise FloatingPointError(f"inverse transform left imaginary residue {residue:.3e}")
    x = x.real
    cp = config.cyclic_prefix_len
    if cp:
        x = np.concatenate([x[..., -cp:], x], axis=-1)
    return x


def demodulate(config: OfdmConfig, frame: np.ndarray, subcarriers=None) -> np.ndarray:
    """Strip the cyclic prefix and return ``(..., n_sc)`` subcarrier values."""
    sc = _check_subcarriers(config, subcarriers)
    frame = np.asarray(frame, dtype=float)
    if frame.shape[-1] != config.frame_len:
        raise ValueError(f"expected frames of {config.frame_len} samples, got {frame.shape[-1]}")
    spec = np.fft.rfft(frame[..., config.cyclic_prefix_len :], norm="ortho")
    return spec[..., sc]
