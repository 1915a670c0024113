"""End-to-end link: map -> [OFDM] -> channel + AWGN -> ZF -> [OFDM demod].

The transmitted SNR is the average electrical power of the frequency-domain
symbol vector (times its amplitude scale) over the noise power N0*B. With a
unit-energy constellation every symbol vector carries ``n_active`` units of
power for both GOQSM and GOSM.

Noise is drawn per OFDM symbol as a spectrum over bins 0..fft_size/2 (complex
with variance N0*B on the data bins, real on DC and Nyquist). The full path
turns it into white real time-domain noise with the unitary inverse transform;
the fast path uses the data bins directly. Both paths consume identical random
numbers, so they see the same noise realization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from goqsm.channel import MimoChannel
from goqsm.codec import SmConfig, bits_to_symbols, symbols_to_bits, transmit_vectors
from goqsm.detect import ZfEqualizer, ml_mrc_detect_batch
from goqsm.dnn import MlpNetwork, dnn_detect_batch, ris_input
from goqsm.ofdm import OfdmConfig, demodulate, modulate


def transmitted_snr_scaling(channel: MimoChannel, snr_db: float, mean_symbol_power: float = 2.0) -> float:
    """Amplitude scale so that ``scale**2 * mean_symbol_power / (N0 B)`` equals ``snr_db``.

    ``mean_symbol_power`` is the average of ||c||^2 for unit-energy constellations,
    i.e. the number of active LEDs.
    """
    if not math.isfinite(snr_db):
        raise ValueError(f"snr_db must be finite, got {snr_db}")
    return math.sqrt(10.0 ** (snr_db / 10.0) * channel.noise_power / mean_symbol_power)


@dataclass(frozen=True)
class Link:
    sm: SmConfig
    channel: MimoChannel
    ofdm: OfdmConfig = field(default_factory=OfdmConfig)

    def __post_init__(self):
        if self.sm.n_tx != self.channel.n_tx:
            raise ValueError(f"codec uses {self.sm.n_tx} LEDs but channel has {self.channel.n_tx}")

    def amplitude(self, snr_db: float) -> float:
        return transmitted_snr_scaling(self.channel, snr_db, self.sm.n_active)

    def equalizer(self, snr_db: float) -> ZfEqualizer:
        # per-dimension noise variance on a data subcarrier is N0*B/2
        return ZfEqualizer.from_channel(self.channel, self.amplitude(snr_db), self.channel.noise_power / 2.0)

    def draw_noise_spectra(self, n_symbols: int, rng: np.random.Generator) -> np.ndarray:
        """``(n_rx, n_symbols, fft_size/2 + 1)`` complex noise spectra."""
        half = self.ofdm.fft_size // 2
        z = rng.standard_normal((2, self.channel.n_rx, n_symbols, half + 1))
        sigma = math.sqrt(self.channel.noise_power)
        spec = (z[0] + 1j * z[1]) * (sigma / math.sqrt(2.0))
        spec[..., 0] = z[0, ..., 0] * sigma
        spec[..., half] = z[0, ..., half] * sigma
        return spec

    def simulate(
        self, bits: np.ndarray, snr_db: float, rng: np.random.Generator | None, fast_path: bool = True
    ) -> np.ndarray:
        """Run ``(n_symbols * n_data, block_bits)`` bits through the link; return ZF output ĉ.

        ``rng=None`` disables noise.
        """
        n_data = self.ofdm.n_data
        if len(bits) % n_data:
            raise ValueError(f"bit blocks must fill whole OFDM symbols ({n_data} per symbol)")
        n_symbols = len(bits) // n_data
        eq = self.equalizer(snr_db)
        c = transmit_vectors(self.sm, bits_to_symbols(self.sm, bits))
        noise = None if rng is None else self.draw_noise_spectra(n_symbols, rng)
        if fast_path:
            y = c @ eq.h.T
            if noise is not None:
                sc = self.ofdm.data_subcarriers
                y = y + noise[..., sc].transpose(1, 2, 0).reshape(-1, self.channel.n_rx)
            return eq(y)
        freq = c.reshape(n_symbols, n_data, -1).transpose(2, 0, 1)
        s = modulate(self.ofdm, freq)
        r = np.einsum("rt,tsn->rsn", eq.h, s)
        if noise is not None:
            t_noise = np.fft.irfft(noise, n=self.ofdm.fft_size, axis=-1, norm="ortho")
            cp = self.ofdm.cyclic_prefix_len
            if cp:
                extra = rng.standard_normal(t_noise.shape[:-1] + (cp,)) * math.sqrt(self.channel.noise_power)
                t_noise = np.concatenate([extra, t_noise], axis=-1)
            r = r + t_noise
        y = demodulate(self.ofdm, r).transpose(1, 2, 0).reshape(-1, self.channel.n_rx)
        return eq(y)

    def random_bits(self, n_symbols: int, rng: np.random.Generator) -> np.ndarray:
        return rng.integers(0, 2, size=(n_symbols * self.ofdm.n_data, self.sm.block_bits), dtype=np.uint8)

    def training_data(self, snr_db: float):
        """Data generator for :func:`goqsm.dnn.train`: RIS of ĉ and the sent bits."""

        def generate(count: int, rng: np.random.Generator):
            n_symbols = -(-count // self.ofdm.n_data)
            bits = self.random_bits(n_symbols, rng)
            c_hat = self.simulate(bits, snr_db, rng, fast_path=True)
            return ris_input(c_hat[:count]), bits[:count]

        return generate


class MlMrcDetector:
    name = "ml-mrc"

    def __init__(self, sm: SmConfig):
        self.sm = sm

    def __call__(self, c_hat: np.ndarray, eq: ZfEqualizer) -> np.ndarray:
        return symbols_to_bits(self.sm, ml_mrc_detect_batch(self.sm, c_hat, eq.branch_noise_var))


class DnnDetector:
    name = "dnn"

    def __init__(self, net: MlpNetwork):
        self.net = net

    def __call__(self, c_hat: np.ndarray, eq: ZfEqualizer) -> np.ndarray:
        return dnn_detect_batch(self.net, c_hat)


def count_bit_errors(link: Link, detector, snr_db: float, n_symbols: int, rng, fast_path: bool = True,
                     noise: bool = True) -> tuple[int, int]:
    """Simulate ``n_symbols`` OFDM symbols; return ``(bit_errors, bits_simulated)``."""
    bits = link.random_bits(n_symbols, rng)
    c_hat = link.simulate(bits, snr_db, rng if noise else None, fast_path)
    detected = detector(c_hat, link.equalizer(snr_db))
    return int(np.count_nonzero(detected != bits)), int(bits.size)
