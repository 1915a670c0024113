"""Per-subcarrier GOQSM / GOSM bit mapping.

A bit block is laid out as ``[QAM bits | in-phase spatial bits | quadrature
spatial bits]``; GOSM has no quadrature spatial part and reuses the in-phase
pattern for the imaginary component. QAM bits are split in half, the first
half labelling the real PAM axis and the second half the imaginary axis, each
Gray coded.

The batch helpers (``bits_to_symbols``, ``symbols_to_bits``,
``transmit_vectors``) work on integer index arrays and are what the Monte
Carlo loops use; ``map_bits``/``demap_frame`` are the single-block API.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import NamedTuple

import numpy as np


class Scheme(str, enum.Enum):
    GOQSM = "GOQSM"
    GOSM = "GOSM"

    @classmethod
    def parse(cls, value: "str | Scheme") -> "Scheme":
        if isinstance(value, Scheme):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ValueError(f"unknown scheme {value!r}; expected GOQSM or GOSM") from None


def spatial_bits_per_axis(n_tx: int, n_active: int) -> int:
    return int(math.floor(math.log2(math.comb(n_tx, n_active))))


def default_pattern_table(n_tx: int, n_active: int) -> tuple[tuple[int, ...], ...]:
    """Lexicographically first 2^floor(log2 C(n_tx, n_active)) subsets (0-based)."""
    size = 2 ** spatial_bits_per_axis(n_tx, n_active)
    return tuple(itertools.islice(itertools.combinations(range(n_tx), n_active), size))


def _is_square(m: int) -> bool:
    r = math.isqrt(m)
    return r * r == m


@dataclass(frozen=True)
class SmConfig:
    scheme: Scheme
    n_tx: int
    n_active: int
    qam_order: int
    pattern_table: tuple[tuple[int, ...], ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        if not 1 <= self.n_active <= self.n_tx:
            raise ValueError(f"need 1 <= n_active <= n_tx, got n_active={self.n_active}, n_tx={self.n_tx}")
        m = self.qam_order
        if m < 4 or not _is_square(m) or m & (m - 1):
            raise ValueError(f"qam_order must be a square power of two >= 4, got {m}")
        table = self.pattern_table or default_pattern_table(self.n_tx, self.n_active)
        table = tuple(tuple(sorted(int(t) for t in p)) for p in table)
        expected = 2 ** spatial_bits_per_axis(self.n_tx, self.n_active)
        if len(table) != expected:
            raise ValueError(f"pattern table must have exactly {expected} entries, got {len(table)}")
        if len(set(table)) != len(table):
            raise ValueError("pattern table entries must be distinct")
        for p in table:
            if len(p) != self.n_active or len(set(p)) != len(p) or not all(0 <= t < self.n_tx for t in p):
                raise ValueError(f"pattern {p} is not an {self.n_active}-subset of range({self.n_tx})")
        object.__setattr__(self, "pattern_table", table)

    @classmethod
    def for_spectral_efficiency(
        cls, scheme: "str | Scheme", efficiency: float, n_tx: int = 4, n_active: int = 2
    ) -> "SmConfig":
        """Pick the QAM order that gives ``efficiency`` bits/s/Hz."""
        scheme = Scheme.parse(scheme)
        s = spatial_bits_per_axis(n_tx, n_active)
        spatial = s if scheme is Scheme.GOQSM else Fraction(s, 2)
        log2m = 2 * (Fraction(efficiency).limit_denominator(64) - spatial)
        if log2m.denominator != 1 or log2m < 2 or log2m % 2:
            raise ValueError(
                f"{scheme.value} with n_tx={n_tx}, n_active={n_active} cannot reach {efficiency} bits/s/Hz "
                "with a square QAM constellation"
            )
        return cls(scheme, n_tx, n_active, 2 ** int(log2m))

    @property
    def qam_bits(self) -> int:
        return int(math.log2(self.qam_order))

    @property
    def pam_size(self) -> int:
        return math.isqrt(self.qam_order)

    @property
    def spatial_bits(self) -> int:
        return spatial_bits_per_axis(self.n_tx, self.n_active)

    @property
    def n_patterns(self) -> int:
        return len(self.pattern_table)

    @property
    def block_bits(self) -> int:
        """Bits carried per complex subcarrier symbol vector."""
        n_spatial = 2 if self.scheme is Scheme.GOQSM else 1
        return self.qam_bits + n_spatial * self.spatial_bits

    @cached_property
    def pattern_masks(self) -> np.ndarray:
        """``(n_patterns, n_tx)`` 0/1 activation masks."""
        masks = np.zeros((self.n_patterns, self.n_tx))
        for i, p in enumerate(self.pattern_table):
            masks[i, list(p)] = 1.0
        masks.setflags(write=False)
        return masks

    @cached_property
    def pam_levels(self) -> np.ndarray:
        """Ascending per-axis amplitude set of the unit-energy square QAM."""
        size = self.pam_size
        norm = math.sqrt(2.0 * (self.qam_order - 1) / 3.0)
        levels = (2.0 * np.arange(size) - size + 1) / norm
        levels.setflags(write=False)
        return levels

    @cached_property
    def _gray_to_level(self) -> np.ndarray:
        # level index i carries Gray label i ^ (i >> 1)
        size = self.pam_size
        table = np.empty(size, dtype=np.int64)
        idx = np.arange(size)
        table[idx ^ (idx >> 1)] = idx
        return table


class SymbolIndex(NamedTuple):
    """Integer description of a batch of symbol vectors (all arrays shape ``(n,)``)."""

    level_re: np.ndarray
    level_im: np.ndarray
    pattern_re: np.ndarray
    pattern_im: np.ndarray


@dataclass(frozen=True)
class SmFrame:
    b: complex
    z_re: int
    z_im: int
    c: np.ndarray


def spectral_efficiency(config: SmConfig) -> Fraction:
    """Bits/s/Hz; the 1/2 on the QAM term accounts for Hermitian symmetry."""
    s = config.spatial_bits
    spatial = Fraction(s) if config.scheme is Scheme.GOQSM else Fraction(s, 2)
    return Fraction(config.qam_bits, 2) + spatial


def constellation(config: SmConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(points, a_re, a_im)``.

    ``points[k]`` is the QAM point labelled by the integer whose binary
    expansion (MSB first) is the QAM bit group ``k``.
    """
    half = config.qam_bits // 2
    labels = np.arange(config.qam_order)
    gray_re = labels >> half
    gray_im = labels & ((1 << half) - 1)
    levels = config.pam_levels
    lut = config._gray_to_level
    points = levels[lut[gray_re]] + 1j * levels[lut[gray_im]]
    return points, levels.copy(), levels.copy()


def _bits_to_int(bits: np.ndarray) -> np.ndarray:
    if bits.shape[1] == 0:
        return np.zeros(bits.shape[0], dtype=np.int64)
    weights = 1 << np.arange(bits.shape[1] - 1, -1, -1, dtype=np.int64)
    return bits.astype(np.int64) @ weights


def _int_to_bits(values: np.ndarray, width: int) -> np.ndarray:
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((np.asarray(values, dtype=np.int64)[:, None] >> shifts) & 1).astype(np.uint8)


def bits_to_symbols(config: SmConfig, bits: np.ndarray) -> SymbolIndex:
    """Map a ``(n, block_bits)`` 0/1 array to symbol indices."""
    bits = np.asarray(bits)
    if bits.ndim != 2 or bits.shape[1] != config.block_bits:
        raise ValueError(f"expected bit blocks of length {config.block_bits}, got shape {bits.shape}")
    half = config.qam_bits // 2
    s = config.spatial_bits
    lut = config._gray_to_level
    level_re = lut[_bits_to_int(bits[:, :half])]
    level_im = lut[_bits_to_int(bits[:, half : 2 * half])]
    pattern_re = _bits_to_int(bits[:, 2 * half : 2 * half + s])
    if config.scheme is Scheme.GOQSM:
        pattern_im = _bits_to_int(bits[:, 2 * half + s :])
    else:
        pattern_im = pattern_re
    return SymbolIndex(level_re, level_im, pattern_re, pattern_im)


def symbols_to_bits(config: SmConfig, symbols: SymbolIndex) -> np.ndarray:
    """Inverse of :func:`bits_to_symbols`; returns a ``(n, block_bits)`` uint8 array."""
    half = config.qam_bits // 2
    s = config.spatial_bits
    level_re, level_im, pattern_re, pattern_im = (np.asarray(a, dtype=np.int64) for a in symbols)
    for name, arr, limit in (
        ("pattern_re", pattern_re, config.n_patterns),
        ("pattern_im", pattern_im, config.n_patterns),
        ("level_re", level_re, config.pam_size),
        ("level_im", level_im, config.pam_size),
    ):
        if arr.size and (arr.min() < 0 or arr.max() >= limit):
            raise ValueError(f"{name} index outside [0, {limit})")
    parts = [
        _int_to_bits(level_re ^ (level_re >> 1), half),
        _int_to_bits(level_im ^ (level_im >> 1), half),
        _int_to_bits(pattern_re, s),
    ]
    if config.scheme is Scheme.GOQSM:
        parts.append(_int_to_bits(pattern_im, s))
    return np.concatenate(parts, axis=1)


def transmit_vectors(config: SmConfig, symbols: SymbolIndex) -> np.ndarray:
    """Build the ``(n, n_tx)`` complex transmit vectors c = c_Re + j c_Im."""
    masks = config.pattern_masks
    levels = config.pam_levels
    c_re = masks[symbols.pattern_re] * levels[symbols.level_re][:, None]
    c_im = masks[symbols.pattern_im] * levels[symbols.level_im][:, None]
    return c_re + 1j * c_im


def random_symbols(config: SmConfig, count: int, rng: np.random.Generator) -> tuple[np.ndarray, SymbolIndex]:
    """Uniform random bit blocks and their symbol indices."""
    bits = rng.integers(0, 2, size=(count, config.block_bits), dtype=np.uint8)
    return bits, bits_to_symbols(config, bits)


def map_bits(config: SmConfig, bits) -> SmFrame:
    """Map one bit block to its frame."""
    block = np.asarray(bits, dtype=np.uint8).reshape(1, -1)
    sym = bits_to_symbols(config, block)
    c = transmit_vectors(config, sym)[0]
    b = complex(config.pam_levels[sym.level_re[0]], config.pam_levels[sym.level_im[0]])
    return SmFrame(b=b, z_re=int(sym.pattern_re[0]), z_im=int(sym.pattern_im[0]), c=c)


def demap_frame(config: SmConfig, frame: SmFrame) -> np.ndarray:
    """Recover the bit block of ``frame``; ``frame.b`` must be a constellation point."""
    levels = config.pam_levels
    idx = []
    for value in (frame.b.real, frame.b.imag):
        i = int(np.argmin(np.abs(levels - value)))
        if not math.isclose(levels[i], value, rel_tol=1e-9, abs_tol=1e-9):
            raise ValueError(f"{frame.b} is not a constellation point")
        idx.append(i)
    for z in (frame.z_re, frame.z_im):
        if not 0 <= z < config.n_patterns:
            raise ValueError(f"pattern index {z} outside table of size {config.n_patterns}")
    if config.scheme is Scheme.GOSM and frame.z_re != frame.z_im:
        raise ValueError("GOSM frames share one pattern for both components")
    sym = SymbolIndex(*(np.array([v]) for v in (idx[0], idx[1], frame.z_re, frame.z_im)))
    return symbols_to_bits(config, sym)[0]
