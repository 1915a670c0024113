"""Zero-forcing equalization and two-step ML-MRC detection.

After ZF every active branch carries the symbol at unit gain but with its own
(amplified, correlated) noise. The ML step picks the activation pattern and a
PAM level per real axis by least squares over the equalized values; the MRC
step then averages the values on the chosen branches with inverse-variance
weights. A wrong pattern in the first step feeds noise-only branches to MRC.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from goqsm.channel import MimoChannel
from goqsm.codec import Scheme, SmConfig, SymbolIndex, symbols_to_bits


@dataclass(frozen=True)
class EqualizedSymbol:
    c_hat: np.ndarray
    branch_noise_var: np.ndarray


@dataclass(frozen=True)
class DetectionResult:
    z_re_hat: int
    z_im_hat: int
    b_hat: complex
    bits: np.ndarray


@dataclass(frozen=True)
class ZfEqualizer:
    """Precomputed pseudo-inverse of the effective channel.

    ``noise_var`` is the noise variance per real dimension at the receiver.
    """

    h: np.ndarray
    noise_var: float
    pinv: np.ndarray = field(init=False, repr=False)
    noise_cov: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        h = np.array(self.h, dtype=float, ndmin=2)
        if np.linalg.matrix_rank(h) < h.shape[1]:
            raise np.linalg.LinAlgError("channel matrix is column-rank deficient; ZF is undefined")
        gram_inv = np.linalg.inv(h.T @ h)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "pinv", np.linalg.pinv(h))
        object.__setattr__(self, "noise_cov", self.noise_var * gram_inv)

    @classmethod
    def from_channel(cls, channel: MimoChannel, amplitude: float = 1.0, noise_var: float | None = None):
        nv = channel.noise_power if noise_var is None else noise_var
        return cls(h=amplitude * channel.h, noise_var=nv)

    @property
    def branch_noise_var(self) -> np.ndarray:
        return np.diag(self.noise_cov).copy()

    def __call__(self, y: np.ndarray) -> np.ndarray:
        """Equalize row vectors: ``(..., n_rx) -> (..., n_tx)``."""
        return np.asarray(y) @ self.pinv.T


def zf_equalize(channel: MimoChannel, y, amplitude: float = 1.0, noise_var: float | None = None) -> EqualizedSymbol:
    eq = ZfEqualizer.from_channel(channel, amplitude, noise_var)
    return EqualizedSymbol(c_hat=eq(np.asarray(y)), branch_noise_var=eq.branch_noise_var)


def _axis_metrics(config: SmConfig, values: np.ndarray, pam_levels: np.ndarray) -> np.ndarray:
    # sum_t (v_t - m 1{t in p})^2 minus the pattern-independent ||v||^2
    s = values @ config.pattern_masks.T
    m = np.asarray(pam_levels)
    return config.n_active * m**2 - 2.0 * s[..., :, None] * m


def ml_detect_axis_batch(config: SmConfig, values: np.ndarray, pam_levels) -> tuple[np.ndarray, np.ndarray]:
    """Joint (pattern, level) least squares for ``(n, n_tx)`` real values.

    Returns pattern and level indices; ties go to the lowest pattern, then
    the lowest level index.
    """
    metric = _axis_metrics(config, np.asarray(values, dtype=float), pam_levels)
    n_levels = metric.shape[-1]
    k = metric.reshape(metric.shape[0], -1).argmin(axis=1)
    return k // n_levels, k % n_levels


def ml_detect_axis(config: SmConfig, values, pam_levels) -> tuple[int, float, np.ndarray]:
    """Single-vector version: ``(pattern index, level, estimates on the pattern)``."""
    values = np.asarray(values, dtype=float)
    if len(pam_levels) == 0:
        raise ValueError("pam_levels must be non-empty")
    p, m = ml_detect_axis_batch(config, values[None, :], pam_levels)
    p = int(p[0])
    return p, float(np.asarray(pam_levels)[m[0]]), values[list(config.pattern_table[p])]


def mrc_combine(estimates, branch_noise_var) -> float:
    est = np.asarray(estimates, dtype=float)
    var = np.asarray(branch_noise_var, dtype=float)
    if est.size == 0 or est.shape != var.shape:
        raise ValueError("need matching non-empty estimates and variances")
    if np.any(var <= 0):
        raise ValueError("branch noise variances must be positive")
    w = 1.0 / var
    return float(np.sum(w * est) / np.sum(w))


def mrc_combine_batch(config: SmConfig, values: np.ndarray, patterns: np.ndarray, branch_noise_var) -> np.ndarray:
    """Inverse-variance average of ``values`` over the branches of each row's pattern."""
    w = config.pattern_masks[patterns] / np.asarray(branch_noise_var, dtype=float)
    return np.sum(w * values, axis=1) / np.sum(w, axis=1)


def nearest_level(levels: np.ndarray, x: np.ndarray) -> np.ndarray:
    # levels are ascending and evenly spaced
    step = levels[1] - levels[0] if levels.size > 1 else 1.0
    idx = np.rint((x - levels[0]) / step).astype(np.int64)
    return np.clip(idx, 0, levels.size - 1)


def ml_mrc_detect_batch(config: SmConfig, c_hat: np.ndarray, branch_noise_var: np.ndarray) -> SymbolIndex:
    """Detect ``(n, n_tx)`` complex equalized vectors."""
    c_hat = np.asarray(c_hat)
    re, im = c_hat.real, c_hat.imag
    levels = config.pam_levels
    if config.scheme is Scheme.GOQSM:
        p_re, _ = ml_detect_axis_batch(config, re, levels)
        p_im, _ = ml_detect_axis_batch(config, im, levels)
    else:
        # shared pattern: best level per axis for each pattern, then best pattern
        total = _axis_metrics(config, re, levels).min(axis=-1) + _axis_metrics(config, im, levels).min(axis=-1)
        p_re = p_im = total.argmin(axis=1)
    b_re = mrc_combine_batch(config, re, p_re, branch_noise_var)
    b_im = mrc_combine_batch(config, im, p_im, branch_noise_var)
    return SymbolIndex(nearest_level(levels, b_re), nearest_level(levels, b_im), p_re, p_im)


def ml_mrc_detect(config: SmConfig, eq: EqualizedSymbol) -> DetectionResult:
    c_hat = np.asarray(eq.c_hat).reshape(1, -1)
    sym = ml_mrc_detect_batch(config, c_hat, eq.branch_noise_var)
    levels = config.pam_levels
    b_hat = complex(levels[sym.level_re[0]], levels[sym.level_im[0]])
    return DetectionResult(
        z_re_hat=int(sym.pattern_re[0]),
        z_im_hat=int(sym.pattern_im[0]),
        b_hat=b_hat,
        bits=symbols_to_bits(config, sym)[0],
    )
