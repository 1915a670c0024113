"""Indoor line-of-sight MIMO optical wireless channel.

DC gains follow the Lambertian emitter / lensed photodiode model. LEDs point
straight down and PDs straight up, so the emission angle and the incidence
angle of a link are both measured against the vertical and are equal.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ChannelParams:
    """Optics and noise parameters of the link.

    Angles are in degrees, ``pd_area`` in m^2, ``noise_psd`` in A^2/Hz and
    ``bandwidth`` in Hz.
    """

    semi_angle_half_power: float = 60.0
    responsivity: float = 1.0
    pd_area: float = 1e-4
    optical_filter_gain: float = 0.9
    lens_refractive_index: float = 1.5
    lens_fov_half_angle: float = 72.0
    noise_psd: float = 1e-22
    bandwidth: float = 20e6

    def __post_init__(self):
        bad = []
        if not 0.0 < self.semi_angle_half_power < 90.0:
            bad.append("semi_angle_half_power must lie in (0, 90) degrees")
        if not 0.0 < self.lens_fov_half_angle <= 90.0:
            bad.append("lens_fov_half_angle must lie in (0, 90] degrees")
        for name in ("responsivity", "pd_area", "noise_psd", "bandwidth"):
            if not getattr(self, name) > 0.0:
                bad.append(f"{name} must be positive")
        if not self.optical_filter_gain >= 0.0:
            bad.append("optical_filter_gain must be non-negative")
        if not self.lens_refractive_index >= 1.0:
            bad.append("lens_refractive_index must be >= 1")
        if bad:
            raise ValueError("invalid ChannelParams: " + "; ".join(bad))

    @property
    def lambertian_order(self) -> float:
        return -math.log(2.0) / math.log(math.cos(math.radians(self.semi_angle_half_power)))

    @property
    def lens_gain(self) -> float:
        return self.lens_refractive_index**2 / math.sin(math.radians(self.lens_fov_half_angle)) ** 2

    @property
    def noise_power(self) -> float:
        return self.noise_psd * self.bandwidth


@dataclass(frozen=True)
class RoomGeometry:
    """LED and PD positions in metres (x, y, z), z measured from the floor."""

    led_positions: tuple[tuple[float, float, float], ...]
    pd_positions: tuple[tuple[float, float, float], ...]
    led_orientation: tuple[float, float, float] = (0.0, 0.0, -1.0)
    pd_orientation: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        leds = tuple(tuple(float(v) for v in p) for p in self.led_positions)
        pds = tuple(tuple(float(v) for v in p) for p in self.pd_positions)
        object.__setattr__(self, "led_positions", leds)
        object.__setattr__(self, "pd_positions", pds)
        if not leds or not pds:
            raise ValueError("geometry needs at least one LED and one PD")
        if any(len(p) != 3 for p in leds + pds):
            raise ValueError("positions must be 3-D points")
        if tuple(self.led_orientation) != (0.0, 0.0, -1.0) or tuple(self.pd_orientation) != (0.0, 0.0, 1.0):
            raise ValueError("only downward-facing LEDs and upward-facing PDs are supported")
        if min(p[2] for p in leds) <= max(p[2] for p in pds):
            raise ValueError("every LED must sit strictly above every PD")

    @property
    def n_tx(self) -> int:
        return len(self.led_positions)

    @property
    def n_rx(self) -> int:
        return len(self.pd_positions)


@dataclass(frozen=True)
class MimoChannel:
    """N_r x N_t matrix of DC gains plus the receiver noise power N0*B."""

    h: np.ndarray
    noise_power: float

    def __post_init__(self):
        h = np.array(self.h, dtype=float, ndmin=2)
        if np.any(h < 0):
            raise ValueError("channel gains must be non-negative")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)

    @property
    def n_rx(self) -> int:
        return self.h.shape[0]

    @property
    def n_tx(self) -> int:
        return self.h.shape[1]

    @property
    def full_column_rank(self) -> bool:
        return bool(np.linalg.matrix_rank(self.h) == self.n_tx)


def _grid(center: Sequence[float], pitch: float) -> tuple[tuple[float, float, float], ...]:
    cx, cy, cz = center
    half = pitch / 2.0
    return tuple((cx + dx, cy + dy, cz) for dx in (-half, half) for dy in (-half, half))


def reference_params() -> ChannelParams:
    return ChannelParams()


def reference_geometry() -> RoomGeometry:
    """4x4 layout in a 5 m x 5 m x 3 m room.

    A 2x2 LED grid with 2.5 m pitch centred on the ceiling and a 2x2 PD grid
    with 10 cm pitch centred on (2, 2, 0.85).
    """
    return RoomGeometry(
        led_positions=_grid((2.5, 2.5, 3.0), 2.5),
        pd_positions=_grid((2.0, 2.0, 0.85), 0.10),
    )


def lambertian_gain(params: ChannelParams, led: Sequence[float], pd: Sequence[float]) -> float:
    """DC gain of one LED -> PD link (zero outside the lens field of view)."""
    dx, dy, dz = (float(a) - float(b) for a, b in zip(led, pd))
    d2 = dx * dx + dy * dy + dz * dz
    if d2 == 0.0:
        raise ValueError("LED and PD positions coincide")
    if dz <= 0.0:
        raise ValueError("LED must be above the PD plane")
    cos_angle = dz / math.sqrt(d2)
    if math.acos(min(cos_angle, 1.0)) > math.radians(params.lens_fov_half_angle):
        return 0.0
    order = params.lambertian_order
    return (
        (order + 1.0) * params.responsivity * params.pd_area / (2.0 * math.pi * d2)
        * cos_angle**order
        * params.optical_filter_gain
        * params.lens_gain
        * cos_angle
    )


def build_channel(params: ChannelParams, geom: RoomGeometry) -> MimoChannel:
    h = np.array(
        [[lambertian_gain(params, led, pd) for led in geom.led_positions] for pd in geom.pd_positions]
    )
    channel = MimoChannel(h=h, noise_power=params.noise_power)
    if not channel.full_column_rank:
        warnings.warn("channel matrix is column-rank deficient; ZF equalization will fail", RuntimeWarning)
    return channel


def sample_noise(channel: MimoChannel, count: int, rng: np.random.Generator) -> np.ndarray:
    """Real AWGN of variance N0*B, shape ``(n_rx, count)``."""
    if int(count) != count or count <= 0:
        raise ValueError(f"count must be a positive integer, got {count!r}")
    return rng.normal(0.0, math.sqrt(channel.noise_power), size=(channel.n_rx, int(count)))
