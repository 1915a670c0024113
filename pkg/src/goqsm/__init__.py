"""Link-level simulator for OFDM-based generalized optical (quadrature) spatial
modulation over indoor LOS MIMO optical wireless channels."""

from goqsm.channel import (
    ChannelParams,
    MimoChannel,
    RoomGeometry,
    build_channel,
    lambertian_gain,
    sample_noise,
    reference_geometry,
    reference_params,
)
from goqsm.codec import SmConfig, SmFrame, constellation, demap_frame, map_bits, spectral_efficiency
from goqsm.ofdm import OfdmConfig, demodulate, modulate

__version__ = "0.1.0"

__all__ = [
    "ChannelParams",
    "MimoChannel",
    "OfdmConfig",
    "RoomGeometry",
    "SmConfig",
    "SmFrame",
    "build_channel",
    "constellation",
    "demap_frame",
    "demodulate",
    "lambertian_gain",
    "map_bits",
    "modulate",
    "sample_noise",
    "spectral_efficiency",
    "reference_geometry",
    "reference_params",
]
