"""INI-style sweep configuration and the figure-reproduction presets.

Sections and keys (all optional; defaults reproduce the 4x4 room setup)::

    [geometry]  led_positions, pd_positions       ("x y z; x y z; ...")
    [optics]    semi_angle_half_power, responsivity, pd_area, optical_filter_gain,
                lens_refractive_index, lens_fov_half_angle, noise_psd, bandwidth
    [ofdm]      fft_size, cyclic_prefix_len
    [scheme]    schemes, spectral_efficiencies, n_active
    [detector]  detectors                          ("ml-mrc, dnn")
    [dnn]       learning_rate, batch_size, train_set_size, validation_set_size,
                epochs, training_snr_db, training_snr_db.GOQSM@3 = ..., model_dir
    [sweep]     snr_grid_db, snr_grid_db.dnn, snr_grid_db.ml-mrc, min_bit_errors,
                max_bits, min_ber, seed, workers, fast_path, block_symbols

Lists are comma separated; a grid may also be written ``start:step:stop``
(stop inclusive).
"""

from __future__ import annotations

import configparser
import dataclasses
from pathlib import Path

import numpy as np

from goqsm.channel import ChannelParams, RoomGeometry
from goqsm.dnn import TrainConfig
from goqsm.harness import DETECTORS, ConfigError, SweepConfig
from goqsm.ofdm import OfdmConfig

_KNOWN = {
    "geometry": {"led_positions", "pd_positions"},
    "optics": {f.name for f in dataclasses.fields(ChannelParams)},
    "ofdm": {"fft_size", "cyclic_prefix_len"},
    "scheme": {"schemes", "spectral_efficiencies", "n_active"},
    "detector": {"detectors"},
    "dnn": {"learning_rate", "batch_size", "train_set_size", "validation_set_size", "epochs",
            "training_snr_db", "model_dir"},
    "sweep": {"snr_grid_db", "min_bit_errors", "max_bits", "min_ber", "seed", "workers", "fast_path",
              "block_symbols"},
}


def parse_grid(text: str) -> tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    if ":" in text:
        start, step, stop = (float(v) for v in text.split(":"))
        if step <= 0:
            raise ValueError("grid step must be positive")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 10) for i in range(n))
    return tuple(float(v) for v in text.split(",") if v.strip())


def _parse_points(text: str) -> tuple[tuple[float, float, float], ...]:
    pts = []
    for chunk in text.split(";"):
        if chunk.strip():
            vals = [float(v) for v in chunk.replace(",", " ").split()]
            if len(vals) != 3:
                raise ValueError(f"expected x y z, got {chunk.strip()!r}")
            pts.append(tuple(vals))
    return tuple(pts)


def _words(text: str) -> tuple[str, ...]:
    return tuple(w.strip() for w in text.split(",") if w.strip())


def _bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def config_from_parser(cp: configparser.ConfigParser, base: SweepConfig | None = None) -> SweepConfig:
    """Overlay the parsed file on ``base`` (defaults when omitted); all problems are reported together."""
    cfg = dataclasses.replace(base) if base is not None else SweepConfig()
    bad: list[str] = []

    def get(section, key, conv):
        try:
            return conv(cp[section][key])
        except (ValueError, TypeError) as exc:
            bad.append(f"{section}.{key}: {exc}")
            return None

    for section in cp.sections():
        if section not in _KNOWN:
            bad.append(f"{section}: unknown section")
            continue
        for key in cp[section]:
            base_key = key.split(".", 1)[0]
            if base_key not in _KNOWN[section] or ("." in key and base_key not in ("training_snr_db", "snr_grid_db")):
                bad.append(f"{section}.{key}: unknown key")

    if cp.has_section("geometry"):
        geo = {}
        for key in ("led_positions", "pd_positions"):
            if key in cp["geometry"]:
                geo[key] = get("geometry", key, _parse_points)
        if all(v is not None for v in geo.values()):
            try:
                cfg.geometry = dataclasses.replace(cfg.geometry, **geo)
            except ValueError as exc:
                bad.append(f"geometry: {exc}")
    if cp.has_section("optics"):
        vals = {k: get("optics", k, float) for k in cp["optics"] if k in _KNOWN["optics"]}
        if all(v is not None for v in vals.values()):
            try:
                cfg.channel = dataclasses.replace(cfg.channel, **vals)
            except ValueError as exc:
                bad.append(f"optics: {exc}")
    if cp.has_section("ofdm"):
        vals = {k: get("ofdm", k, int) for k in cp["ofdm"] if k in _KNOWN["ofdm"]}
        if all(v is not None for v in vals.values()):
            try:
                cfg.ofdm = dataclasses.replace(cfg.ofdm, **vals)
            except ValueError as exc:
                bad.append(f"ofdm: {exc}")
    if cp.has_section("scheme"):
        s = cp["scheme"]
        if "schemes" in s:
            cfg.schemes = _words(s["schemes"])
        if "spectral_efficiencies" in s:
            v = get("scheme", "spectral_efficiencies", lambda t: tuple(int(x) for x in _words(t)))
            if v is not None:
                cfg.spectral_efficiencies = v
        if "n_active" in s:
            v = get("scheme", "n_active", int)
            if v is not None:
                cfg.n_active = v
    if cp.has_section("detector") and "detectors" in cp["detector"]:
        cfg.detectors = _words(cp["detector"]["detectors"])
    if cp.has_section("dnn"):
        d = cp["dnn"]
        conv = {"learning_rate": float, "batch_size": int, "train_set_size": int, "validation_set_size": int,
                "epochs": int}
        vals = {k: get("dnn", k, c) for k, c in conv.items() if k in d}
        if all(v is not None for v in vals.values()):
            try:
                cfg.train = dataclasses.replace(cfg.train, **vals)
            except ValueError as exc:
                bad.append(f"dnn: {exc}")
        curve_snrs = dict(cfg.curve_training_snr_db)
        for key in d:
            if key == "training_snr_db":
                v = get("dnn", key, parse_grid)
                if v is not None:
                    cfg.training_snr_db = v
            elif key.startswith("training_snr_db."):
                v = get("dnn", key, parse_grid)
                if v is not None:
                    scheme, _, se = key.split(".", 1)[1].partition("@")
                    curve_snrs[f"{scheme.upper()}@{se}"] = v
        cfg.curve_training_snr_db = curve_snrs
        if "model_dir" in d:
            cfg.model_dir = d["model_dir"].strip() or None
    if cp.has_section("sweep"):
        sw = cp["sweep"]
        grids = dict(cfg.detector_snr_grids)
        for key in sw:
            if key == "snr_grid_db":
                v = get("sweep", key, parse_grid)
                if v is not None:
                    cfg.snr_grid_db = v
            elif key.startswith("snr_grid_db."):
                v = get("sweep", key, parse_grid)
                if v is not None:
                    grids[key.split(".", 1)[1]] = v
        cfg.detector_snr_grids = grids
        conv = {"min_bit_errors": int, "max_bits": lambda t: int(float(t)), "min_ber": float, "seed": int,
                "workers": int, "fast_path": _bool, "block_symbols": int}
        for k, c in conv.items():
            if k in sw:
                v = get("sweep", k, c)
                if v is not None:
                    setattr(cfg, k, v)
    bad.extend(cfg.problems())
    if bad:
        raise ConfigError(bad)
    return cfg


def load_config(path, base: SweepConfig | None = None) -> SweepConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keep GOQSM@3 style keys as written
    if not cp.read(path):
        raise ConfigError([f"cannot read config file {path}"])
    return config_from_parser(cp, base)


def loads_config(text: str, base: SweepConfig | None = None) -> SweepConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read_string(text)
    return config_from_parser(cp, base)


# Training SNRs (dB) centred on the best value found for each curve, +-4 dB in 2 dB steps.
OPTIMAL_TRAINING_SNR_DB = {
    "GOQSM@3": 136.0, "GOSM@3": 136.0,
    "GOQSM@4": 142.0, "GOSM@4": 142.0,
    "GOQSM@5": 150.0, "GOSM@5": 150.0,
}

ML_MRC_GRIDS = {3: parse_grid("160:2:176"), 4: parse_grid("164:2:184"), 5: parse_grid("168:2:188")}
DNN_GRIDS = {3: parse_grid("130:2:150"), 4: parse_grid("134:2:156"), 5: parse_grid("140:2:166")}


def _scan(center: float, half_width: float = 4.0, step: float = 2.0) -> tuple[float, ...]:
    n = int(round(2 * half_width / step)) + 1
    return tuple(center - half_width + i * step for i in range(n))


def preset(name: str, scan: bool = True) -> SweepConfig:
    """Configurations behind the MSE-vs-epoch and BER-vs-SNR figures.

    ``fig3`` trains one detector per scheme and efficiency at its optimal
    training SNR (sweep grids are unused). ``fig4a``/``fig4b``/``fig4c`` run
    both schemes with both detectors at 3/4/5 bits/s/Hz; with ``scan`` every
    curve's DNN is trained at five SNRs spanning +-4 dB around its optimum.
    """
    if name == "fig3":
        return SweepConfig(
            schemes=("GOQSM", "GOSM"),
            spectral_efficiencies=(3, 4, 5),
            detectors=("dnn",),
            snr_grid_db=(0.0,),
            curve_training_snr_db={k: (v,) for k, v in OPTIMAL_TRAINING_SNR_DB.items()},
        )
    figs = {"fig4a": 3, "fig4b": 4, "fig4c": 5}
    if name not in figs:
        raise ConfigError([f"unknown preset {name!r}; choose from fig3, {', '.join(figs)}"])
    se = figs[name]
    return SweepConfig(
        schemes=("GOQSM", "GOSM"),
        spectral_efficiencies=(se,),
        detectors=DETECTORS,
        detector_snr_grids={"ml-mrc": ML_MRC_GRIDS[se], "dnn": DNN_GRIDS[se]},
        curve_training_snr_db={
            k: _scan(v) if scan else (v,) for k, v in OPTIMAL_TRAINING_SNR_DB.items() if k.endswith(f"@{se}")
        },
        max_bits=2 * 10**7,
    )


PRESETS = ("fig3", "fig4a", "fig4b", "fig4c")
