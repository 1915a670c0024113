"""Monte Carlo BER sweeps, DNN training runs and result files.

Randomness is keyed by ``(seed, point id, block index)`` where the point id is
a CRC of the point's identity (scheme, efficiency, detector, training SNR,
SNR). A point therefore produces the same numbers whatever else is in the
sweep, however many workers run it, and whether or not it is resumed.

Blocks of ``block_symbols`` OFDM symbols are evaluated in waves of
``workers``; the point stops at the first block (in index order) at which the
cumulative error count reaches ``min_bit_errors`` or the bit budget runs out.
Blocks computed past that index are discarded, so the stopping point does not
depend on the worker count.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import time
import zlib
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from goqsm.channel import ChannelParams, MimoChannel, RoomGeometry, build_channel, reference_geometry
from goqsm.codec import Scheme, SmConfig, spectral_efficiency
from goqsm.dnn import MlpNetwork, TrainConfig, layer_sizes_for, load_network, save_network, train
from goqsm.link import DnnDetector, Link, MlMrcDetector, count_bit_errors
from goqsm.ofdm import OfdmConfig
from goqsm.streams import make_stream

log = logging.getLogger(__name__)

DETECTORS = ("ml-mrc", "dnn")


class ConfigError(ValueError):
    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


def _curve_key(scheme: str, efficiency: int) -> str:
    return f"{scheme}@{efficiency}"


@dataclass
class SweepConfig:
    schemes: tuple[str, ...] = ("GOQSM", "GOSM")
    spectral_efficiencies: tuple[int, ...] = (3,)
    detectors: tuple[str, ...] = DETECTORS
    snr_grid_db: tuple[float, ...] = ()
    # detector name -> grid overriding snr_grid_db for that detector
    detector_snr_grids: dict = field(default_factory=dict)
    # training SNRs used when no per-curve entry exists
    training_snr_db: tuple[float, ...] = ()
    # "GOQSM@3" -> training SNRs for that curve
    curve_training_snr_db: dict = field(default_factory=dict)
    n_active: int = 2
    min_bit_errors: int = 200
    max_bits: int = 10**8
    min_ber: float = 1e-6
    seed: int = 0
    workers: int = 1
    fast_path: bool = True
    block_symbols: int = 32
    channel: ChannelParams = field(default_factory=ChannelParams)
    geometry: RoomGeometry = field(default_factory=reference_geometry)
    ofdm: OfdmConfig = field(default_factory=OfdmConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    model_dir: str | None = None

    def grid_for(self, detector: str) -> tuple[float, ...]:
        return tuple(self.detector_snr_grids.get(detector, self.snr_grid_db))

    def training_snrs_for(self, scheme: str, efficiency: int) -> tuple[float, ...]:
        return tuple(self.curve_training_snr_db.get(_curve_key(scheme, efficiency), self.training_snr_db))

    def problems(self) -> list[str]:
        bad = []
        schemes = []
        for s in self.schemes:
            try:
                schemes.append(Scheme.parse(s).value)
            except ValueError as exc:
                bad.append(f"scheme: {exc}")
        if not self.schemes:
            bad.append("scheme.schemes: at least one scheme is required")
        if not self.spectral_efficiencies:
            bad.append("scheme.spectral_efficiencies: at least one value is required")
        for s in schemes:
            for se in self.spectral_efficiencies:
                try:
                    sm = SmConfig.for_spectral_efficiency(s, se, self.geometry.n_tx, self.n_active)
                    if "dnn" in self.detectors:
                        layer_sizes_for(sm)
                except ValueError as exc:
                    bad.append(f"scheme.spectral_efficiencies: {exc}")
        if not self.detectors:
            bad.append("detector.detectors: at least one detector is required")
        for d in self.detectors:
            if d not in DETECTORS:
                bad.append(f"detector.detectors: unknown detector {d!r} (expected one of {', '.join(DETECTORS)})")
        for d in self.detectors:
            grid = self.grid_for(d)
            if not grid:
                bad.append(f"sweep.snr_grid_db: empty SNR grid for detector {d!r}")
            elif list(grid) != sorted(grid):
                bad.append(f"sweep.snr_grid_db: grid for {d!r} must be sorted ascending")
            elif not all(math.isfinite(v) for v in grid):
                bad.append(f"sweep.snr_grid_db: grid for {d!r} has non-finite values")
        if "dnn" in self.detectors:
            for s in schemes:
                for se in self.spectral_efficiencies:
                    if not self.training_snrs_for(s, se):
                        bad.append(f"dnn.training_snr_db: no training SNR for {_curve_key(s, se)}")
        if self.min_bit_errors < 100:
            bad.append("sweep.min_bit_errors: must be >= 100")
        if self.max_bits <= 0:
            bad.append("sweep.max_bits: must be positive")
        if self.workers < 1:
            bad.append("sweep.workers: must be >= 1")
        if self.block_symbols < 1:
            bad.append("sweep.block_symbols: must be >= 1")
        if not 0.0 <= self.min_ber < 1.0:
            bad.append("sweep.min_ber: must lie in [0, 1)")
        return bad

    def validate(self) -> "SweepConfig":
        bad = self.problems()
        if bad:
            raise ConfigError(bad)
        return self


@dataclass(frozen=True)
class BerRecord:
    scheme: str
    detector: str
    spectral_efficiency: int
    snr_db: float
    training_snr_db: float | None
    bit_errors: int
    bits_simulated: int
    ber: float
    reliable: bool
    seed: int
    wall_time: float

    def key(self) -> tuple:
        return (self.scheme, self.detector, self.spectral_efficiency, self.training_snr_db, self.snr_db, self.seed)

    def curve(self) -> tuple:
        return (self.scheme, self.detector, self.spectral_efficiency, self.training_snr_db)


RECORD_FIELDS = tuple(f.name for f in dataclasses.fields(BerRecord))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def record_row(rec: BerRecord, with_time: bool = True) -> list[str]:
    row = [_fmt(getattr(rec, f)) for f in RECORD_FIELDS]
    if not with_time:
        row[RECORD_FIELDS.index("wall_time")] = ""
    return row


def parse_record(row: dict) -> BerRecord:
    tsnr = row["training_snr_db"]
    return BerRecord(
        scheme=row["scheme"],
        detector=row["detector"],
        spectral_efficiency=int(row["spectral_efficiency"]),
        snr_db=float(row["snr_db"]),
        training_snr_db=float(tsnr) if tsnr not in ("", None) else None,
        bit_errors=int(row["bit_errors"]),
        bits_simulated=int(row["bits_simulated"]),
        ber=float(row["ber"]),
        reliable=row["reliable"] in ("1", "True", "true", True),
        seed=int(row["seed"]),
        wall_time=float(row["wall_time"]) if row.get("wall_time") else 0.0,
    )


def records_to_csv(records: Iterable[BerRecord], with_time: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_FIELDS)
    for rec in records:
        w.writerow(record_row(rec, with_time))
    return buf.getvalue()


def records_to_json(records: Iterable[BerRecord]) -> str:
    return json.dumps([dataclasses.asdict(r) for r in records], indent=2) + "\n"


def read_records(path) -> list[BerRecord]:
    """Parse a records CSV, skipping a truncated trailing line."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                out.append(parse_record(row))
            except (KeyError, TypeError, ValueError):
                log.warning("skipping malformed row in %s: %r", path, row)
    return out


def _stable_id(*parts) -> int:
    return zlib.crc32("|".join(_fmt(p) for p in parts).encode())


def _block_task(args) -> tuple[int, int]:
    link, detector, snr_db, seed, point_id, block, n_symbols, fast_path = args
    rng = make_stream(seed, point_id, block)
    return count_bit_errors(link, detector, snr_db, n_symbols, rng, fast_path)


def run_ber_point(
    cfg: SweepConfig,
    link: Link,
    detector,
    snr_db: float,
    seed: int | None = None,
    training_snr_db: float | None = None,
    executor: Executor | None = None,
) -> BerRecord:
    """Simulate one (curve, SNR) point until ``min_bit_errors`` or ``max_bits``."""
    seed = cfg.seed if seed is None else seed
    efficiency = int(spectral_efficiency(link.sm))
    point_id = _stable_id(link.sm.scheme.value, efficiency, detector.name, training_snr_db, float(snr_db))
    bits_per_block = cfg.block_symbols * link.ofdm.n_data * link.sm.block_bits
    max_blocks = max(1, -(-cfg.max_bits // bits_per_block))
    wave = cfg.workers if executor is not None else 1
    t0 = time.perf_counter()
    errors = bits = 0
    block = 0
    done = False
    while not done and block < max_blocks:
        ids = range(block, min(block + wave, max_blocks))
        tasks = [(link, detector, float(snr_db), seed, point_id, b, cfg.block_symbols, cfg.fast_path) for b in ids]
        results = executor.map(_block_task, tasks) if executor is not None else map(_block_task, tasks)
        for e, n in results:
            errors += e
            bits += n
            block += 1
            if errors >= cfg.min_bit_errors:
                done = True
                break
        # remaining results of this wave are discarded to keep the stop index worker-independent
    return BerRecord(
        scheme=link.sm.scheme.value,
        detector=detector.name,
        spectral_efficiency=efficiency,
        snr_db=float(snr_db),
        training_snr_db=None if training_snr_db is None else float(training_snr_db),
        bit_errors=errors,
        bits_simulated=bits,
        ber=errors / bits,
        reliable=errors >= cfg.min_bit_errors,
        seed=seed,
        wall_time=round(time.perf_counter() - t0, 3),
    )


@dataclass
class TrainedDetector:
    scheme: str
    spectral_efficiency: int
    training_snr_db: float
    net: MlpNetwork
    history: list[dict]


def _model_path(cfg: SweepConfig, scheme: str, efficiency: int, tsnr: float) -> Path | None:
    if not cfg.model_dir:
        return None
    return Path(cfg.model_dir) / f"{scheme}_{efficiency}bps_train{tsnr:g}dB_seed{cfg.seed}.bin"


def train_detector(cfg: SweepConfig, link: Link, training_snr_db: float) -> TrainedDetector:
    """Train (or load from ``model_dir``) the DNN for one curve and training SNR."""
    scheme = link.sm.scheme.value
    efficiency = int(spectral_efficiency(link.sm))
    path = _model_path(cfg, scheme, efficiency, training_snr_db)
    tc = dataclasses.replace(cfg.train, training_snr_db=float(training_snr_db), rng_seed=cfg.seed)
    if path is not None and path.exists():
        saved = load_network(path)
        if saved.net.layer_sizes == layer_sizes_for(link.sm) and saved.metadata.get("train") == dataclasses.asdict(tc):
            log.info("loaded %s", path)
            return TrainedDetector(scheme, efficiency, training_snr_db, saved.net, saved.metadata.get("history", []))
    rng = make_stream(cfg.seed, _stable_id("train", scheme, efficiency, float(training_snr_db)))
    net = MlpNetwork.initialize(layer_sizes_for(link.sm), rng)
    log.info("training %s @ %d bits/s/Hz, training SNR %g dB", scheme, efficiency, training_snr_db)
    net, history = train(net, link.training_data(training_snr_db), tc, rng=rng)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        meta = {"scheme": scheme, "spectral_efficiency": efficiency, "train": dataclasses.asdict(tc), "history": history}
        save_network(path, net, cfg.seed, training_snr_db, meta)
    return TrainedDetector(scheme, efficiency, training_snr_db, net, history)


@dataclass
class SweepResult:
    records: list[BerRecord]
    histories: list[dict]
    detectors: list[TrainedDetector]


HISTORY_FIELDS = ("scheme", "spectral_efficiency", "training_snr_db", "epoch", "train_mse", "val_mse")


def histories_to_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HISTORY_FIELDS)
    for row in rows:
        w.writerow([_fmt(row[f]) for f in HISTORY_FIELDS])
    return buf.getvalue()


def history_rows(det: TrainedDetector) -> list[dict]:
    return [
        {"scheme": det.scheme, "spectral_efficiency": det.spectral_efficiency,
         "training_snr_db": float(det.training_snr_db), **row}
        for row in det.history
    ]


def run_sweep(
    cfg: SweepConfig,
    out: str | Path | None = None,
    resume: bool = True,
    networks: dict | None = None,
) -> SweepResult:
    """Run every (scheme, efficiency, detector, training SNR, SNR) point.

    With ``out`` set, records are appended to that CSV as they complete and,
    when ``resume`` is true, points already present in it are not re-run.
    ``networks`` maps ``(scheme, efficiency, training_snr_db)`` to a
    pre-trained :class:`MlpNetwork`, skipping training for that curve.
    """
    cfg.validate()
    channel = build_channel(cfg.channel, cfg.geometry)
    done: dict[tuple, BerRecord] = {}
    part = None
    if out is not None:
        out = Path(out)
        part = out.with_name(out.name + ".part")
        if resume:
            for path in (out, part):
                if path.exists():
                    done.update((r.key(), r) for r in read_records(path))
    records: list[BerRecord] = []
    trained: list[TrainedDetector] = []
    executor = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    sink = None
    try:
        if part is not None:
            sink = open(part, "w", newline="")
            sink.write(records_to_csv([]))
        for scheme in (Scheme.parse(s).value for s in cfg.schemes):
            for se in cfg.spectral_efficiencies:
                sm = SmConfig.for_spectral_efficiency(scheme, se, cfg.geometry.n_tx, cfg.n_active)
                link = Link(sm, channel, cfg.ofdm)
                for det_name in cfg.detectors:
                    grid = cfg.grid_for(det_name)
                    if det_name == "ml-mrc":
                        curves = [(None, MlMrcDetector(sm))]
                    else:
                        curves = []
                        for tsnr in cfg.training_snrs_for(scheme, se):
                            keys = [(scheme, "dnn", se, float(tsnr), float(s), cfg.seed) for s in grid]
                            pre = (networks or {}).get((scheme, se, float(tsnr)))
                            if pre is not None:
                                curves.append((float(tsnr), DnnDetector(pre)))
                            elif _curve_complete(done, keys, cfg):
                                curves.append((float(tsnr), None))
                            else:
                                td = train_detector(cfg, link, tsnr)
                                trained.append(td)
                                curves.append((float(tsnr), DnnDetector(td.net)))
                    for tsnr, detector in curves:
                        for snr in grid:
                            key = (scheme, det_name, se, tsnr, float(snr), cfg.seed)
                            if key in done:
                                rec = done[key]
                            elif detector is None:
                                break
                            else:
                                rec = run_ber_point(cfg, link, detector, snr, training_snr_db=tsnr, executor=executor)
                                log.info("%s %s %d tsnr=%s snr=%g ber=%.3e (%d errors)", scheme, det_name, se,
                                         tsnr, snr, rec.ber, rec.bit_errors)
                            records.append(rec)
                            if sink is not None:
                                sink.write(records_to_csv([rec]).split("\n", 1)[1])
                                sink.flush()
                            if rec.ber < cfg.min_ber or rec.bit_errors == 0:
                                break
        if sink is not None:
            sink.close()
            sink = None
            part.replace(out)
    finally:
        if sink is not None:
            sink.close()
        if executor is not None:
            executor.shutdown()
    histories = [row for td in trained for row in history_rows(td)]
    return SweepResult(records, histories, trained)


def _curve_complete(done: dict, keys: list[tuple], cfg: SweepConfig) -> bool:
    """True when a resumed curve needs no more simulation (all points present or it already terminated)."""
    for k in keys:
        rec = done.get(k)
        if rec is None:
            return False
        if rec.ber < cfg.min_ber or rec.bit_errors == 0:
            return True
    return True


def find_snr_at_ber(records: Sequence, target_ber: float = 1e-3) -> float:
    """SNR at which ``target_ber`` is reached, by log-linear interpolation.

    ``records`` is one curve: BerRecords or ``(snr_db, ber)`` pairs. Points with
    zero BER carry no log-domain information and are ignored.
    """
    pts = sorted(
        (float(r.snr_db), float(r.ber)) if isinstance(r, BerRecord) else (float(r[0]), float(r[1]))
        for r in records
    )
    pts = [(s, b) for s, b in pts if b > 0.0]
    for s, b in pts:
        if b == target_ber:
            return s
    lt = math.log10(target_ber)
    for (s0, b0), (s1, b1) in zip(pts, pts[1:]):
        if b0 > target_ber > b1:
            l0, l1 = math.log10(b0), math.log10(b1)
            return s0 + (lt - l0) * (s1 - s0) / (l1 - l0)
    raise ValueError(f"target BER {target_ber:g} is not bracketed by the records")


def group_curves(records: Iterable[BerRecord]) -> dict[tuple, list[BerRecord]]:
    curves: dict[tuple, list[BerRecord]] = {}
    for rec in records:
        curves.setdefault(rec.curve(), []).append(rec)
    return curves


def snr_at_ber_table(records: Iterable[BerRecord], target_ber: float = 1e-3) -> dict[tuple, float | None]:
    """Required SNR per curve (``None`` when the target is not bracketed)."""
    out = {}
    for curve, recs in group_curves(records).items():
        try:
            out[curve] = find_snr_at_ber(recs, target_ber)
        except ValueError:
            out[curve] = None
    return out


def best_required_snr(
    table: dict[tuple, float | None], scheme: str, detector: str, efficiency: int
) -> tuple[float | None, float | None]:
    """Lowest required SNR over training SNRs: ``(snr, training_snr)``."""
    best = (None, None)
    for (s, d, se, tsnr), snr in table.items():
        if (s, d, se) == (scheme, detector, efficiency) and snr is not None:
            if best[0] is None or snr < best[0]:
                best = (snr, tsnr)
    return best
