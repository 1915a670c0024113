"""Command-line entry point (``goqsm-sim``)."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path

from goqsm.channel import build_channel
from goqsm.codec import SmConfig
from goqsm.config import PRESETS, load_config, preset
from goqsm.dnn import load_network, save_network
from goqsm.harness import (
    ConfigError,
    SweepConfig,
    histories_to_csv,
    history_rows,
    read_records,
    records_to_csv,
    records_to_json,
    run_sweep,
    snr_at_ber_table,
    train_detector,
)
from goqsm.link import Link


def _sweep_config(args) -> SweepConfig:
    base = preset(args.preset) if getattr(args, "preset", None) else SweepConfig()
    cfg = load_config(args.config, base) if getattr(args, "config", None) else base
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "workers", None) is not None:
        cfg.workers = args.workers
    if getattr(args, "skip_ofdm", False):
        cfg.fast_path = True
    if getattr(args, "full_ofdm", False):
        cfg.fast_path = False
    if getattr(args, "reduced", None):
        cfg.train = cfg.train.scaled(args.reduced)
    return cfg


def _write(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_channel_gain(args) -> int:
    cfg = _sweep_config(args)
    ch = build_channel(cfg.channel, cfg.geometry)
    lines = [",".join(f"{v:.6g}" for v in row) for row in ch.h]
    _write("\n".join(lines) + "\n", args.out)
    return 0


def cmd_train_dnn(args) -> int:
    cfg = _sweep_config(args)
    cfg.model_dir = None
    ch = build_channel(cfg.channel, cfg.geometry)
    sm = SmConfig.for_spectral_efficiency(args.scheme, args.efficiency, cfg.geometry.n_tx, cfg.n_active)
    td = train_detector(cfg, Link(sm, ch, cfg.ofdm), args.training_snr)
    meta = {"scheme": td.scheme, "spectral_efficiency": td.spectral_efficiency,
            "train": dataclasses.asdict(dataclasses.replace(cfg.train, training_snr_db=args.training_snr,
                                                            rng_seed=cfg.seed)),
            "history": td.history}
    save_network(args.out, td.net, cfg.seed, args.training_snr, meta)
    if args.history:
        _write(histories_to_csv(history_rows(td)), args.history)
    return 0


def cmd_sweep_ber(args) -> int:
    cfg = _sweep_config(args)
    networks = {}
    for path in args.model or []:
        saved = load_network(path)
        meta = saved.metadata
        networks[(meta["scheme"], int(meta["spectral_efficiency"]), float(saved.training_snr_db))] = saved.net
    csv_out = args.out if args.format == "csv" and args.out not in (None, "-") else None
    result = run_sweep(cfg, out=csv_out, resume=not args.no_resume, networks=networks)
    if csv_out is None:
        text = records_to_json(result.records) if args.format == "json" else records_to_csv(result.records)
        _write(text, args.out)
    if args.mse_out and result.histories:
        _write(histories_to_csv(result.histories), args.mse_out)
    return 0


def cmd_snr_at_ber(args) -> int:
    table = snr_at_ber_table(read_records(args.records), args.target)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["scheme", "detector", "spectral_efficiency", "training_snr_db", "snr_db_at_target"])
    for (scheme, det, se, tsnr), snr in sorted(table.items(), key=lambda kv: tuple(str(k) for k in kv[0])):
        w.writerow([scheme, det, se, "" if tsnr is None else repr(tsnr), "" if snr is None else f"{snr:.3f}"])
    return 0


def cmd_mse_history(args) -> int:
    if not args.preset and not args.config:
        args.preset = "fig3"
    cfg = _sweep_config(args)
    ch = build_channel(cfg.channel, cfg.geometry)
    rows = []
    for scheme in cfg.schemes:
        for se in cfg.spectral_efficiencies:
            sm = SmConfig.for_spectral_efficiency(scheme, se, cfg.geometry.n_tx, cfg.n_active)
            for tsnr in cfg.training_snrs_for(sm.scheme.value, se):
                rows.extend(history_rows(train_detector(cfg, Link(sm, ch, cfg.ofdm), tsnr)))
    _write(histories_to_csv(rows), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="goqsm-sim", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, preset_choices=PRESETS):
        sp.add_argument("--config", help="INI configuration file")
        sp.add_argument("--preset", choices=preset_choices)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--out", help="output path (default: stdout)")

    sp = sub.add_parser("channel-gain", help="print the channel matrix as CSV")
    common(sp)
    sp.set_defaults(func=cmd_channel_gain)

    sp = sub.add_parser("train-dnn", help="train one DNN detector and save it")
    common(sp)
    sp.add_argument("--scheme", required=True, choices=["GOQSM", "GOSM"])
    sp.add_argument("--efficiency", type=int, required=True, help="bits/s/Hz")
    sp.add_argument("--training-snr", type=float, required=True, help="dB")
    sp.add_argument("--reduced", type=float, help="divide training/validation set sizes by this factor")
    sp.add_argument("--history", help="write the per-epoch MSE CSV here")
    sp.set_defaults(func=cmd_train_dnn)

    sp = sub.add_parser("sweep-ber", help="run a BER-vs-SNR sweep")
    common(sp)
    sp.add_argument("--format", choices=["csv", "json"], default="csv")
    sp.add_argument("--model", action="append", help="pre-trained network file (repeatable)")
    sp.add_argument("--mse-out", help="write per-epoch MSE CSV of trained detectors here")
    sp.add_argument("--no-resume", action="store_true", help="ignore existing rows in --out")
    sp.add_argument("--reduced", type=float, help="divide training/validation set sizes by this factor")
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--skip-ofdm", action="store_true", help="per-subcarrier fast path")
    g.add_argument("--full-ofdm", action="store_true", help="simulate time-domain OFDM")
    sp.set_defaults(func=cmd_sweep_ber)

    sp = sub.add_parser("snr-at-ber", help="required SNR per curve from a records CSV")
    sp.add_argument("records")
    sp.add_argument("--target", type=float, default=1e-3)
    sp.set_defaults(func=cmd_snr_at_ber)

    sp = sub.add_parser("mse-history", help="train detectors and write MSE-vs-epoch CSV")
    common(sp)
    sp.add_argument("--reduced", type=float, help="divide training/validation set sizes by this factor")
    sp.set_defaults(func=cmd_mse_history)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
