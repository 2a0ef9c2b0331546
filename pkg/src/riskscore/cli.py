"""Command line entry point: ``riskscore {run,stats,codec,synth}``.

Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 data
consistency error (bad dataset lines, conflicting records, codec failures).
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import ble
from .contact_graph import DatasetFormat, SyntheticSpec, generate_synthetic, load_dataset, occupancy_stats, serialize
from .errors import (
    CodecError,
    ConfigError,
    ConsistencyError,
    DatasetParseError,
    InvalidSpecError,
    ParameterError,
)
from .experiment import ExperimentConfig, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_DATA = 0, 1, 2, 3


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_dataset_args(p):
    p.add_argument("--delimiter", choices=["comma", "whitespace"], default=None)
    p.add_argument("--time-unit", choices=["epoch", "seconds"], default=None)
    p.add_argument("--delta-t", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riskscore", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="sweep the (beta, gamma, i0) grid")
    run.add_argument("--config", help="JSON file with ExperimentConfig keys")
    run.add_argument("--dataset")
    run.add_argument("--synthetic", metavar="PERSONS,ROOMS,EPOCHS[,DWELL]")
    run.add_argument("--out")
    run.add_argument("--seed", type=int)
    run.add_argument("--runs", type=int)
    run.add_argument("--beta", type=_floats)
    run.add_argument("--gamma", type=_floats)
    run.add_argument("--i0", type=_floats)
    run.add_argument("--threshold", type=float)
    run.add_argument("--keep-runs", action="store_true", default=None)
    run.add_argument("--workers", type=int, default=1)
    _add_dataset_args(run)

    stats = sub.add_parser("stats", help="occupancy statistics of a dataset")
    stats.add_argument("dataset")
    stats.add_argument("--out", help="directory for per_epoch.csv, heatmap.csv, rooms.csv")
    stats.add_argument("--total-rooms", type=int, help="room count including never-occupied rooms")
    _add_dataset_args(stats)

    codec = sub.add_parser("codec", help="encode/decode advertising payloads")
    csub = codec.add_subparsers(dest="action", required=True)
    enc = csub.add_parser("encode")
    enc.add_argument("risk", type=float)
    enc.add_argument("weight", type=float)
    enc.add_argument("--uuid", help="32 hex digits")
    dec = csub.add_parser("decode")
    dec.add_argument("payload", help="hex string")
    dec.add_argument("--uuid", help="32 hex digits")

    synth = sub.add_parser("synth", help="write a synthetic dataset")
    synth.add_argument("--persons", type=int, default=50)
    synth.add_argument("--rooms", type=int, default=5)
    synth.add_argument("--epochs", type=int, default=200)
    synth.add_argument("--dwell", type=int, default=10)
    synth.add_argument("--delta-t", type=int, default=20)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", help="output file (default stdout)")
    return parser


def _dataset_format(args) -> DatasetFormat:
    return DatasetFormat(
        delimiter=args.delimiter or "comma",
        time_unit=args.time_unit or "epoch",
        delta_t=args.delta_t or 20,
    )


def _uuid(text):
    if text is None:
        return ble.SERVICE_UUID
    try:
        raw = bytes.fromhex(text.replace("-", ""))
    except ValueError:
        raw = b""
    if len(raw) != 16:
        raise ConfigError(f"uuid must be 16 bytes of hex, got {text!r}")
    return raw


def cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config).to_dict() if args.config else {}
    if args.dataset:
        cfg["dataset"] = args.dataset
        cfg.pop("synthetic", None)
    if args.synthetic:
        try:
            parts = [int(x) for x in args.synthetic.split(",")]
        except ValueError:
            raise ConfigError(f"bad --synthetic {args.synthetic!r}") from None
        if len(parts) not in (3, 4):
            raise ConfigError("--synthetic takes PERSONS,ROOMS,EPOCHS[,DWELL]")
        cfg["synthetic"] = dict(zip(("persons", "rooms", "epochs", "dwell"), parts))
        cfg["dataset"] = None
    overrides = {
        "out": args.out,
        "seed": args.seed,
        "runs": args.runs,
        "beta": args.beta,
        "gamma": args.gamma,
        "i0": args.i0,
        "threshold": args.threshold,
        "keep_runs": args.keep_runs,
        "delimiter": args.delimiter,
        "time_unit": args.time_unit,
        "delta_t": args.delta_t,
    }
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    config = ExperimentConfig.from_dict(cfg)
    out = run_experiment(config, workers=args.workers)
    print(out)
    return EXIT_OK


def cmd_stats(args) -> int:
    graph = load_dataset(args.dataset, _dataset_format(args))
    st = occupancy_stats(graph, total_rooms=args.total_rooms)
    print(f"# persons: {len(graph.persons)}")
    print(f"# rooms: {st.total_rooms}")
    print(f"# epochs: {graph.n_epochs}")
    print(f"# max_mean_density: {st.max_mean_density:g}")
    print(f"# max_occupied_fraction: {st.max_occupied_fraction:.4f}")
    per_epoch = [("epoch", "people", "rooms_occupied", "mean_density")]
    per_epoch += [
        (t, int(st.people_per_epoch[t]), int(st.rooms_occupied_per_epoch[t]), f"{st.mean_density_per_epoch[t]:g}")
        for t in range(graph.n_epochs)
    ]
    if args.out is None:
        csv.writer(sys.stdout, lineterminator="\n").writerows(per_epoch)
        return EXIT_OK
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "per_epoch.csv", "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(per_epoch)
    with open(out / "heatmap.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("epoch", "room", "people"))
        counts = st.people_per_room_per_epoch
        for t, k in zip(*counts.nonzero()):
            w.writerow((int(t), st.rooms[k], int(counts[t, k])))
    with open(out / "rooms.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("room", "epochs_occupied"))
        w.writerows((room, int(c)) for room, c in zip(st.rooms, st.room_occupancy_counts))
    return EXIT_OK


def cmd_codec(args) -> int:
    uuid = _uuid(args.uuid)
    if args.action == "encode":
        try:
            print(ble.encode(args.risk, args.weight, uuid).hex())
        except CodecError as e:
            print(f"error: {e.kind}")
            return EXIT_DATA
        return EXIT_OK
    try:
        raw = bytes.fromhex(args.payload)
    except ValueError:
        print("error: hex")
        return EXIT_CONFIG
    try:
        risk, weight = ble.decode(raw, uuid)
    except CodecError as e:
        print(f"error: {e.kind}")
        return EXIT_DATA
    print(f"risk={risk:.2f} weight={weight:.2f}")
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = SyntheticSpec(args.persons, args.rooms, args.epochs, args.dwell, args.delta_t)
    text = serialize(generate_synthetic(spec, args.seed))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "stats": cmd_stats, "codec": cmd_codec, "synth": cmd_synth}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ParameterError, InvalidSpecError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    except (DatasetParseError, ConsistencyError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
