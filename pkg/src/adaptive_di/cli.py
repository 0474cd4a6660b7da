"""Command-line entry point.

Subcommands: simulate, ingest, estimate, affinity, velocity, type-matrix.
Exit status is 0 on success, 1 on usage/configuration errors and 2 on data
or numerical errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import analysis, ingest, pipeline, simulate
from .config import KEYS, SIDECAR, dump_config, parse_config_text, resolve
from .errors import AdiError, DomainError, ParameterError

log = logging.getLogger("adaptive_di")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _add_config_flags(p):
    g = p.add_argument_group("configuration (override --config)")
    for key in KEYS:
        flag = "--" + key.replace("_", "-")
        g.add_argument(flag, dest=f"cfg_{key}", metavar=key.upper(), default=argparse.SUPPRESS)
    g.add_argument("--out", dest="cfg_output_dir", metavar="DIR", default=argparse.SUPPRESS,
                   help="alias for --output-dir")
    p.add_argument("--config", type=Path, help="flat key=value configuration file")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $ADI_THREADS or CPU count)")


def build_parser():
    parser = _Parser(prog="adaptive-di", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="piecewise-constant bound experiment -> bound_report.csv")
    _add_config_flags(p)

    p = sub.add_parser("ingest", help="annotation file -> canonical tracks.csv")
    p.add_argument("annotations", type=Path)
    _add_config_flags(p)

    p = sub.add_parser("estimate", help="tracks.csv -> adi_series.csv")
    p.add_argument("tracks", type=Path)
    p.add_argument("--scene", help="scene/video id written to every row (default: file stem)")
    p.add_argument("--ami", action="store_true", help="also write ami_series.csv")
    _add_config_flags(p)

    p = sub.add_parser("affinity", help="adi_series.csv files -> affinity.csv, distance.csv")
    p.add_argument("series", type=Path, nargs="+")
    _add_config_flags(p)

    p = sub.add_parser("velocity", help="tracks.csv + adi_series.csv -> velocity.csv")
    p.add_argument("tracks", type=Path)
    p.add_argument("series", type=Path)
    _add_config_flags(p)

    p = sub.add_parser("type-matrix", help="label-pair mean ADI -> type_matrix.csv")
    p.add_argument("--tracks", type=Path, action="append", required=True,
                   help="tracks.csv (repeat; paired in order with --series)")
    p.add_argument("--series", type=Path, action="append", required=True)
    _add_config_flags(p)
    return parser


def _threads(arg):
    if arg is not None:
        n = arg
    elif os.environ.get("ADI_THREADS"):
        try:
            n = int(os.environ["ADI_THREADS"])
        except ValueError:
            raise UsageError("ADI_THREADS must be an integer") from None
    else:
        n = os.cpu_count() or 1
    if n < 1:
        raise UsageError("--threads must be at least 1")
    return n


def _inside(out, name):
    path = (out / name).resolve()
    if out.resolve() not in path.parents:
        raise UsageError(f"refusing to write {name!r} outside {out}")
    return path


def _cmd_simulate(args, cfg, out, threads):
    spec, hyper = cfg.piecewise_spec(), cfg.hyper()
    report = simulate.run_bound_experiment(spec, hyper, cfg.trials, threads=threads)
    simulate.write_report_csv([simulate.report_row(spec, hyper, report)],
                              _inside(out, "bound_report.csv"))
    summary = simulate.render_summary(spec, hyper, report)
    _inside(out, "bound_report.txt").write_text(summary)
    print(summary, end="")
    return ["bound_report.csv", "bound_report.txt"]


def _cmd_ingest(args, cfg, out, threads):
    tracks = ingest.read_annotations(args.annotations)
    sampled = ingest.prepare_tracks(tracks, cfg.window, cfg.stride)
    ingest.write_tracks_csv(sampled, _inside(out, "tracks.csv"))
    log.info("ingested %d tracks", len(sampled))
    return ["tracks.csv"]


def _cmd_estimate(args, cfg, out, threads):
    tracks = ingest.read_tracks_csv(args.tracks)
    scene = args.scene or args.tracks.stem
    got = pipeline.compute_scene(tracks, cfg.pair_config(), scene_id=scene,
                                 threads=threads, ami=args.ami)
    records, ami = got if args.ami else (got, None)
    pipeline.write_adi_csv(records, _inside(out, "adi_series.csv"))
    written = ["adi_series.csv"]
    if args.ami:
        pipeline.write_ami_csv(ami, _inside(out, "ami_series.csv"), scene)
        written.append("ami_series.csv")
    log.info("%d interaction records", len(records))
    return written


def _cmd_affinity(args, cfg, out, threads):
    records = [r for path in args.series for r in pipeline.read_adi_csv(path)]
    A = analysis.affinity_matrix(records, cfg.max_lag, cfg.min_overlap)
    analysis.write_matrix_csv(A.values, A.keys, _inside(out, "affinity.csv"))
    analysis.write_matrix_csv(analysis.to_distance(A), A.keys, _inside(out, "distance.csv"))
    return ["affinity.csv", "distance.csv"]


def _cmd_velocity(args, cfg, out, threads):
    tracks = {t.actor_id: t for t in ingest.read_tracks_csv(args.tracks)}
    rows = []
    for rec in pipeline.read_adi_csv(args.series):
        i, j = rec.pair
        if i not in tracks or j not in tracks:
            raise DomainError(f"{args.series}: actor pair {i},{j} missing from tracks")
        for t, vi, vj, tot, ang in analysis.pair_velocity(tracks[i], tracks[j]):
            rows.append((rec.key, t, vi, vj, tot, ang))
    analysis.write_velocity_csv(rows, _inside(out, "velocity.csv"))
    return ["velocity.csv"]


def _cmd_type_matrix(args, cfg, out, threads):
    if len(args.tracks) != len(args.series):
        raise UsageError("--tracks and --series must be given the same number of times")
    records = []
    for tpath, spath in zip(args.tracks, args.series):
        labels = {t.actor_id: t.label for t in ingest.read_tracks_csv(tpath)}
        records.extend(pipeline.read_adi_csv(spath, labels))
    labels, means, counts = analysis.type_average_matrix(records)
    analysis.write_type_matrix_csv(labels, means, counts, _inside(out, "type_matrix.csv"))
    return ["type_matrix.csv"]


COMMANDS = {
    "simulate": _cmd_simulate,
    "ingest": _cmd_ingest,
    "estimate": _cmd_estimate,
    "affinity": _cmd_affinity,
    "velocity": _cmd_velocity,
    "type-matrix": _cmd_type_matrix,
}


def _inputs(args):
    out = []
    for name in ("annotations", "tracks", "series"):
        v = getattr(args, name, None)
        if v is None:
            continue
        out.extend(str(p) for p in (v if isinstance(v, list) else [v]))
    return out


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_")}
        file_values = {}
        if args.config is not None:
            try:
                text = args.config.read_text()
            except OSError as exc:
                raise UsageError(f"cannot read config: {exc}") from None
            file_values = parse_config_text(text, str(args.config))
        cfg = resolve(file_values, overrides)
        threads = _threads(args.threads)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ParameterError as exc:
        print(f"adaptive-di: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = COMMANDS[args.command](args, cfg, out, threads)
        comments = [f"command: {args.command}"] + [f"input: {p}" for p in _inputs(args)]
        _inside(out, SIDECAR).write_text(dump_config(cfg, comments))
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ParameterError as exc:
        print(f"adaptive-di: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AdiError, OSError, ValueError) as exc:
        print(f"adaptive-di: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    for name in written:
        log.info("wrote %s", out / name)
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
