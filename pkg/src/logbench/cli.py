"""Unified command-line front end: parse -> group -> stats/complexity -> eval.

Artifacts are written atomically (temp file + rename) and every command
drops a JSON manifest capturing the tool version, arguments, input
digests, realized sample sizes, and timings, so a run can be replayed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import tempfile
import time
from contextlib import contextmanager
from pathlib import Path

from . import __version__
from .complexity import DEFAULT_ENTROPY_NS, entropy_report, lz_complexity
from .detectors import DetectorBuilder, STUDY_DETECTORS, make_detector
from .errors import LogbenchError, ValidationError
from .evaluation import (
    EvalConfig,
    split,
    threshold_sweep,
    evaluate_study,
    write_bests_csv,
    write_results_csv,
    write_scores_csv,
    write_summary_csv,
    write_sweep_csv,
)
from .ingest import (
    IngestReport,
    bundled_profile_names,
    dir_label_map,
    load_profile,
    load_template_catalog,
    parse_file,
    parse_tree,
    read_events,
    write_events,
)
from .sequencing import (
    GroupingReport,
    attach_sequence_labels,
    dedupe_replicated,
    group_by_identifier,
    group_by_window,
    lift_event_labels,
    load_label_file,
    read_sequences,
    write_sequences,
)
from .stats import (
    event_frequency_dist,
    interarrival_dist,
    length_dist,
    summarize,
    summary_lines,
    top_sequences,
)

LOGGER = logging.getLogger("logbench.cli")

DATA_DIR_ENV = "LOGBENCH_DATA_DIR"


@contextmanager
def atomic_write(path: Path):
    """Write to a sibling temp file and rename on success; no partial artifacts."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    handle = os.fdopen(fd, "w", encoding="utf-8", newline="")
    try:
        yield handle
        handle.close()
        os.replace(tmp, path)
    except BaseException:
        handle.close()
        os.unlink(tmp)
        raise


def resolve_input(path: str) -> Path:
    """Resolve an input path, falling back to the dataset root directory."""
    p = Path(path)
    if p.exists():
        return p
    root = os.environ.get(DATA_DIR_ENV)
    if root:
        candidate = Path(root) / path
        if candidate.exists():
            return candidate
    raise ValidationError(f"input not found: {path}")


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _digest_inputs(paths: list[Path]) -> dict[str, str]:
    out = {}
    for p in paths:
        if p.is_dir():
            out[str(p)] = "directory"
        else:
            out[str(p)] = sha256_file(p)
    return out


class Manifest:
    """Replay record written next to (or inside) each command's output."""

    def __init__(self, args: argparse.Namespace, inputs: list[Path]):
        self.started = time.perf_counter()
        self.data = {
            "tool": "logbench",
            "version": __version__,
            "command_line": sys.argv[1:] if sys.argv[0].endswith(("logbench", "cli.py")) else None,
            "args": {k: v for k, v in sorted(vars(args).items()) if k != "func"},
            "inputs": _digest_inputs(inputs),
            "realized": {},
            "warnings": [],
            "timings_sec": {},
        }
        self.data["config_hash"] = hashlib.sha256(
            json.dumps(self.data["args"], sort_keys=True, default=str).encode()
        ).hexdigest()

    def record(self, key: str, value) -> None:
        self.data["realized"][key] = value

    def warn(self, message: str) -> None:
        self.data["warnings"].append(message)
        LOGGER.warning("%s", message)

    def time_stage(self, stage: str) -> None:
        now = time.perf_counter()
        self.data["timings_sec"][stage] = round(now - self.started, 3)
        self.started = now

    def write(self, path: Path) -> None:
        with atomic_write(path) as handle:
            json.dump(self.data, handle, indent=2, default=str)
            handle.write("\n")


def _manifest_path_for(out: Path, is_dir: bool) -> Path:
    return out / "manifest.json" if is_dir else out.with_name(out.name + ".manifest.json")


def cmd_parse(args: argparse.Namespace) -> int:
    profile = load_profile(args.profile)
    catalog = None
    if not profile.tokenized:
        if not args.templates:
            raise ValidationError("--templates is required for non-tokenized profiles")
        catalog = load_template_catalog(resolve_input(args.templates))
    source = resolve_input(args.input)
    inputs = [source] + ([resolve_input(args.templates)] if args.templates else [])
    manifest = Manifest(args, inputs)
    report = IngestReport()
    out = Path(args.out)

    unmatched_handle = None
    try:
        if args.unmatched_out:
            Path(args.unmatched_out).parent.mkdir(parents=True, exist_ok=True)
            unmatched_handle = open(args.unmatched_out, "w", encoding="utf-8")
        if source.is_dir():
            events = parse_tree(
                source, catalog, profile, report=report, unmatched_sink=unmatched_handle
            )
        else:
            events = parse_file(
                source, catalog, profile, report=report, unmatched_sink=unmatched_handle
            )
        with atomic_write(out) as handle:
            rows = write_events(events, handle, keep_unidentified=args.keep_unidentified)
    finally:
        if unmatched_handle is not None:
            unmatched_handle.close()

    if source.is_dir() and profile.label_source == "file-dir":
        labels = dir_label_map(source, profile)
        label_path = out.with_name(out.name + ".labels.csv")
        with atomic_write(label_path) as handle:
            handle.write("seq_id,label\n")
            for sid in sorted(labels):
                lab = labels[sid]
                value = (lab.tag or "anomaly") if lab.anomalous else "normal"
                handle.write(f"{sid},{value}\n")
        print(f"wrote per-file labels to {label_path}")

    manifest.time_stage("parse")
    manifest.record("lines_total", report.lines_total)
    manifest.record("matched_lines", report.matched_lines)
    manifest.record("unmatched_lines", report.unmatched_lines)
    manifest.record("invalid_lines", report.invalid_lines)
    manifest.record("parsed_events", report.parsed_events)
    manifest.record("no_id_lines", report.no_id_lines)
    manifest.record("rows_written", rows)
    if report.timestamp_error_count:
        manifest.warn(f"{report.timestamp_error_count} lines had unparseable timestamps")
    manifest.write(_manifest_path_for(out, is_dir=False))
    print(
        f"{report.lines_total} lines: {report.matched_lines} matched, "
        f"{report.unmatched_lines} unmatched, {report.invalid_lines} invalid; "
        f"{report.parsed_events} parsed events -> {out}"
    )
    return 0


def cmd_group(args: argparse.Namespace) -> int:
    source = resolve_input(args.input)
    manifest = Manifest(args, [source])
    events = read_events(source)
    if args.mode in ("id", "file"):
        greport = GroupingReport()
        seqs = group_by_identifier(events, report=greport)
        if args.mode == "file":
            for seq in seqs:
                seq.origin = "file"
        manifest.record("events_total", greport.events_total)
        manifest.record("discarded_no_id", greport.discarded_no_id)
    else:
        if not args.window:
            raise ValidationError("--window is required for window mode")
        seqs = group_by_window(dedupe_replicated(events), args.window, args.step)

    labeled_via_events = 0
    if args.labels:
        labels = load_label_file(resolve_input(args.labels))
        seqs, unlabeled = attach_sequence_labels(seqs, labels)
        manifest.record("unlabeled_excluded", len(unlabeled))
    else:
        for seq in seqs:
            if seq.label is None and seq.event_labels is not None:
                lift_event_labels(seq)
                labeled_via_events += 1
        manifest.record("labels_lifted_from_events", labeled_via_events)

    out = Path(args.out)
    with atomic_write(out) as handle:
        rows = write_sequences(seqs, handle)
    manifest.time_stage("group")
    manifest.record("sequences_written", rows)
    manifest.write(_manifest_path_for(out, is_dir=False))
    print(f"{rows} sequences -> {out}")
    return 0


def _load_labeled_sequences(path: Path):
    seqs = read_sequences(path)
    labeled = [s for s in seqs if s.label is not None]
    dropped = len(seqs) - len(labeled)
    if dropped:
        LOGGER.warning("dropped %d unlabeled sequences", dropped)
    return labeled, dropped


def cmd_stats(args: argparse.Namespace) -> int:
    source = resolve_input(args.input)
    manifest = Manifest(args, [source])
    seqs, dropped = _load_labeled_sequences(source)
    out_dir = Path(args.out_dir)

    summary = summarize(seqs)
    with atomic_write(out_dir / "summary.txt") as handle:
        handle.write("\n".join(summary_lines(summary)) + "\n")

    with atomic_write(out_dir / "event_frequencies.csv") as handle:
        handle.write("event_id,normal_count,anomalous_count\n")
        for event_id, n, a in event_frequency_dist(seqs):
            handle.write(f"{event_id},{n},{a}\n")

    with atomic_write(out_dir / "length_distribution.csv") as handle:
        handle.write("length,normal_count,anomalous_count\n")
        for length, n, a in length_dist(seqs):
            handle.write(f"{length},{n},{a}\n")

    with atomic_write(out_dir / "top_sequences.csv") as handle:
        handle.write("class,count,events\n")
        for cls, items in top_sequences(seqs, args.top_k).items():
            for count, events in items:
                handle.write(f"{cls},{count},{' '.join(map(str, events))}\n")

    with atomic_write(out_dir / "interarrival.csv") as handle:
        handle.write("class,pair,min,q1,median,q3,max,count\n")
        if args.interarrival_by_pair:
            for cls, pairs in interarrival_dist(seqs, by_pair=True).items():
                for pair, s in pairs.items():
                    handle.write(
                        f"{cls},{pair[0]}->{pair[1]},{s.minimum},{s.q1},{s.median},{s.q3},{s.maximum},{s.count}\n"
                    )
        else:
            for cls, s in interarrival_dist(seqs).items():
                handle.write(
                    f"{cls},,{s.minimum},{s.q1},{s.median},{s.q3},{s.maximum},{s.count}\n"
                )

    manifest.time_stage("stats")
    manifest.record("sequences", len(seqs))
    manifest.record("unlabeled_dropped", dropped)
    manifest.write(out_dir / "manifest.json")
    print("\n".join(summary_lines(summary)))
    print(f"reports -> {out_dir}")
    return 0


def _parse_entropy_ns(spec: str) -> tuple[int, ...]:
    spec = spec.strip()
    if ".." in spec:
        lo, hi = spec.split("..", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(part) for part in spec.split(","))


def cmd_complexity(args: argparse.Namespace) -> int:
    source = resolve_input(args.input)
    manifest = Manifest(args, [source])
    seqs = read_sequences(source)
    ns = _parse_entropy_ns(args.entropy_n) if args.entropy_n else DEFAULT_ENTROPY_NS
    out = Path(args.out)
    with atomic_write(out) as handle:
        handle.write("measure,N,value\n")
        for entry in entropy_report(seqs, ns):
            handle.write(f"entropy,{entry.n},{entry.total_entropy:.6f}\n")
            handle.write(f"normalized_entropy,{entry.n},{entry.normalized_entropy:.6f}\n")
            handle.write(f"distinct_ngrams,{entry.n},{entry.distinct_ngrams}\n")
            if entry.degenerate:
                manifest.warn(f"no {entry.n}-grams observed; entropy entry degenerate")
        if args.lz:
            curve = lz_complexity(seqs, count_trailing=args.lz_count_trailing)
            for events_processed, value in curve.points:
                handle.write(f"lz_complexity,{events_processed},{value}\n")
            manifest.record("lz_final_complexity", curve.final_complexity)
    manifest.time_stage("complexity")
    manifest.record("sequences", len(seqs))
    manifest.write(_manifest_path_for(out, is_dir=False))
    print(f"complexity measures -> {out}")
    return 0


def _load_for_eval(args: argparse.Namespace):
    source = resolve_input(args.input)
    if args.granularity == "event":
        greport = GroupingReport()
        seqs = group_by_identifier(read_events(source), report=greport)
        for seq in seqs:
            if seq.event_labels is not None:
                lift_event_labels(seq)
        seqs = [s for s in seqs if s.label is not None]
    else:
        seqs, _ = _load_labeled_sequences(source)
    return source, seqs


def cmd_eval(args: argparse.Namespace) -> int:
    source, seqs = _load_for_eval(args)
    manifest = Manifest(args, [source])
    config = EvalConfig(
        train_fraction=args.train_frac,
        repetitions=args.runs,
        rng_seed=args.seed,
        granularity=args.granularity,
    )
    detector_specs = [d.strip() for d in args.detectors.split(",") if d.strip()]
    factory = DetectorBuilder(args.ecvc_norm, args.ngram_norm, args.ngram_pad)
    report = evaluate_study(
        seqs,
        config,
        detector_specs,
        detector_factory=factory,
        jobs=args.jobs,
        dump_run0_scores=args.dump_scores,
    )
    out_dir = Path(args.out_dir)
    with atomic_write(out_dir / "results.csv") as handle:
        write_results_csv(report, handle)
    with atomic_write(out_dir / "summary.csv") as handle:
        write_summary_csv(report, handle)
    with atomic_write(out_dir / "bests.csv") as handle:
        write_bests_csv(report, handle)
    if args.dump_scores:
        with atomic_write(out_dir / "scores_run0.csv") as handle:
            write_scores_csv(report.score_dump, handle)
    manifest.time_stage("eval")
    manifest.record("sequences", len(seqs))
    manifest.record("train_sizes", report.train_sizes)
    for warning in report.warnings:
        manifest.warn(warning)
    manifest.write(out_dir / "manifest.json")
    for s in report.summaries:
        avg = "NA" if s.avg_f1 is None else f"{100 * s.avg_f1:.1f}"
        peak = "NA" if s.max_f1 is None else f"{100 * s.max_f1:.1f}"
        note = "  [not applicable]" if s.not_applicable else ""
        print(f"{s.detector:<24} avg F1 {avg:>6}  max F1 {peak:>6}{note}")
    print(f"results -> {out_dir}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    source, seqs = _load_for_eval(args)
    if args.granularity == "event":
        raise ValidationError("threshold sweeps apply to sequence granularity only")
    manifest = Manifest(args, [source])
    config = EvalConfig(
        train_fraction=args.train_frac, repetitions=1, rng_seed=args.seed
    )
    train, test = split(seqs, config, 0)
    out_dir = Path(args.out_dir)
    all_results = []
    for spec in [d.strip() for d in args.detectors.split(",") if d.strip()]:
        detector = make_detector(
            spec, ecvc_norm=args.ecvc_norm, ngram_norm=args.ngram_norm, ngram_pad=args.ngram_pad
        )
        all_results.extend(threshold_sweep(train, test, detector, config.threshold_grid))
    with atomic_write(out_dir / "sweep.csv") as handle:
        write_sweep_csv(all_results, handle)
    manifest.time_stage("sweep")
    manifest.record("train_size", len(train))
    manifest.write(out_dir / "manifest.json")
    print(f"sweep curves -> {out_dir / 'sweep.csv'}")
    return 0


def cmd_profiles(args: argparse.Namespace) -> int:
    if args.action == "list":
        for name in bundled_profile_names():
            print(name)
        return 0
    profile = load_profile(args.name)
    for key, value in sorted(vars(profile).items()):
        if value is not None:
            print(f"{key} = {value}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logbench",
        description=(
            "Characterize event-sequence log data sets and evaluate simple "
            "anomaly detection baselines under a semi-supervised protocol."
        ),
        epilog=f"Set {DATA_DIR_ENV} to resolve relative inputs against a dataset root.",
    )
    parser.add_argument("--version", action="version", version=f"logbench {__version__}")
    parser.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="logging verbosity (default: WARNING)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="match raw log lines against a template catalog")
    p.add_argument("--profile", required=True, help="bundled profile name or profile file path")
    p.add_argument("--templates", help="template catalog file (<id><TAB><pattern> per line)")
    p.add_argument("--input", required=True, help="log file, or directory for per-file datasets")
    p.add_argument("--out", required=True, help="parsed-event output file")
    p.add_argument(
        "--keep-unidentified",
        action="store_true",
        help="write events without sequence identifiers (needed for window grouping)",
    )
    p.add_argument("--unmatched-out", help="dump unmatched lines to this side file")
    p.set_defaults(func=cmd_parse)

    g = sub.add_parser("group", help="group parsed events into labeled sequences")
    g.add_argument("--input", required=True, help="parsed-event file from `logbench parse`")
    g.add_argument("--mode", default="id", choices=["id", "window", "file"], help="grouping mode")
    g.add_argument("--window", type=int, help="window size N for window mode")
    g.add_argument("--step", type=int, default=1, help="window step S (default: 1)")
    g.add_argument("--labels", help="per-sequence label file (seq_id,label)")
    g.add_argument("--out", required=True, help="sequence store output file")
    g.set_defaults(func=cmd_group)

    s = sub.add_parser("stats", help="dataset characterization reports")
    s.add_argument("--input", required=True, help="sequence store file")
    s.add_argument("--out-dir", required=True, help="directory for the report CSVs")
    s.add_argument("--top-k", type=int, default=7, help="most-common sequences per class")
    s.add_argument(
        "--interarrival-by-pair",
        action="store_true",
        help="key inter-arrival summaries by (event, next event) pair",
    )
    s.set_defaults(func=cmd_stats)

    c = sub.add_parser("complexity", help="n-gram entropy and Lempel-Ziv complexity")
    c.add_argument("--input", required=True, help="sequence store file")
    c.add_argument("--entropy-n", default="1..10", help="N values, e.g. 1..10 or 1,2,5")
    c.add_argument("--lz", action="store_true", help="also emit the Lempel-Ziv curve")
    c.add_argument(
        "--lz-count-trailing",
        action="store_true",
        help="count trailing incomplete phrases at sequence boundaries",
    )
    c.add_argument("--out", required=True, help="output CSV (measure,N,value rows)")
    c.set_defaults(func=cmd_complexity)

    e = sub.add_parser("eval", help="repeated semi-supervised evaluation study")
    e.add_argument("--input", required=True, help="sequence store (or parsed events for --granularity event)")
    e.add_argument(
        "--detectors",
        default=",".join(STUDY_DETECTORS),
        help="comma-separated detector names; + joins OR-combinations "
        "(event, length, ecvc, ecvc-idf, ngram2, ngram3, ngram10, edit, timing)",
    )
    e.add_argument("--train-frac", type=float, default=0.01, help="normal-class training fraction")
    e.add_argument("--runs", type=int, default=25, help="independent sampling repetitions")
    e.add_argument("--seed", type=int, default=1, help="base RNG seed")
    e.add_argument(
        "--granularity", default="sequence", choices=["sequence", "event"], help="evaluation unit"
    )
    e.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="parallel run workers")
    e.add_argument("--ecvc-norm", default="mass", choices=["mass", "len"], help="ECVC denominator")
    e.add_argument(
        "--ngram-norm",
        default="global-max",
        choices=["global-max", "per-sequence"],
        help="n-gram mismatch normalization",
    )
    e.add_argument("--ngram-pad", default="start", choices=["start", "end"], help="n-gram pad side")
    e.add_argument("--out-dir", required=True, help="directory for results.csv and summary.csv")
    e.add_argument("--dump-scores", action="store_true", help="dump run 0 scores per detector")
    e.set_defaults(func=cmd_eval)

    w = sub.add_parser("sweep", help="full threshold sweep curves from a single run")
    w.add_argument("--input", required=True, help="sequence store file")
    w.add_argument("--detectors", default="ecvc,ngram2,edit", help="comma-separated detector names")
    w.add_argument("--train-frac", type=float, default=0.01, help="normal-class training fraction")
    w.add_argument("--seed", type=int, default=1, help="RNG seed for the single split")
    w.add_argument("--granularity", default="sequence", choices=["sequence"], help=argparse.SUPPRESS)
    w.add_argument("--ecvc-norm", default="mass", choices=["mass", "len"], help="ECVC denominator")
    w.add_argument(
        "--ngram-norm",
        default="global-max",
        choices=["global-max", "per-sequence"],
        help="n-gram mismatch normalization",
    )
    w.add_argument("--ngram-pad", default="start", choices=["start", "end"], help="n-gram pad side")
    w.add_argument("--out-dir", required=True, help="directory for sweep.csv")
    w.set_defaults(func=cmd_sweep)

    pr = sub.add_parser("profiles", help="list or show bundled dataset profiles")
    pr.add_argument("action", choices=["list", "show"], help="profiles action")
    pr.add_argument("name", nargs="?", help="profile name for `show`")
    pr.set_defaults(func=cmd_profiles)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format="%(levelname)s %(name)s: %(message)s")
    if args.command == "profiles" and args.action == "show" and not args.name:
        parser.error("profiles show requires a profile name")
    try:
        return args.func(args)
    except LogbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
