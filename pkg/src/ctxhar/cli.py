"""Command-line driver: ``ctxhar generate | eval | check-rules | features | version``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import MODES, ConfigError, RunConfig, load_config
from .context import RuleLoadError, RuleSet, discretize, is_consistent, load_rules
from .evaluation import (
    ProtocolError,
    activity_subset_run,
    dump_json,
    prepare,
    rules_for,
    run_loso,
    run_prequential,
    write_series,
    write_trace,
)
from .ingest import (
    DatasetError,
    builtin_profile,
    generate_synthetic,
    load_dataset,
    load_profile,
    minutes_per_activity,
)
from .learner import BootstrapError

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ctxhar", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="synthesize a labeled dataset from a profile")
    g.add_argument("profile", help="profile JSON file, or builtin:confusable / builtin:reference")
    g.add_argument("--subjects", type=int, default=3)
    g.add_argument("--seed", type=int)
    g.add_argument("--scale", type=float, default=1.0, help="multiply every duration budget")
    g.add_argument("--out", required=True)

    e = sub.add_parser("eval", help="run an evaluation protocol on a dataset")
    e.add_argument("dataset")
    e.add_argument("--config")
    e.add_argument("--protocol", choices=("loso", "prequential"), default="loso")
    e.add_argument("--mode", choices=MODES)
    e.add_argument("--seed", type=int)
    e.add_argument("--subset", help="comma-separated activity subset")
    e.add_argument("--out", required=True, help="report path (JSON); trace/series files go alongside")

    c = sub.add_parser("check-rules", help="audit how often each activity is context-consistent")
    c.add_argument("rules")
    c.add_argument("dataset")
    c.add_argument("--config")

    f = sub.add_parser("features", help="dump per-segment feature vectors as CSV")
    f.add_argument("dataset")
    f.add_argument("--config")
    f.add_argument("--seed", type=int)
    f.add_argument("--out", required=True)

    sub.add_parser("version")
    return p


def _profile(spec: str):
    if spec.startswith("builtin:"):
        try:
            return builtin_profile(spec.split(":", 1)[1])
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    path = Path(spec)
    if not path.is_file():
        raise FileNotFoundError(f"profile file not found: {path}")
    return load_profile(path)


def cmd_generate(args) -> int:
    profile = _profile(args.profile)
    if args.seed is not None:
        profile.seed = args.seed
    if args.scale != 1.0:
        profile = profile.scaled(args.scale)
    records = generate_synthetic(profile, args.subjects, args.out)
    minutes = minutes_per_activity(records, profile.sample_hz)
    print(f"wrote {args.out}: {args.subjects} subjects, {len(minutes)} classes, "
          f"{sum(minutes.values()):.1f} minutes")
    for activity in sorted(minutes):
        print(f"  {activity:24s} {minutes[activity]:8.2f} min")
    return EXIT_OK


def _suffixed(out: Path, suffix: str) -> Path:
    return out.with_name(out.stem + suffix)


def cmd_eval(args) -> int:
    config = load_config(args.config, seed=args.seed, mode=args.mode)
    subset = [s.strip() for s in args.subset.split(",") if s.strip()] if args.subset else None
    if subset is not None:
        unknown = set(subset) - set(config.activities)
        if not subset or unknown:
            raise ConfigError(f"bad --subset (unknown: {sorted(unknown)})" if unknown else "empty --subset")
    kb = rules_for(config)
    records = load_dataset(args.dataset, activities=config.activities, streams=config.streams)
    prep = prepare(records, config, kb)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    trace_path = _suffixed(out, ".trace.jsonl")

    if args.protocol == "loso":
        if subset is not None:
            result = activity_subset_run(prep, subset, config.mode, config, "loso", kb)
            config = config.replace(activities=subset)
        else:
            result = run_loso(prep, config.mode, config, kb)
        doc = {
            "protocol": "loso",
            "aggregate": result.aggregate.to_dict(),
            "folds": [f.to_dict() for f in result.folds],
            "seed": config.seed,
            "config": config.to_dict(),
            "feature_names": list(_names(prep, config.mode)),
        }
        for f in result.folds:
            print(f"fold {f.subject}: macro F1 {f.macro_f1:.4f}  query rate {f.query_rate:.4f}")
        agg = result.aggregate
        print(f"aggregate ({config.mode}): macro F1 {agg.macro_f1:.4f}  query rate {agg.query_rate:.4f}")
        write_trace(result.traces, trace_path)
    else:
        if subset is not None:
            result = activity_subset_run(prep, subset, config.mode, config, "prequential", kb)
            config = config.replace(activities=subset)
        else:
            result = run_prequential(prep, config.mode, config, kb=kb)
        rep = result.report
        doc = rep.to_dict(config, _names(prep, config.mode))
        print(f"prequential ({config.mode}): macro F1 {rep.macro_f1:.4f}  query rate {rep.query_rate:.4f}  "
              f"series points {len(rep.series)}")
        write_series(rep.series, _suffixed(out, ".series.csv"))
        write_trace(result.trace, trace_path)
    dump_json(doc, out)
    return EXIT_OK


def _names(prep, mode: str):
    if mode == "context_as_features":
        return prep.inertial_names + prep.context_names
    return prep.inertial_names


def consistency_audit(kb: RuleSet, records, activities, thresholds=None) -> dict[str, dict]:
    """Fraction of dataset context snapshots in which each activity is consistent,
    overall and within snapshots recorded during that activity."""
    rows = []
    for rec in records:
        for snap in rec.contexts:
            rows.append((rec.activity, discretize(snap, kb.places, thresholds)))
    audit = {}
    for activity in activities:
        flags = [is_consistent(activity, ctx, kb) for _, ctx in rows]
        own = [ok for (truth, _), ok in zip(rows, flags) if truth == activity]
        audit[activity] = {
            "consistent": sum(flags) / len(flags) if flags else 0.0,
            "own_contexts": sum(own) / len(own) if own else None,
            "n_contexts": len(flags),
        }
    return audit


def cmd_check_rules(args) -> int:
    base = load_config(args.config, seed=0) if args.config else RunConfig(seed=0)
    kb = load_rules(args.rules)
    records = load_dataset(args.dataset)
    present = sorted({r.activity for r in records})
    activities = list(dict.fromkeys(list(base.activities if args.config else present) + sorted(kb.rules)))
    audit = consistency_audit(kb, records, activities, base.thresholds)
    print(f"{'activity':24s} {'consistent':>10s} {'own ctx':>8s}")
    for activity, row in audit.items():
        own = "-" if row["own_contexts"] is None else f"{row['own_contexts']:.1%}"
        flag = "  DEAD RULE" if row["consistent"] == 0.0 else ""
        print(f"{activity:24s} {row['consistent']:>10.1%} {own:>8s}{flag}")
    return EXIT_OK


def cmd_features(args) -> int:
    config = load_config(args.config, seed=args.seed if args.seed is not None else 0)
    kb = rules_for(config)
    records = load_dataset(args.dataset, activities=config.activities, streams=config.streams)
    prep = prepare(records, config, kb)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["subject_id", "activity", "start_ms", "end_ms", *prep.inertial_names])
        for it in prep.items:
            w.writerow([it.subject_id, it.activity, f"{it.start_ms:.0f}", f"{it.end_ms:.0f}",
                        *(repr(float(v)) for v in it.inertial)])
    print(f"wrote {len(prep.items)} feature vectors x {len(prep.inertial_names)} features to {args.out}")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "eval": cmd_eval,
    "check-rules": cmd_check_rules,
    "features": cmd_features,
    "version": lambda args: print(f"ctxhar {__version__}") or EXIT_OK,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = _parser().parse_args(argv)
    except UsageError as exc:
        print(f"ctxhar: usage error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, RuleLoadError) as exc:
        print(f"ctxhar: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DatasetError, BootstrapError, ProtocolError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"ctxhar: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
