"""Replay engine and the evaluation protocols (leave-one-subject-out, prequential).

Three modes share the whole pipeline and differ only in two places:

* ``no_context``: inertial features, no refinement;
* ``context_as_features``: inertial + encoded context features, no refinement;
* ``caviar``: inertial features, predictions refined with the rule base.
"""

from __future__ import annotations

import bisect
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .config import MODES, ConfigError, RunConfig
from .context import DiscretizedContext, RuleSet, discretize, load_rules
from .ingest import AlignmentError, ContextSnapshot, LabeledRecord, align_streams
from .learner import bootstrap, bootstrap_split, context_block, context_feature_names
from .policy import (
    IGNORE,
    KINDS,
    QUERY,
    SELF_TRAIN,
    GroundTruthOracle,
    MinorityBuffer,
    UpdateStats,
    apply_decision,
    decide,
)
from .refine import refine, unrefined
from .signal import Standardizer, extract_features, feature_names, filter_aligned, segment

log = logging.getLogger(__name__)


class ProtocolError(ValueError):
    """The dataset cannot support the requested protocol."""


# --------------------------------------------------------------------------
# segment preparation


@dataclass
class Item:
    """One segment, with everything each mode needs precomputed."""

    subject_id: str
    activity: str
    start_ms: float
    end_ms: float
    inertial: np.ndarray
    context: np.ndarray
    ctx: DiscretizedContext


@dataclass
class Prepared:
    items: list[Item]
    inertial_names: tuple[str, ...]
    context_names: tuple[str, ...]
    streams: tuple[tuple[str, str], ...]

    def subjects(self) -> list[str]:
        return sorted({it.subject_id for it in self.items})

    def restrict(self, activities: Sequence[str]) -> "Prepared":
        keep = set(activities)
        return Prepared([it for it in self.items if it.activity in keep], self.inertial_names,
                        self.context_names, self.streams)


def contexts_for_window(contexts: Sequence[ContextSnapshot], start_ms: float, end_ms: float) -> list[ContextSnapshot]:
    """The latest snapshot at or before ``start_ms`` plus those in ``(start_ms, end_ms]``."""
    stamps = [c.timestamp for c in contexts]
    first = bisect.bisect_right(stamps, start_ms) - 1
    last = bisect.bisect_right(stamps, end_ms)
    return list(contexts[max(first, 0) : last]) if last > 0 else []


def rules_for(config: RunConfig) -> RuleSet:
    kb = load_rules(config.rules_path)
    outside = sorted(set(kb.rules) - set(config.activities))
    if outside:
        log.info("ignoring rules for activities outside the run: %s", outside)
    kb = kb.restrict(config.activities)
    if config.minority is not None:
        unknown = set(config.minority) - set(config.activities)
        if unknown:
            raise ConfigError(f"minority activities not in the activity set: {sorted(unknown)}")
        kb = kb.with_minority(config.minority)
    return kb


def prepare(records: Iterable[LabeledRecord], config: RunConfig, kb: RuleSet | None = None) -> Prepared:
    """Align, filter, segment and featurize every record (mode independent)."""
    kb = kb if kb is not None else rules_for(config)
    records = list(records)
    streams = config.streams or tuple(sorted({s for rec in records for s in rec.streams()}))
    places = tuple(kb.places)
    items = []
    for rec in records:
        try:
            aligned = align_streams(rec.frames, config.grid_hz, streams)
        except AlignmentError as exc:
            raise AlignmentError(f"subject {rec.subject_id}, {rec.activity}: {exc}") from None
        aligned = filter_aligned(aligned, config.median_kernel)
        for seg in segment(aligned, config.window_seconds, subject_id=rec.subject_id, activity=rec.activity):
            recent = contexts_for_window(rec.contexts, seg.start_ms, seg.end_ms)
            snap = recent[-1] if recent else ContextSnapshot.unknown_at(int(seg.end_ms))
            items.append(
                Item(
                    rec.subject_id,
                    rec.activity,
                    seg.start_ms,
                    seg.end_ms,
                    extract_features(seg).values,
                    context_block(recent, places),
                    discretize(snap, kb.places, config.thresholds),
                )
            )
    return Prepared(items, feature_names(streams), context_feature_names(places), streams)


# --------------------------------------------------------------------------
# replay engine


@dataclass
class TraceEntry:
    subject_id: str
    start_ms: float
    end_ms: float
    truth: str
    predicted: str
    r_star: float
    kind: str
    chosen_label: str | None
    removed: list[str]
    fallback: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


class Engine:
    """Model, standardizer and minority buffer for one run in one mode."""

    def __init__(self, config: RunConfig, kb: RuleSet, mode: str, names: tuple[str, ...]):
        if mode not in MODES:
            raise ConfigError(f"unknown mode {mode!r}")
        self.config = config
        self.kb = kb
        self.mode = mode
        self.activities = tuple(config.activities)
        self.names = names
        self.standardizer = Standardizer(len(names))
        self.buffer = MinorityBuffer(kb.minority & set(self.activities), config.minority_capacity)
        self.rng = np.random.default_rng([config.seed, 1])
        self.oracle = GroundTruthOracle()
        self.stats = UpdateStats()
        self.model = None

    def raw(self, item: Item) -> np.ndarray:
        if self.mode == "context_as_features":
            return np.concatenate([item.inertial, item.context])
        return item.inertial

    def bootstrap(self, items: Sequence[Item]) -> None:
        cfg = self.config
        self.model = bootstrap(
            [self.raw(it) for it in items],
            [it.activity for it in items],
            self.activities,
            cfg.t_bootstrap_seconds,
            cfg.window_seconds,
            cfg.forest,
            cfg.seed,
            self.standardizer,
        )

    def step(self, item: Item, learn: bool = True) -> TraceEntry:
        cfg = self.config
        x = self.standardizer.standardize(self.raw(item), update=learn)
        probs = self.model.predict_proba(x)
        if self.mode == "caviar":
            refined = refine(probs, item.ctx, self.kb, self.activities)
        else:
            refined = unrefined(probs)
        predicted = self.activities[int(np.argmax(refined.refined))]
        decision = decide(refined, self.activities, cfg.pi, cfg.rho, cfg.query_options)
        self.stats.kinds[decision.kind] += 1
        if learn and decision.kind != IGNORE:
            if decision.kind == QUERY:
                decision.chosen_label = self.oracle.answer(decision.query_options, item.activity)
            apply_decision(decision, x, self.model, self.buffer, cfg.smote_q, cfg.smote_k, self.rng, self.stats)
        return TraceEntry(
            item.subject_id,
            item.start_ms,
            item.end_ms,
            item.activity,
            predicted,
            decision.r_star,
            decision.kind,
            decision.chosen_label,
            sorted(refined.removed),
            refined.fallback_used,
        )


# --------------------------------------------------------------------------
# metrics and reports


def confusion_matrix(truth: Sequence[str], predicted: Sequence[str], activities: Sequence[str]) -> np.ndarray:
    index = {a: i for i, a in enumerate(activities)}
    cm = np.zeros((len(activities), len(activities)), dtype=int)
    for t, p in zip(truth, predicted):
        cm[index[t], index[p]] += 1
    return cm


@dataclass
class ClassScores:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    macro_f1: float


def f1_per_class(confusion: np.ndarray) -> ClassScores:
    """Per-class precision/recall/F1 (0 when undefined) and the macro F1 over
    classes with non-zero support."""
    cm = np.asarray(confusion, dtype=float)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ValueError(f"confusion matrix must be square, got shape {cm.shape}")
    tp = np.diag(cm)
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, support, out=np.zeros_like(tp), where=support > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)
    present = support > 0
    macro = float(f1[present].mean()) if present.any() else 0.0
    return ClassScores(precision, recall, f1, support.astype(int), macro)


@dataclass
class EvalReport:
    mode: str
    protocol: str
    activities: tuple[str, ...]
    confusion: np.ndarray
    kind_counts: dict[str, int]
    subject: str | None = None
    series: list[dict] = field(default_factory=list)
    series_truncated: bool = False
    removed_counts: dict[str, int] = field(default_factory=dict)
    fallback_count: int = 0
    training: dict | None = None
    macro_override: float | None = None
    rate_override: dict[str, float] | None = None
    folds: list[str] = field(default_factory=list)

    @property
    def n_segments(self) -> int:
        return int(sum(self.kind_counts.values()))

    @property
    def scores(self) -> ClassScores:
        return f1_per_class(self.confusion)

    @property
    def macro_f1(self) -> float:
        return self.macro_override if self.macro_override is not None else self.scores.macro_f1

    def rate(self, kind: str) -> float:
        if self.rate_override is not None:
            return self.rate_override[kind]
        n = self.n_segments
        return self.kind_counts[kind] / n if n else 0.0

    @property
    def query_rate(self) -> float:
        return self.rate(QUERY)

    @property
    def self_train_rate(self) -> float:
        return self.rate(SELF_TRAIN)

    @property
    def ignore_rate(self) -> float:
        return self.rate(IGNORE)

    def to_dict(self, config: RunConfig | None = None, feature_names: Sequence[str] | None = None) -> dict:
        sc = self.scores
        out = {
            "mode": self.mode,
            "protocol": self.protocol,
            "subject": self.subject,
            "activities": list(self.activities),
            "n_segments": self.n_segments,
            "macro_f1": self.macro_f1,
            "query_rate": self.query_rate,
            "self_train_rate": self.self_train_rate,
            "ignore_rate": self.ignore_rate,
            "kind_counts": dict(self.kind_counts),
            "per_class": {
                a: {"precision": float(sc.precision[i]), "recall": float(sc.recall[i]),
                    "f1": float(sc.f1[i]), "support": int(sc.support[i])}
                for i, a in enumerate(self.activities)
            },
            "confusion": self.confusion.tolist(),
            "removed_counts": dict(self.removed_counts),
            "fallback_count": self.fallback_count,
            "series": self.series,
            "series_truncated": self.series_truncated,
        }
        if self.training is not None:
            out["training"] = self.training
        if self.folds:
            out["folds"] = self.folds
        if config is not None:
            out["seed"] = config.seed
            out["config"] = config.to_dict()
        if feature_names is not None:
            out["feature_names"] = list(feature_names)
        return out


def report_from_trace(
    trace: Sequence[TraceEntry], activities: Sequence[str], mode: str, protocol: str, subject: str | None = None
) -> EvalReport:
    cm = confusion_matrix([t.truth for t in trace], [t.predicted for t in trace], activities)
    kinds = {k: 0 for k in KINDS}
    removed = {a: 0 for a in activities}
    for t in trace:
        kinds[t.kind] += 1
        for a in t.removed:
            removed[a] += 1
    return EvalReport(
        mode, protocol, tuple(activities), cm, kinds, subject,
        removed_counts={a: n for a, n in removed.items() if n},
        fallback_count=sum(t.fallback for t in trace),
    )


def prequential_series(
    trace: Sequence[TraceEntry], activities: Sequence[str], window: int = 800, overlap: float = 0.75
) -> tuple[list[dict], bool]:
    """Macro F1 and query fraction over sliding windows of records.

    Windows start every ``window * (1 - overlap)`` records and must fit
    entirely; a stream shorter than one window yields one truncated window
    (second return value ``True``).
    """
    if window < 1 or not 0.0 <= overlap < 1.0:
        raise ConfigError("window >= 1 and 0 <= overlap < 1 required")
    stride = max(1, int(round(window * (1.0 - overlap))))
    n = len(trace)
    if n == 0:
        return [], True
    truncated = n < window
    starts = [0] if truncated else list(range(0, n - window + 1, stride))
    series = []
    for idx, start in enumerate(starts):
        chunk = trace[start : start + window]
        cm = confusion_matrix([t.truth for t in chunk], [t.predicted for t in chunk], activities)
        series.append({
            "window": idx,
            "start": start,
            "size": len(chunk),
            "f1": f1_per_class(cm).macro_f1,
            "query_fraction": sum(t.kind == QUERY for t in chunk) / len(chunk),
        })
    return series, truncated


def _training_summary(engine: Engine, n_segments: int) -> dict:
    s = engine.stats
    return {
        "n_segments": n_segments,
        "kind_counts": dict(s.kinds),
        "queries": s.queries,
        "model_updates": s.updates,
        "synthetic_samples": s.synthetic,
        "smote_skipped": s.smote_skipped,
    }


# --------------------------------------------------------------------------
# protocols


def _as_prepared(data, config: RunConfig, kb: RuleSet) -> Prepared:
    if isinstance(data, Prepared):
        return data.restrict(config.activities)
    records = [r for r in data if r.activity in set(config.activities)]
    return prepare(records, config, kb)


def _check_labels(prep: Prepared, activities: Sequence[str]) -> None:
    unknown = sorted({it.activity for it in prep.items} - set(activities))
    if unknown:
        raise ConfigError(f"dataset has activities outside the activity set: {unknown}")


def order_stream(items: Sequence[Item], subjects: Sequence[str], interleave: bool = False) -> list[Item]:
    """Concatenate subjects in the given order (or round-robin when interleaving)."""
    per = {s: [it for it in items if it.subject_id == s] for s in subjects}
    if not interleave:
        return [it for s in subjects for it in per[s]]
    out, pos = [], 0
    while True:
        batch = [per[s][pos] for s in subjects if pos < len(per[s])]
        if not batch:
            return out
        out.extend(batch)
        pos += 1


def _subject_order(prep: Prepared, config: RunConfig) -> list[str]:
    present = prep.subjects()
    if config.subject_order is None:
        return present
    order = [s for s in config.subject_order if s in present]
    return order + [s for s in present if s not in order]


def _names_for(prep: Prepared, mode: str) -> tuple[str, ...]:
    if mode == "context_as_features":
        return prep.inertial_names + prep.context_names
    return prep.inertial_names


@dataclass
class LosoResult:
    folds: list[EvalReport]
    aggregate: EvalReport
    traces: dict[str, list[TraceEntry]]


def run_loso(data, mode: str, config: RunConfig, kb: RuleSet | None = None) -> LosoResult:
    """Leave-one-subject-out: per held-out subject, bootstrap and replay on the
    others, then score the held-out subject (queries counted, model frozen
    unless ``config.adapt_on_holdout``). The aggregate macro F1 and rates are
    fold means; its confusion matrix is the pooled sum."""
    config = config.replace(mode=mode).validate()
    kb = kb if kb is not None else rules_for(config)
    prep = _as_prepared(data, config, kb)
    _check_labels(prep, config.activities)
    subjects = _subject_order(prep, config)
    if len(subjects) < 2:
        raise ProtocolError("leave-one-subject-out needs at least 2 subjects")
    names = _names_for(prep, mode)
    folds, traces = [], {}
    for held in subjects:
        engine = Engine(config, kb, mode, names)
        train = order_stream(prep.items, [s for s in subjects if s != held], config.replay_order == "interleaved")
        boot, rest = bootstrap_split([it.activity for it in train], config.activities,
                                     config.t_bootstrap_seconds, config.window_seconds)
        engine.bootstrap([train[i] for i in boot])
        for i in rest:
            engine.step(train[i], learn=True)
        training = _training_summary(engine, len(rest))
        test = [it for it in prep.items if it.subject_id == held]
        trace = [engine.step(it, learn=config.adapt_on_holdout) for it in test]
        rep = report_from_trace(trace, config.activities, mode, "loso", held)
        rep.training = training
        folds.append(rep)
        traces[held] = trace
        log.info("fold %s: macro F1 %.3f, query rate %.3f", held, rep.macro_f1, rep.query_rate)

    pooled = sum((f.confusion for f in folds), np.zeros_like(folds[0].confusion))
    kinds = {k: sum(f.kind_counts[k] for f in folds) for k in KINDS}
    removed: dict[str, int] = {}
    for f in folds:
        for a, n in f.removed_counts.items():
            removed[a] = removed.get(a, 0) + n
    agg = EvalReport(
        mode, "loso", tuple(config.activities), pooled, kinds,
        removed_counts=removed,
        fallback_count=sum(f.fallback_count for f in folds),
        macro_override=float(np.mean([f.macro_f1 for f in folds])),
        rate_override={k: float(np.mean([f.rate(k) for f in folds])) for k in KINDS},
        folds=list(subjects),
    )
    return LosoResult(folds, agg, traces)


@dataclass
class PrequentialResult:
    report: EvalReport
    trace: list[TraceEntry]


def run_prequential(
    data, mode: str, config: RunConfig, window: int | None = None, overlap: float | None = None,
    kb: RuleSet | None = None,
) -> PrequentialResult:
    """Bootstrap once on the head of the concatenated stream, then test-then-train
    every remaining segment; the series is computed over the resulting records."""
    window = config.prequential_window if window is None else window
    overlap = config.prequential_overlap if overlap is None else overlap
    config = config.replace(mode=mode, prequential_window=window, prequential_overlap=overlap).validate()
    kb = kb if kb is not None else rules_for(config)
    prep = _as_prepared(data, config, kb)
    _check_labels(prep, config.activities)
    stream = order_stream(prep.items, _subject_order(prep, config), config.replay_order == "interleaved")
    boot, rest = bootstrap_split([it.activity for it in stream], config.activities,
                                 config.t_bootstrap_seconds, config.window_seconds)
    engine = Engine(config, kb, mode, _names_for(prep, mode))
    engine.bootstrap([stream[i] for i in boot])
    trace = [engine.step(stream[i], learn=True) for i in rest]
    rep = report_from_trace(trace, config.activities, mode, "prequential")
    rep.series, rep.series_truncated = prequential_series(trace, config.activities, window, overlap)
    rep.training = _training_summary(engine, len(rest))
    return PrequentialResult(rep, trace)


def activity_subset_run(
    data, subset: Sequence[str], mode: str, config: RunConfig, protocol: str = "prequential",
    kb: RuleSet | None = None,
):
    """Run a protocol with the activity set (and data) restricted to ``subset``."""
    subset = list(dict.fromkeys(subset))
    if not subset:
        raise ConfigError("activity subset is empty")
    unknown = set(subset) - set(config.activities)
    if unknown:
        raise ConfigError(f"subset activities not configured: {sorted(unknown)}")
    config = config.replace(activities=subset)
    if kb is not None:
        kb = kb.restrict(subset)
    if protocol == "prequential":
        return run_prequential(data, mode, config, kb=kb)
    if protocol == "loso":
        return run_loso(data, mode, config, kb=kb)
    raise ConfigError(f"unknown protocol {protocol!r}")


# --------------------------------------------------------------------------
# serialization


def dump_json(obj, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, allow_nan=False) + "\n", encoding="utf-8")


def write_trace(trace: Sequence[TraceEntry] | Mapping[str, Sequence[TraceEntry]], path: str | Path) -> None:
    """Write a decision trace as JSON lines, overwriting ``path``.

    A mapping of fold name to trace (as in :class:`LosoResult`) adds a
    ``fold`` field to every row.
    """
    groups = trace.items() if isinstance(trace, Mapping) else [(None, trace)]
    with Path(path).open("w", encoding="utf-8") as fh:
        for fold, entries in groups:
            for t in entries:
                row = t.to_dict() if fold is None else {"fold": fold, **t.to_dict()}
                fh.write(json.dumps(row, separators=(",", ":")) + "\n")


def write_series(series: Sequence[dict], path: str | Path) -> None:
    lines = ["window_start,f1,query_fraction"]
    lines += [f"{p['start']},{p['f1']!r},{p['query_fraction']!r}" for p in series]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
