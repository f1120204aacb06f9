"""Online random forest with per-leaf random tests, plus context feature encoding.

Each tree receives every sample ``Poisson(weight)`` times (online bagging).
A leaf buffers its first ``min_samples_split`` samples, then draws ``n_tests``
axis-aligned tests whose thresholds are uniform over the range of its
buffered values, and from then on keeps left/right class histograms per
test. It splits once the best Gini gain reaches ``min_gain``; the children
inherit the winning test's histograms.

Each leaf also remembers its most recent ``leaf_memory`` samples. On a split
these are routed to the children, which can then draw their own tests (and
split again) immediately instead of waiting for fresh samples. Without this
a region whose classes stop receiving labels can never be refined further.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ConfigError, ForestParams
from .context import VOCABULARY
from .ingest import NUMERIC_CONTEXT, ContextSnapshot
from .signal import FeatureVector, Standardizer

FORMAT_NAME = "ctxhar-online-forest"
FORMAT_VERSION = 1


class NotBootstrappedError(RuntimeError):
    """Prediction requested before every class has been seen."""


class BootstrapError(ValueError):
    """Not enough labeled data to bootstrap some class."""


def _gini(counts: np.ndarray) -> np.ndarray:
    """Gini impurity along the last axis; terms are summed in sorted order so the
    result does not depend on class ordering."""
    total = counts.sum(axis=-1, keepdims=True)
    p = counts / np.where(total > 0, total, 1.0)
    return 1.0 - np.sort(p * p, axis=-1).sum(axis=-1)


class _Node:
    __slots__ = (
        "counts", "depth", "feature", "threshold", "left", "right",
        "buffer", "buffered", "tests_f", "tests_t", "stats_l", "stats_r",
    )

    def __init__(self, n_classes: int, depth: int, counts: np.ndarray | None = None):
        self.counts = np.zeros(n_classes) if counts is None else counts
        self.depth = depth
        self.feature = -1
        self.threshold = 0.0
        self.left: _Node | None = None
        self.right: _Node | None = None
        self.buffer: list[tuple[np.ndarray, int, int]] = []
        self.buffered = 0
        self.tests_f: np.ndarray | None = None
        self.tests_t: np.ndarray | None = None
        self.stats_l: np.ndarray | None = None
        self.stats_r: np.ndarray | None = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def to_dict(self) -> dict:
        if not self.is_leaf:
            return {"depth": self.depth, "counts": self.counts.tolist(), "feature": self.feature,
                    "threshold": self.threshold, "left": self.left.to_dict(), "right": self.right.to_dict()}
        out = {"depth": self.depth, "counts": self.counts.tolist(), "buffered": self.buffered,
               "buffer": [[x.tolist(), y, r] for x, y, r in self.buffer]}
        if self.tests_f is not None:
            out.update(tests_f=self.tests_f.tolist(), tests_t=self.tests_t.tolist(),
                       stats_l=self.stats_l.tolist(), stats_r=self.stats_r.tolist())
        return out

    @classmethod
    def from_dict(cls, d: dict, n_classes: int) -> "_Node":
        node = cls(n_classes, d["depth"], np.asarray(d["counts"], dtype=float))
        if "left" in d:
            node.feature = d["feature"]
            node.threshold = d["threshold"]
            node.left = cls.from_dict(d["left"], n_classes)
            node.right = cls.from_dict(d["right"], n_classes)
            return node
        node.buffered = d["buffered"]
        node.buffer = [(np.asarray(x, dtype=float), y, r) for x, y, r in d["buffer"]]
        if "tests_f" in d:
            node.tests_f = np.asarray(d["tests_f"], dtype=int)
            node.tests_t = np.asarray(d["tests_t"], dtype=float)
            node.stats_l = np.asarray(d["stats_l"], dtype=float)
            node.stats_r = np.asarray(d["stats_r"], dtype=float)
        return node


class OnlineTree:
    def __init__(self, n_classes: int, n_features: int, params: ForestParams, rng: np.random.Generator):
        self.n_classes = n_classes
        self.n_features = n_features
        self.params = params
        self.n_tests = params.n_tests or max(1, math.ceil(math.sqrt(n_features)))
        self.rng = rng
        self.root = _Node(n_classes, 0)
        self.lo = np.full(n_features, np.inf)
        self.hi = np.full(n_features, -np.inf)

    def leaf(self, x: np.ndarray) -> _Node:
        node = self.root
        while node.left is not None:
            node = node.left if x[node.feature] < node.threshold else node.right
        return node

    def update(self, x: np.ndarray, y: int, r: int) -> None:
        np.minimum(self.lo, x, out=self.lo)
        np.maximum(self.hi, x, out=self.hi)
        node = self.leaf(x)
        node.counts[y] += r
        if node.depth >= self.params.max_depth:
            return
        if node.tests_f is None:
            node.buffer.append((x, y, r))
            node.buffered += r
            if node.buffered < self.params.min_samples_split:
                return
            self._draw_tests(node)
        else:
            self._remember(node, (x, y, r))
            go_left = x[node.tests_f] < node.tests_t
            node.stats_l[go_left, y] += r
            node.stats_r[~go_left, y] += r
        self._try_split(node)

    def _remember(self, node: _Node, sample: tuple[np.ndarray, int, int]) -> None:
        cap = self.params.leaf_memory
        if cap > 0:
            node.buffer.append(sample)
            if len(node.buffer) > cap:
                del node.buffer[: len(node.buffer) - cap]

    def _draw_tests(self, node: _Node) -> None:
        f = self.rng.choice(self.n_features, size=min(self.n_tests, self.n_features), replace=False)
        u = self.rng.random(len(f))
        seen = np.array([x[f] for x, _, _ in node.buffer])
        lo, hi = seen.min(axis=0), seen.max(axis=0)
        node.tests_f = f
        node.tests_t = lo + u * (hi - lo)
        node.stats_l = np.zeros((len(f), self.n_classes))
        node.stats_r = np.zeros((len(f), self.n_classes))
        for x, y, r in node.buffer:
            go_left = x[f] < node.tests_t
            node.stats_l[go_left, y] += r
            node.stats_r[~go_left, y] += r
        cap = self.params.leaf_memory
        node.buffer = node.buffer[-cap:] if cap > 0 else []

    def _try_split(self, node: _Node) -> None:
        nl = node.stats_l.sum(axis=1)
        nr = node.stats_r.sum(axis=1)
        n = nl + nr
        if n[0] < self.params.min_samples_split:
            return
        parent = _gini(node.stats_l + node.stats_r)
        gain = parent - (nl * _gini(node.stats_l) + nr * _gini(node.stats_r)) / n
        gain[(nl == 0) | (nr == 0)] = -np.inf
        best = int(np.argmax(gain))
        if not gain[best] >= self.params.min_gain:
            return
        node.feature = int(node.tests_f[best])
        node.threshold = float(node.tests_t[best])
        node.left = _Node(self.n_classes, node.depth + 1, node.stats_l[best].copy())
        node.right = _Node(self.n_classes, node.depth + 1, node.stats_r[best].copy())
        memory, node.buffer = node.buffer, []
        node.tests_f = node.tests_t = node.stats_l = node.stats_r = None
        for x, y, r in memory:
            child = node.left if x[node.feature] < node.threshold else node.right
            child.buffer.append((x, y, r))
            child.buffered += r
        for child in (node.left, node.right):
            if child.depth < self.params.max_depth and child.buffered >= self.params.min_samples_split:
                self._draw_tests(child)
                self._try_split(child)

    def depth(self) -> int:
        def walk(node: _Node) -> int:
            return node.depth if node.is_leaf else max(walk(node.left), walk(node.right))
        return walk(self.root)


class OnlineForest:
    """Incremental probabilistic classifier over a fixed, ordered class list."""

    def __init__(self, classes: Sequence[str], n_features: int, params: ForestParams | None = None, seed: int = 0):
        if len(set(classes)) != len(classes) or not classes:
            raise ConfigError("classes must be a non-empty list of distinct labels")
        self.classes = tuple(classes)
        self.index = {c: i for i, c in enumerate(self.classes)}
        self.n_features = n_features
        self.params = params or ForestParams()
        self.seed = seed
        streams = np.random.SeedSequence(seed).spawn(self.params.n_trees)
        self.trees = [
            OnlineTree(len(self.classes), n_features, self.params, np.random.default_rng(s)) for s in streams
        ]
        self.seen = np.zeros(len(self.classes))
        self.n_updates = 0

    @property
    def bootstrapped(self) -> bool:
        return bool(np.all(self.seen > 0))

    def update(self, fv: FeatureVector | np.ndarray, label: str, weight: float = 1.0) -> None:
        """Feed one labeled sample; each tree sees it ``Poisson(weight)`` times."""
        if label not in self.index:
            raise ValueError(f"unknown label {label!r}")
        if weight < 0:
            raise ValueError("weight must be non-negative")
        if weight == 0:
            return
        x = np.asarray(fv.values if isinstance(fv, FeatureVector) else fv, dtype=float)
        if x.shape != (self.n_features,):
            raise ValueError(f"expected {self.n_features} features, got shape {x.shape}")
        y = self.index[label]
        self.seen[y] += weight
        self.n_updates += 1
        for tree in self.trees:
            r = int(tree.rng.poisson(weight))
            if r:
                tree.update(x, y, r)

    def predict_proba(self, fv: FeatureVector | np.ndarray) -> np.ndarray:
        """Mean over trees of the Laplace-smoothed (pseudo-count 1) leaf histogram."""
        if not self.bootstrapped:
            missing = [c for c, s in zip(self.classes, self.seen) if s == 0]
            raise NotBootstrappedError(f"model has not seen classes {missing}")
        x = np.asarray(fv.values if isinstance(fv, FeatureVector) else fv, dtype=float)
        if x.shape != (self.n_features,):
            raise ValueError(f"expected {self.n_features} features, got shape {x.shape}")
        c = len(self.classes)
        total = np.zeros(c)
        for tree in self.trees:
            counts = tree.leaf(x).counts
            total += (counts + 1.0) / (counts.sum() + c)
        probs = total / len(self.trees)
        return probs / probs.sum()

    def predict(self, fv: FeatureVector | np.ndarray) -> str:
        return self.classes[int(np.argmax(self.predict_proba(fv)))]

    # ---------------------------------------------------------------- io

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "classes": list(self.classes),
            "n_features": self.n_features,
            "params": asdict(self.params),
            "seed": self.seed,
            "seen": self.seen.tolist(),
            "n_updates": self.n_updates,
            "trees": [
                {
                    "rng": t.rng.bit_generator.state,
                    "lo": [None if not np.isfinite(v) else v for v in t.lo.tolist()],
                    "hi": [None if not np.isfinite(v) else v for v in t.hi.tolist()],
                    "root": t.root.to_dict(),
                }
                for t in self.trees
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OnlineForest":
        if data.get("format") != FORMAT_NAME:
            raise ValueError("not an online-forest model file")
        if data.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {data.get('version')}")
        model = cls(data["classes"], data["n_features"], ForestParams(**data["params"]), data["seed"])
        model.seen = np.asarray(data["seen"], dtype=float)
        model.n_updates = data["n_updates"]
        for tree, td in zip(model.trees, data["trees"]):
            tree.rng.bit_generator.state = td["rng"]
            tree.lo = np.array([np.inf if v is None else v for v in td["lo"]], dtype=float)
            tree.hi = np.array([-np.inf if v is None else v for v in td["hi"]], dtype=float)
            tree.root = _Node.from_dict(td["root"], len(model.classes))
        return model

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), separators=(",", ":")), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "OnlineForest":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def predict(model: OnlineForest, fv: FeatureVector | np.ndarray) -> np.ndarray:
    return model.predict_proba(fv)


def update(model: OnlineForest, fv: FeatureVector | np.ndarray, label: str, weight: float = 1.0) -> OnlineForest:
    model.update(fv, label, weight)
    return model


def bootstrap_split(
    labels: Sequence[str], classes: Sequence[str], t_seconds: float, window_seconds: float
) -> tuple[list[int], list[int]]:
    """Indices of the first ``t_seconds`` of windows per class, and the rest.

    Raises :class:`BootstrapError` naming the first class that falls short.
    """
    need = math.ceil(t_seconds / window_seconds - 1e-9)
    taken = {c: 0 for c in classes}
    boot, rest = [], []
    for i, label in enumerate(labels):
        if label in taken and taken[label] < need:
            taken[label] += 1
            boot.append(i)
        else:
            rest.append(i)
    for c in classes:
        if taken[c] < need:
            have = taken[c] * window_seconds
            raise BootstrapError(f"class {c!r} has only {have:g} s of labeled data, bootstrap needs {t_seconds:g} s")
    return boot, rest


def bootstrap(
    fvs: Sequence[np.ndarray],
    labels: Sequence[str],
    classes: Sequence[str],
    t_seconds: float = 60.0,
    window_seconds: float = 4.0,
    params: ForestParams | None = None,
    seed: int = 0,
    standardizer: Standardizer | None = None,
) -> OnlineForest:
    """Build a forest from the first ``t_seconds`` per class of a labeled stream.

    If a standardizer is given it is first advanced over the bootstrap vectors,
    which are then standardized before training. Training order is a seeded
    shuffle of the bootstrap set.
    """
    idx, _ = bootstrap_split(labels, classes, t_seconds, window_seconds)
    X = np.asarray([np.asarray(fvs[i], dtype=float) for i in idx])
    if standardizer is not None:
        for row in X:
            standardizer.update(row)
        X = np.asarray([standardizer.standardize(row) for row in X])
    model = OnlineForest(classes, X.shape[1], params, seed)
    order = np.random.default_rng(seed).permutation(len(idx))
    for j in order:
        model.update(X[j], labels[idx[j]])
    return model


# --------------------------------------------------------------------------
# context-as-features encoding


def context_feature_names(places: Sequence[str]) -> tuple[str, ...]:
    names = []
    for attr in NUMERIC_CONTEXT:
        names += [f"ctx.{attr}.mean", f"ctx.{attr}.variance", f"ctx.{attr}.range", f"ctx.{attr}.known"]
    for attr, vocab in _symbolic_vocab(places):
        names += [f"ctx.{attr}={v}" for v in vocab]
    return tuple(names)


def _symbolic_vocab(places: Sequence[str]):
    return (
        ("semantic_place", tuple(places)),
        ("weather", VOCABULARY["weather"]),
        ("transit_proximity", VOCABULARY["transit_proximity"]),
        ("traffic_level", VOCABULARY["traffic_level"]),
        ("time_of_day", VOCABULARY["time_of_day"]),
        ("day_of_week", VOCABULARY["day_of_week"]),
    )


def context_block(recent: Sequence[ContextSnapshot], places: Sequence[str]) -> np.ndarray:
    """Numeric statistics over ``recent`` plus one-hot symbols of its last snapshot."""
    out = []
    for attr in NUMERIC_CONTEXT:
        vals = np.array([getattr(c, attr) for c in recent if getattr(c, attr) is not None], dtype=float)
        if len(vals):
            out += [vals.mean(), vals.var(), vals.max() - vals.min(), 1.0]
        else:
            out += [0.0, 0.0, 0.0, 0.0]
    last = recent[-1] if recent else None
    for attr, vocab in _symbolic_vocab(places):
        value = None if last is None else getattr(last, attr)
        if attr == "transit_proximity" and value is not None:
            value = "near" if value else "far"
        out += [1.0 if value == v else 0.0 for v in vocab]
    return np.asarray(out, dtype=float)


def make_context_features(
    fv: FeatureVector, recent_contexts: Sequence[ContextSnapshot], places: Sequence[str]
) -> FeatureVector:
    """Append context features: per numeric attribute mean, variance, max - min
    and a known bit (all zero when unknown); per symbolic attribute one
    indicator per vocabulary value (all zero when unknown)."""
    block = FeatureVector(context_block(recent_contexts, places), context_feature_names(places))
    return fv.concat(block)
