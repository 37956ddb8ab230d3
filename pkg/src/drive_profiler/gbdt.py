"""Multiclass gradient-boosted regression trees.

Softmax over per-class raw scores, one Newton-step regression tree per
class and boosting round, exact greedy split search over sorted feature
values.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .classes import N_CLASSES

SCHEMA_VERSION = 1
MODEL_FORMAT = "drive_profiler.gbdt"

# Relative tolerance under which two gains count as equal, and under which a
# gain counts as zero. Both absorb summation-order rounding.
GAIN_RTOL = 1e-10
_HESS_FLOOR = 1e-16


class ModelFormatError(ValueError):
    """A model document cannot be read."""


class FeatureMismatchError(ValueError):
    """Input features do not match the ordering the model was trained on."""


@dataclass(frozen=True)
class Hyperparameters:
    learning_rate: float = 0.1
    max_depth: int = 4
    n_estimators: int = 50
    l2_reg: float = 1.0
    min_samples_leaf: int = 5
    random_state: int = 0

    def __post_init__(self):
        if not 0 < self.learning_rate <= 1:
            raise ValueError(f"learning_rate must be in (0, 1], got {self.learning_rate}")
        if int(self.max_depth) != self.max_depth or self.max_depth < 1:
            raise ValueError(f"max_depth must be an integer >= 1, got {self.max_depth}")
        if int(self.n_estimators) != self.n_estimators or self.n_estimators < 1:
            raise ValueError(f"n_estimators must be an integer >= 1, got {self.n_estimators}")
        if self.l2_reg < 0:
            raise ValueError(f"l2_reg must be >= 0, got {self.l2_reg}")
        if int(self.min_samples_leaf) != self.min_samples_leaf or self.min_samples_leaf < 1:
            raise ValueError(f"min_samples_leaf must be an integer >= 1, got {self.min_samples_leaf}")

    @classmethod
    def from_dict(cls, doc: dict) -> "Hyperparameters":
        known = {k: doc[k] for k in cls.__dataclass_fields__ if k in doc}
        for k in ("max_depth", "n_estimators", "min_samples_leaf", "random_state"):
            if k in known:
                known[k] = int(known[k])
        for k in ("learning_rate", "l2_reg"):
            if k in known:
                known[k] = float(known[k])
        return cls(**known)


# --- loss mechanics ----------------------------------------------------------

def softmax(scores):
    s = np.asarray(scores, dtype=float)
    with np.errstate(over="ignore"):  # -inf after the shift is harmless
        e = np.exp(s - s.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def grad_hess(probs, true_class):
    """Gradient and diagonal Hessian of the multi-logloss w.r.t. raw scores.

    Works on a single probability vector with an integer class, or on an
    ``(n, K)`` matrix with an array of classes.
    """
    p = np.asarray(probs, dtype=float)
    onehot = np.zeros_like(p)
    if p.ndim == 1:
        onehot[int(true_class)] = 1.0
    else:
        onehot[np.arange(p.shape[0]), np.asarray(true_class)] = 1.0
    return p - onehot, p * (1.0 - p)


def multi_logloss(scores, y) -> float:
    s = np.atleast_2d(np.asarray(scores, dtype=float))
    y = np.atleast_1d(y)
    m = s.max(axis=1)
    lse = m + np.log(np.exp(s - m[:, None]).sum(axis=1))
    return float(np.mean(lse - s[np.arange(s.shape[0]), y]))


def leaf_value(G: float, H: float, l2_reg: float) -> float:
    return -G / (H + l2_reg)


# --- split search ------------------------------------------------------------

class Split(NamedTuple):
    feature: int
    threshold: float
    gain: float


def split_gain(GL, HL, GR, HR, l2_reg):
    G, H = GL + GR, HL + HR
    return 0.5 * (GL * GL / (HL + l2_reg) + GR * GR / (HR + l2_reg) - G * G / (H + l2_reg))


def _midpoint(a: float, b: float) -> float:
    m = 0.5 * (a + b)
    # adjacent doubles can round the midpoint up onto b
    return a if m >= b else m


def best_split(X, grad, hess, l2_reg: float = 1.0, min_samples_leaf: int = 1) -> Optional[Split]:
    """Exact greedy search for the gain-maximising (feature, threshold).

    Rows with ``x <= threshold`` go left. Candidate thresholds are midpoints
    between adjacent distinct values; both children need at least
    ``min_samples_leaf`` rows. Ties go to the lowest feature index, then the
    lowest threshold. Returns ``None`` when no candidate has positive gain.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    g = np.asarray(grad, dtype=float)
    h = np.asarray(hess, dtype=float)
    n, d = X.shape
    if n < 2 * min_samples_leaf or n < 2:
        return None

    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    GL = np.cumsum(g[order], axis=0)[:-1]
    HL = np.cumsum(h[order], axis=0)[:-1]
    G, H = g.sum(), h.sum()
    gain = split_gain(GL, HL, G - GL, H - HL, l2_reg)

    left_n = np.arange(1, n)[:, None]
    valid = (xs[1:] > xs[:-1]) & (left_n >= min_samples_leaf) & (n - left_n >= min_samples_leaf)
    if not valid.any():
        return None
    gain = np.where(valid, gain, -np.inf)

    best = gain.max()
    scale = max(1.0, 0.5 * G * G / (H + l2_reg), abs(best))
    if best <= GAIN_RTOL * scale:
        return None
    near = gain >= best - GAIN_RTOL * scale
    f = int(np.argmax(near.any(axis=0)))
    i = int(np.argmax(near[:, f]))
    return Split(f, _midpoint(xs[i, f], xs[i + 1, f]), float(gain[i, f]))


# --- trees -------------------------------------------------------------------

@dataclass
class Tree:
    """Flat binary tree. Leaves have ``feature == -1`` and children -1."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):  # children always come after parents
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        node = np.zeros(X.shape[0], dtype=np.intp)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return self.value[node]
            r = rows[inner]
            n = node[inner]
            go_left = X[r, f[inner]] <= self.threshold[n]
            node[inner] = np.where(go_left, self.left[n], self.right[n])

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Tree":
        tree = cls(
            np.asarray(doc["feature"], dtype=np.intp),
            np.asarray(doc["threshold"], dtype=float),
            np.asarray(doc["left"], dtype=np.intp),
            np.asarray(doc["right"], dtype=np.intp),
            np.asarray(doc["value"], dtype=float),
        )
        n = tree.n_nodes
        if n == 0 or not all(a.shape == (n,) for a in
                             (tree.threshold, tree.left, tree.right, tree.value)):
            raise ModelFormatError("tree arrays are empty or of unequal length")
        inner = tree.feature >= 0
        idx = np.arange(n)
        if (np.any(tree.left[inner] <= idx[inner]) or np.any(tree.right[inner] <= idx[inner])
                or np.any(tree.left[inner] >= n) or np.any(tree.right[inner] >= n)):
            raise ModelFormatError("tree child indices out of range")
        return tree


def grow_tree(X, grad, hess, max_depth: int, l2_reg: float, min_samples_leaf: int) -> Tree:
    """Grow one regression tree depth-first on Newton statistics."""
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        for arr, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1), (value, 0.0)):
            arr.append(v)
        return len(feature) - 1

    def grow(node, idx, depth):
        g, h = grad[idx], hess[idx]
        split = None
        if depth < max_depth:
            split = best_split(X[idx], g, h, l2_reg, min_samples_leaf)
        if split is None:
            value[node] = leaf_value(g.sum(), h.sum(), l2_reg)
            return
        feature[node] = split.feature
        threshold[node] = split.threshold
        mask = X[idx, split.feature] <= split.threshold
        left[node] = new_node()
        right[node] = new_node()
        grow(left[node], idx[mask], depth + 1)
        grow(right[node], idx[~mask], depth + 1)

    grow(new_node(), np.arange(X.shape[0]), 0)
    return Tree(np.asarray(feature, dtype=np.intp), np.asarray(threshold, dtype=float),
                np.asarray(left, dtype=np.intp), np.asarray(right, dtype=np.intp),
                np.asarray(value, dtype=float))


# --- model -------------------------------------------------------------------

@dataclass
class GbdtModel:
    hyperparameters: Hyperparameters
    init_scores: np.ndarray
    trees: list = field(default_factory=list)
    n_features: int = 0
    feature_hash: Optional[str] = None
    n_classes: int = N_CLASSES
    train_loss: list = field(default_factory=list)
    normalizer: Optional[dict] = None

    @property
    def rounds(self) -> int:
        return len(self.trees) // self.n_classes

    def raw_scores(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        scores = np.tile(self.init_scores, (X.shape[0], 1))
        lr = self.hyperparameters.learning_rate
        for r in range(self.rounds):
            for k in range(self.n_classes):
                scores[:, k] += lr * self.trees[r * self.n_classes + k].predict(X)
        return scores

    def max_depth(self) -> int:
        return max((t.depth() for t in self.trees), default=0)


def fit(X, y, hp: Hyperparameters, feature_names: Optional[Sequence[str]] = None,
        feature_hash: Optional[str] = None, normalizer: Optional[dict] = None,
        n_classes: int = N_CLASSES) -> GbdtModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("training set is empty")
    if y.shape != (X.shape[0],):
        raise ValueError(f"{X.shape[0]} feature rows but {y.size} labels")
    if feature_names is not None and len(feature_names) != X.shape[1]:
        raise ValueError(f"{len(feature_names)} feature names for {X.shape[1]} columns")
    if X.shape[0] < n_classes:
        raise ValueError(f"need at least {n_classes} training samples")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    y = y.astype(int)
    if y.min() < 0 or y.max() >= n_classes:
        raise ValueError(f"labels must lie in [0, {n_classes - 1}]")

    counts = np.bincount(y, minlength=n_classes)
    if np.any(counts == 0):
        warnings.warn(f"classes {np.flatnonzero(counts == 0).tolist()} absent from training data",
                      RuntimeWarning, stacklevel=2)
    init = np.log(np.maximum(counts / y.size, 1e-12))
    if feature_hash is None and feature_names is not None:
        from .pipeline import feature_hash as _hash
        feature_hash = _hash(feature_names)

    model = GbdtModel(hp, init, [], X.shape[1], feature_hash, n_classes, [], normalizer)
    scores = np.tile(init, (y.size, 1))
    for _ in range(hp.n_estimators):
        g, h = grad_hess(softmax(scores), y)
        h = np.maximum(h, _HESS_FLOOR)
        for k in range(n_classes):
            tree = grow_tree(X, g[:, k], h[:, k], hp.max_depth, hp.l2_reg, hp.min_samples_leaf)
            model.trees.append(tree)
            scores[:, k] += hp.learning_rate * tree.predict(X)
        model.train_loss.append(multi_logloss(scores, y))
    return model


def _check_input(model: GbdtModel, X, feature_hash):
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X2 = X[None, :] if single else X
    if X2.ndim != 2 or X2.shape[1] != model.n_features:
        raise FeatureMismatchError(
            f"model expects {model.n_features} features, got shape {X.shape}")
    if feature_hash is not None and model.feature_hash is not None and feature_hash != model.feature_hash:
        raise FeatureMismatchError(
            f"feature ordering hash {feature_hash} does not match model hash {model.feature_hash}")
    return X2, single


def predict_proba(model: GbdtModel, X, feature_hash: Optional[str] = None) -> np.ndarray:
    X2, single = _check_input(model, X, feature_hash)
    p = softmax(model.raw_scores(X2))
    return p[0] if single else p


def predict(model: GbdtModel, X, feature_hash: Optional[str] = None):
    p = predict_proba(model, X, feature_hash)
    return np.argmax(p, axis=-1)


# --- serialization -----------------------------------------------------------

def serialize(model: GbdtModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "schema_version": SCHEMA_VERSION,
        "hyperparameters": asdict(model.hyperparameters),
        "n_classes": model.n_classes,
        "n_features": model.n_features,
        "feature_hash": model.feature_hash,
        "init_scores": model.init_scores.tolist(),
        "train_loss": list(model.train_loss),
        "normalizer": model.normalizer,
        "trees": [t.to_dict() for t in model.trees],
    }


def deserialize(doc) -> GbdtModel:
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"model document is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError("not a gbdt model document")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ModelFormatError(
            f"model schema version {version} is not supported (this build reads version {SCHEMA_VERSION})")
    try:
        hp = Hyperparameters.from_dict(doc["hyperparameters"])
        n_classes = int(doc["n_classes"])
        trees = [Tree.from_dict(t) for t in doc["trees"]]
        model = GbdtModel(
            hyperparameters=hp,
            init_scores=np.asarray(doc["init_scores"], dtype=float),
            trees=trees,
            n_features=int(doc["n_features"]),
            feature_hash=doc.get("feature_hash"),
            n_classes=n_classes,
            train_loss=[float(v) for v in doc.get("train_loss", [])],
            normalizer=doc.get("normalizer"),
        )
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model document: {exc!r}") from None
    if model.init_scores.shape != (n_classes,):
        raise ModelFormatError("init_scores length does not match n_classes")
    if len(trees) % n_classes:
        raise ModelFormatError(f"{len(trees)} trees is not a multiple of {n_classes} classes")
    for t in trees:
        if np.any(t.feature >= model.n_features):
            raise ModelFormatError("tree splits on a feature index beyond n_features")
    return model


def dumps(model: GbdtModel) -> str:
    return json.dumps(serialize(model))


def loads(text: str) -> GbdtModel:
    return deserialize(text)
