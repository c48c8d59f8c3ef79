"""Gradient-boosted regression trees with second-order logistic loss.

Each boosting round fits one regression tree to the current gradient and
hessian of the logistic loss (g = p - y, h = p(1 - p)) using exact greedy
split search. Split quality is the standard second-order gain

    0.5 * [G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)] - gamma

and leaf weights are -G/(H+lambda). Missing feature values are encoded as a
sentinel constant and routed through a per-split learned default direction;
NaN inputs are rejected outright. Predictions are sigmoid(base_margin +
learning_rate * sum of tree outputs), so the relatedness score always lands
strictly inside (0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .container import BinaryReader, BinaryWriter

# Sentinel for "feature has no representation for this pair". Chosen far
# outside the range of any real feature; NaN is reserved for caller bugs.
MISSING_VALUE = -1e30


class GbdtError(ValueError):
    """Raised for invalid training data or malformed models."""


@dataclass
class GbdtParams:
    num_rounds: int = 200
    max_depth: int = 4
    learning_rate: float = 0.1
    min_child_weight: float = 1.0
    reg_lambda: float = 1.0
    gamma: float = 0.0
    subsample: float = 0.8
    seed: int = 7

    def validate(self) -> None:
        if self.num_rounds < 1 or self.max_depth < 1:
            raise GbdtError("num_rounds and max_depth must be positive")
        if not 0.0 < self.subsample <= 1.0:
            raise GbdtError("subsample must be in (0, 1]")
        if self.reg_lambda < 0 or self.gamma < 0 or self.min_child_weight < 0:
            raise GbdtError("regularization parameters must be nonnegative")


class RegressionTree:
    """Flat-array tree: feature < 0 marks a leaf, value holds its weight."""

    def __init__(
        self,
        feature: np.ndarray,
        threshold: np.ndarray,
        left: np.ndarray,
        right: np.ndarray,
        default_left: np.ndarray,
        value: np.ndarray,
        gain: np.ndarray,
    ):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.default_left = default_left
        self.value = value
        self.gain = gain

    def __len__(self) -> int:
        return len(self.feature)

    def predict_row(self, row: np.ndarray) -> float:
        """Scalar descent for one example; the online path is latency-bound."""
        node = 0
        feature = self.feature
        while feature[node] >= 0:
            x = row[feature[node]]
            if x == MISSING_VALUE:
                go_left = bool(self.default_left[node])
            else:
                go_left = x < self.threshold[node]
            node = self.left[node] if go_left else self.right[node]
        return float(self.value[node])

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Leaf weights for each row, vectorized level-by-level descent."""
        node = np.zeros(len(X), dtype=np.int64)
        out = np.zeros(len(X), dtype=np.float64)
        active = np.arange(len(X))
        while active.size:
            current = node[active]
            leaf = self.feature[current] < 0
            out[active[leaf]] = self.value[current[leaf]]
            active = active[~leaf]
            if not active.size:
                break
            current = node[active]
            feat = self.feature[current]
            x = X[active, feat]
            go_left = np.where(
                x == MISSING_VALUE,
                self.default_left[current].astype(bool),
                x < self.threshold[current],
            )
            node[active] = np.where(go_left, self.left[current], self.right[current])
        return out


@dataclass
class GbdtModel:
    trees: list[RegressionTree]
    learning_rate: float
    base_margin: float
    feature_count: int
    train_losses: list[float] = field(default_factory=list)

    def predict_margin(self, X: np.ndarray) -> np.ndarray:
        if X.ndim != 2 or X.shape[1] != self.feature_count:
            raise GbdtError(
                f"feature dimension mismatch: got {X.shape}, expected (*, {self.feature_count})"
            )
        margin = np.full(len(X), self.base_margin, dtype=np.float64)
        for tree in self.trees:
            margin += self.learning_rate * tree.predict(X)
        return margin

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(self.predict_margin(X))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class _SplitDecision:
    __slots__ = ("gain", "feature", "threshold", "default_left")

    def __init__(self, gain: float, feature: int, threshold: float, default_left: bool):
        self.gain = gain
        self.feature = feature
        self.threshold = threshold
        self.default_left = default_left


def _leaf_weight(g_sum: float, h_sum: float, reg_lambda: float) -> float:
    return -g_sum / (h_sum + reg_lambda)


def _score(g_sum: np.ndarray, h_sum: np.ndarray, reg_lambda: float) -> np.ndarray:
    return g_sum * g_sum / (h_sum + reg_lambda)


def _find_best_split(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    rows: np.ndarray,
    params: GbdtParams,
) -> _SplitDecision | None:
    """Exact greedy search over every (feature, midpoint threshold) pair.

    Missing-value rows are held out of the scan and attached to whichever
    side yields higher gain; exact ties prefer the left route, the earlier
    threshold, and the lower feature index, in that order, so training is
    order-independent and deterministic.
    """
    g_total = float(g[rows].sum())
    h_total = float(h[rows].sum())
    parent_score = _score(np.float64(g_total), np.float64(h_total), params.reg_lambda)
    best: _SplitDecision | None = None

    for feature in range(X.shape[1]):
        xs = X[rows, feature]
        present_mask = xs != MISSING_VALUE
        present = rows[present_mask]
        if present.size < 2:
            continue
        xv = X[present, feature]
        order = np.argsort(xv, kind="stable")
        xv = xv[order]
        sorted_rows = present[order]
        boundaries = np.nonzero(xv[:-1] < xv[1:])[0]
        if boundaries.size == 0:
            continue

        cg = np.cumsum(g[sorted_rows])
        ch = np.cumsum(h[sorted_rows])
        g_missing = g_total - float(cg[-1])
        h_missing = h_total - float(ch[-1])

        gl = cg[boundaries]
        hl = ch[boundaries]
        gr = cg[-1] - gl
        hr = ch[-1] - hl
        thresholds = (xv[boundaries] + xv[boundaries + 1]) / 2.0

        for route_left in (True, False):
            gl_r = gl + g_missing if route_left else gl
            hl_r = hl + h_missing if route_left else hl
            gr_r = gr if route_left else gr + g_missing
            hr_r = hr if route_left else hr + h_missing
            valid = (hl_r >= params.min_child_weight) & (hr_r >= params.min_child_weight)
            if not valid.any():
                continue
            gains = 0.5 * (
                _score(gl_r, hl_r, params.reg_lambda)
                + _score(gr_r, hr_r, params.reg_lambda)
                - parent_score
            ) - params.gamma
            gains = np.where(valid, gains, -np.inf)
            pick = int(np.argmax(gains))
            gain = float(gains[pick])
            if gain <= 0.0:
                continue
            if best is None or gain > best.gain:
                best = _SplitDecision(gain, feature, float(thresholds[pick]), route_left)
    return best


def _build_tree(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    rows: np.ndarray,
    params: GbdtParams,
) -> RegressionTree:
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    default_left: list[int] = []
    value: list[float] = []
    gain: list[float] = []

    def add_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        default_left.append(1)
        value.append(0.0)
        gain.append(0.0)
        return len(feature) - 1

    def grow(rows_here: np.ndarray, depth: int) -> int:
        node = add_node()
        g_sum = float(g[rows_here].sum())
        h_sum = float(h[rows_here].sum())
        split = None
        if depth < params.max_depth and rows_here.size >= 2:
            split = _find_best_split(X, g, h, rows_here, params)
        if split is None:
            value[node] = _leaf_weight(g_sum, h_sum, params.reg_lambda)
            return node
        xs = X[rows_here, split.feature]
        missing = xs == MISSING_VALUE
        go_left = np.where(missing, split.default_left, xs < split.threshold)
        feature[node] = split.feature
        threshold[node] = split.threshold
        default_left[node] = int(split.default_left)
        gain[node] = split.gain
        left[node] = grow(rows_here[go_left], depth + 1)
        right[node] = grow(rows_here[~go_left], depth + 1)
        return node

    grow(rows, 0)
    return RegressionTree(
        feature=np.array(feature, dtype=np.int32),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int32),
        right=np.array(right, dtype=np.int32),
        default_left=np.array(default_left, dtype=np.int32),
        value=np.array(value, dtype=np.float64),
        gain=np.array(gain, dtype=np.float64),
    )


def train_gbdt(X: np.ndarray, y: np.ndarray, params: GbdtParams | None = None) -> GbdtModel:
    """Fit boosted trees on binary labels (related = 1, unrelated = 0).

    Requires both classes present and fully finite features (the missing
    sentinel is a legal value, NaN is not). Given a fixed seed the trained
    model is bit-reproducible.
    """
    params = params or GbdtParams()
    params.validate()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y):
        raise GbdtError("X must be 2-D with one label per row")
    if np.isnan(X).any():
        raise GbdtError("NaN feature values are not allowed; use MISSING_VALUE")
    if not np.isin(y, (0.0, 1.0)).all():
        raise GbdtError("labels must be binary 0/1")
    if y.min() == y.max():
        raise GbdtError("training labels contain a single class")

    rng = np.random.default_rng(params.seed)
    n = len(y)
    margins = np.zeros(n, dtype=np.float64)
    model = GbdtModel(trees=[], learning_rate=params.learning_rate, base_margin=0.0, feature_count=X.shape[1])

    for _ in range(params.num_rounds):
        p = _sigmoid(margins)
        g = p - y
        h = p * (1.0 - p)
        if params.subsample < 1.0:
            take = max(1, int(round(params.subsample * n)))
            rows = np.sort(rng.choice(n, size=take, replace=False))
        else:
            rows = np.arange(n)
        tree = _build_tree(X, g, h, rows, params)
        model.trees.append(tree)
        margins += params.learning_rate * tree.predict(X)
        p_new = _sigmoid(margins)
        eps = 1e-12
        loss = float(-np.mean(y * np.log(p_new + eps) + (1.0 - y) * np.log(1.0 - p_new + eps)))
        model.train_losses.append(loss)
    return model


def predict_rel(model: GbdtModel, features: np.ndarray) -> float:
    """Relatedness score for a single feature vector, strictly in (0, 1)."""
    arr = np.asarray(features, dtype=np.float64).reshape(-1)
    if arr.shape[0] != model.feature_count:
        raise GbdtError(
            f"feature dimension mismatch: got {arr.shape[0]}, expected {model.feature_count}"
        )
    margin = model.base_margin
    for tree in model.trees:
        margin += model.learning_rate * tree.predict_row(arr)
    return float(_sigmoid(np.array([margin]))[0])


def feature_importance(model: GbdtModel) -> dict[int, float]:
    """Per-feature share of total split gain; empty when no tree ever split."""
    totals: dict[int, float] = {}
    for tree in model.trees:
        for feat, gain in zip(tree.feature, tree.gain):
            if feat >= 0:
                totals[int(feat)] = totals.get(int(feat), 0.0) + float(gain)
    grand = sum(totals.values())
    if grand <= 0.0:
        return {}
    return {feat: g / grand for feat, g in sorted(totals.items())}


def grouped_importance(model: GbdtModel, families: list[str]) -> dict[str, float]:
    """Importance shares summed by feature family name."""
    shares = feature_importance(model)
    grouped: dict[str, float] = {}
    for feat, share in shares.items():
        family = families[feat]
        grouped[family] = grouped.get(family, 0.0) + share
    return grouped


def serialize_gbdt(model: GbdtModel) -> bytes:
    w = BinaryWriter()
    w.u32(model.feature_count)
    w.f64(model.learning_rate)
    w.f64(model.base_margin)
    w.u32(len(model.trees))
    for tree in model.trees:
        w.u32(len(tree))
        w.i32_array(tree.feature)
        w.f64_array(tree.threshold)
        w.i32_array(tree.left)
        w.i32_array(tree.right)
        w.i32_array(tree.default_left)
        w.f64_array(tree.value)
        w.f64_array(tree.gain)
    return w.getvalue()


def deserialize_gbdt(payload: bytes) -> GbdtModel:
    r = BinaryReader(payload)
    feature_count = r.u32()
    learning_rate = r.f64()
    base_margin = r.f64()
    tree_count = r.u32()
    trees = []
    for _ in range(tree_count):
        size = r.u32()
        tree = RegressionTree(
            feature=r.i32_array(),
            threshold=r.f64_array(),
            left=r.i32_array(),
            right=r.i32_array(),
            default_left=r.i32_array(),
            value=r.f64_array(),
            gain=r.f64_array(),
        )
        if len(tree) != size:
            raise GbdtError("tree node count mismatch in serialized model")
        trees.append(tree)
    r.expect_end()
    return GbdtModel(
        trees=trees,
        learning_rate=learning_rate,
        base_margin=base_margin,
        feature_count=feature_count,
    )
