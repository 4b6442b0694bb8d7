"""Multi-class base learners: logistic regression, CART and nearest centroid.

Every learner takes integer labels in ``{1..K}`` and predicts labels from the
set seen during fitting. Fitted models are immutable and serialize to a
versioned JSON-compatible dict.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DegenerateTaskError, DimensionMismatchError, InvalidParametersError

FORMAT_VERSION = 1


class LearnerKind(str, enum.Enum):
    LOGISTIC = "lr"
    TREE = "tree"
    CENTROID = "centroid"

    @classmethod
    def parse(cls, value) -> "LearnerKind":
        if isinstance(value, cls):
            return value
        aliases = {
            "lr": cls.LOGISTIC, "logistic": cls.LOGISTIC, "logisticregression": cls.LOGISTIC,
            "tree": cls.TREE, "cart": cls.TREE, "decisiontree": cls.TREE,
            "centroid": cls.CENTROID, "nc": cls.CENTROID, "nearestcentroid": cls.CENTROID,
        }
        key = str(value).strip().lower().replace("_", "").replace("-", "")
        try:
            return aliases[key]
        except KeyError:
            raise InvalidParametersError(f"unknown learner {value!r}") from None


@dataclass(frozen=True)
class LearnerSpec:
    """Learner choice plus hyperparameters.

    ``batch_size=None`` trains logistic regression with full-batch gradient
    descent, which keeps the training loss monotone.
    """

    kind: LearnerKind = LearnerKind.TREE
    learning_rate: float = 0.5
    epochs: int = 200
    l2: float = 1e-4
    batch_size: int | None = None
    max_depth: int = 20
    min_leaf: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", LearnerKind.parse(self.kind))
        if not self.learning_rate > 0:
            raise InvalidParametersError("learning_rate must be positive")
        if int(self.epochs) < 1:
            raise InvalidParametersError("epochs must be at least 1")
        if not self.l2 >= 0:
            raise InvalidParametersError("l2 must be non-negative")
        if self.batch_size is not None and int(self.batch_size) < 1:
            raise InvalidParametersError("batch_size must be at least 1")
        if int(self.max_depth) < 1:
            raise InvalidParametersError("max_depth must be at least 1")
        if int(self.min_leaf) < 1:
            raise InvalidParametersError("min_leaf must be at least 1")

    def with_seed(self, seed: int) -> "LearnerSpec":
        return LearnerSpec(**{**self.to_dict(), "seed": int(seed)})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LearnerSpec":
        return cls(**d)


def _as_features(features) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1) if x.size else x.reshape(0, 0)
    if x.ndim != 2:
        raise InvalidParametersError("features must be a 2-D matrix")
    return x


def _check_predict_input(features, n_features: int) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.size == 0:
        return np.empty((0, n_features))
    if x.ndim != 2 or x.shape[1] != n_features:
        raise DimensionMismatchError(
            f"model expects {n_features} features, got shape {x.shape}"
        )
    return x


# --------------------------------------------------------------------------
# multinomial logistic regression


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy_loss_grad(weights, bias, x, onehot, l2=0.0):
    """Mean multinomial cross-entropy with an L2 penalty on the weights.

    Returns ``(loss, grad_weights, grad_bias)``; ``weights`` has shape
    ``(d, K)`` and ``bias`` shape ``(K,)``.
    """
    n = x.shape[0]
    z = x @ weights + bias
    zmax = z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z - zmax).sum(axis=1, keepdims=True)) + zmax
    loss = float((logsum - z)[onehot.astype(bool)].sum() / n) + 0.5 * l2 * float((weights**2).sum())
    p = np.exp(z - logsum)
    delta = (p - onehot) / n
    return loss, x.T @ delta + l2 * weights, delta.sum(axis=0)


@dataclass(frozen=True, eq=False)
class LogisticModel:
    classes: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    weights: np.ndarray
    bias: np.ndarray
    n_classes: int
    spec: LearnerSpec
    loss_history: tuple = field(default=(), repr=False)

    kind = LearnerKind.LOGISTIC

    @property
    def n_features(self) -> int:
        return self.mean.size

    def decision_function(self, features) -> np.ndarray:
        x = _check_predict_input(features, self.n_features)
        return ((x - self.mean) / self.scale) @ self.weights + self.bias

    def predict(self, features) -> np.ndarray:
        scores = self.decision_function(features)
        if scores.shape[0] == 0:
            return np.empty(0, dtype=np.int64)
        return self.classes[np.argmax(scores, axis=1)]

    def params(self) -> dict:
        return {
            "classes": self.classes.tolist(),
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
        }

    @classmethod
    def from_params(cls, p, n_classes, spec):
        d = len(p["mean"])
        return cls(
            classes=np.asarray(p["classes"], dtype=np.int64),
            mean=np.asarray(p["mean"], dtype=np.float64),
            scale=np.asarray(p["scale"], dtype=np.float64),
            weights=np.asarray(p["weights"], dtype=np.float64).reshape(d, -1),
            bias=np.asarray(p["bias"], dtype=np.float64),
            n_classes=n_classes,
            spec=spec,
        )


def _fit_logistic(spec: LearnerSpec, x, y, classes, n_classes):
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    z = (x - mean) / scale
    n, d = z.shape
    k = classes.size
    onehot = (y[:, None] == classes[None, :]).astype(np.float64)

    # step <= 1/L, L = 0.5 * lambda_max([z 1]^T [z 1] / n) + l2
    aug = np.hstack([z, np.ones((n, 1))])
    lipschitz = 0.5 * float(np.linalg.eigvalsh(aug.T @ aug / n)[-1]) + spec.l2
    step = min(spec.learning_rate, 1.0 / lipschitz)

    w = np.zeros((d, k))
    b = np.zeros(k)
    rng = np.random.default_rng(spec.seed)
    batch = spec.batch_size if spec.batch_size is not None else n
    history = []
    for _ in range(spec.epochs):
        if batch >= n:
            _, gw, gb = cross_entropy_loss_grad(w, b, z, onehot, spec.l2)
            w -= step * gw
            b -= step * gb
        else:
            order = rng.permutation(n)
            for start in range(0, n, batch):
                idx = order[start:start + batch]
                _, gw, gb = cross_entropy_loss_grad(w, b, z[idx], onehot[idx], spec.l2)
                w -= step * gw
                b -= step * gb
        history.append(cross_entropy_loss_grad(w, b, z, onehot, spec.l2)[0])
    w.setflags(write=False)
    b.setflags(write=False)
    return LogisticModel(classes, mean, scale, w, b, n_classes, spec, tuple(history))


# --------------------------------------------------------------------------
# CART


@dataclass(frozen=True, eq=False)
class TreeModel:
    """Binary tree in flat arrays; ``feature == -1`` marks a leaf.

    Instances with ``x[feature] <= threshold`` go to ``left``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    depth: np.ndarray
    n_samples: np.ndarray
    n_features: int
    n_classes: int
    spec: LearnerSpec

    kind = LearnerKind.TREE

    @property
    def node_count(self) -> int:
        return self.feature.size

    @property
    def max_depth(self) -> int:
        return int(self.depth.max())

    def apply(self, features) -> np.ndarray:
        """Leaf index reached by every row."""
        x = _check_predict_input(features, self.n_features)
        node = np.zeros(x.shape[0], dtype=np.int64)
        rows = np.arange(x.shape[0])
        while True:
            f = self.feature[node]
            internal = f >= 0
            if not internal.any():
                return node
            r, nd = rows[internal], node[internal]
            go_left = x[r, f[internal]] <= self.threshold[nd]
            node[internal] = np.where(go_left, self.left[nd], self.right[nd])

    def predict(self, features) -> np.ndarray:
        return self.value[self.apply(features)]

    def params(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "depth": self.depth.tolist(),
            "n_samples": self.n_samples.tolist(),
            "n_features": self.n_features,
        }

    @classmethod
    def from_params(cls, p, n_classes, spec):
        ints = {k: np.asarray(p[k], dtype=np.int64)
                for k in ("feature", "left", "right", "value", "depth", "n_samples")}
        return cls(threshold=np.asarray(p["threshold"], dtype=np.float64),
                   n_features=int(p["n_features"]), n_classes=n_classes, spec=spec, **ints)


def _best_split(x, onehot, min_leaf):
    """Best Gini split of one node as ``(feature, threshold)`` or ``None``.

    Maximizes sum(c_left^2)/n_left + sum(c_right^2)/n_right, which minimizes
    the weighted child Gini impurity. Ties go to the lowest feature index,
    then the lowest threshold.
    """
    n, d = x.shape
    order = np.argsort(x, axis=0, kind="stable")
    xs = np.take_along_axis(x, order, axis=0)
    cum = np.cumsum(onehot[order], axis=0)[:-1]  # (n-1, d, K)
    total = onehot.sum(axis=0)
    n_left = np.arange(1, n, dtype=np.float64)[:, None]
    sq_left = np.einsum("idk,idk->id", cum, cum)
    right = total - cum
    sq_right = np.einsum("idk,idk->id", right, right)
    score = sq_left / n_left + sq_right / (n - n_left)

    valid = xs[:-1] < xs[1:]
    if min_leaf > 1:
        pos = np.arange(1, n)[:, None]
        valid &= (pos >= min_leaf) & (n - pos >= min_leaf)
    if not valid.any():
        return None
    score = np.where(valid, score, -np.inf)
    best = score.max()
    near = score >= best - 1e-12 * max(1.0, abs(best))
    j = int(np.flatnonzero(near.any(axis=0))[0])
    i = int(np.flatnonzero(near[:, j])[0])
    lo, hi = xs[i, j], xs[i + 1, j]
    threshold = lo + (hi - lo) / 2.0
    if not lo <= threshold < hi:
        threshold = lo
    return j, float(threshold)


def _fit_tree(spec: LearnerSpec, x, y, classes, n_classes):
    onehot_all = (y[:, None] == classes[None, :]).astype(np.float64)
    feature, threshold, left, right, value, depth, n_samples = [], [], [], [], [], [], []

    def new_node(idx, level):
        counts = onehot_all[idx].sum(axis=0)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(int(classes[int(np.argmax(counts))]))  # lowest label wins ties
        depth.append(level)
        n_samples.append(idx.size)
        return len(feature) - 1, counts

    root, counts = new_node(np.arange(x.shape[0]), 0)
    stack = [(root, np.arange(x.shape[0]), counts)]
    while stack:
        node, idx, counts = stack.pop()
        if (
            depth[node] >= spec.max_depth
            or idx.size < 2 * spec.min_leaf
            or np.count_nonzero(counts) < 2
        ):
            continue
        split = _best_split(x[idx], onehot_all[idx], spec.min_leaf)
        if split is None:
            continue
        j, thr = split
        mask = x[idx, j] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node] = j
        threshold[node] = thr
        lnode, lcounts = new_node(li, depth[node] + 1)
        rnode, rcounts = new_node(ri, depth[node] + 1)
        left[node], right[node] = lnode, rnode
        stack.append((rnode, ri, rcounts))
        stack.append((lnode, li, lcounts))

    arr = lambda v, t=np.int64: np.asarray(v, dtype=t)  # noqa: E731
    return TreeModel(
        feature=arr(feature), threshold=arr(threshold, np.float64), left=arr(left),
        right=arr(right), value=arr(value), depth=arr(depth), n_samples=arr(n_samples),
        n_features=x.shape[1], n_classes=n_classes, spec=spec,
    )


# --------------------------------------------------------------------------
# nearest centroid


@dataclass(frozen=True, eq=False)
class CentroidModel:
    classes: np.ndarray
    centroids: np.ndarray
    n_classes: int
    spec: LearnerSpec

    kind = LearnerKind.CENTROID

    @property
    def n_features(self) -> int:
        return self.centroids.shape[1]

    def predict(self, features) -> np.ndarray:
        x = _check_predict_input(features, self.n_features)
        if x.shape[0] == 0:
            return np.empty(0, dtype=np.int64)
        d2 = ((x[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=2)
        return self.classes[np.argmin(d2, axis=1)]

    def params(self) -> dict:
        return {"classes": self.classes.tolist(), "centroids": self.centroids.tolist()}

    @classmethod
    def from_params(cls, p, n_classes, spec):
        return cls(np.asarray(p["classes"], dtype=np.int64),
                   np.asarray(p["centroids"], dtype=np.float64), n_classes, spec)


def _fit_centroid(spec, x, y, classes, n_classes):
    centroids = np.stack([x[y == c].mean(axis=0) for c in classes])
    return CentroidModel(classes, centroids, n_classes, spec)


# --------------------------------------------------------------------------

_FITTERS = {
    LearnerKind.LOGISTIC: _fit_logistic,
    LearnerKind.TREE: _fit_tree,
    LearnerKind.CENTROID: _fit_centroid,
}
_MODELS = {
    LearnerKind.LOGISTIC: LogisticModel,
    LearnerKind.TREE: TreeModel,
    LearnerKind.CENTROID: CentroidModel,
}


def fit(spec: LearnerSpec, features, labels):
    """Fit a base model on labels in ``{1..K}`` with ``K = max(labels)``.

    Raises :class:`DegenerateTaskError` if fewer than two labels are present.
    """
    x = _as_features(features)
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if x.shape[0] != y.size:
        raise DimensionMismatchError(f"{x.shape[0]} feature rows but {y.size} labels")
    if y.size == 0:
        raise DegenerateTaskError("no training instances")
    if y.min() < 1:
        raise InvalidParametersError("labels must be positive")
    if not np.isfinite(x).all():
        raise InvalidParametersError("features must be finite")
    classes = np.unique(y)
    if classes.size < 2:
        raise DegenerateTaskError(f"only one group ({classes[0]}) present")
    return _FITTERS[spec.kind](spec, x, y, classes, int(y.max()))


def predict(model, features) -> np.ndarray:
    return model.predict(features)


def model_to_dict(model) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": model.kind.value,
        "n_classes": model.n_classes,
        "hyperparameters": model.spec.to_dict(),
        "parameters": model.params(),
    }


def model_from_dict(d: dict):
    if d.get("format_version") != FORMAT_VERSION:
        raise InvalidParametersError(f"unsupported model format {d.get('format_version')!r}")
    kind = LearnerKind.parse(d["kind"])
    spec = LearnerSpec.from_dict(d["hyperparameters"])
    return _MODELS[kind].from_params(d["parameters"], int(d["n_classes"]), spec)
