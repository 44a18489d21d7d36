"""Class-weighted kernel SVM trained by sequential minimal optimization.

The solver is the classic two-at-a-time working-set method: pick a
multiplier violating the KKT conditions, pair it with a second one
chosen to make the largest step, and solve the two-variable problem
analytically. Per-class box constraints implement asymmetric loss
weights for imbalanced data. Online updates append a sample and
re-solve warm-started from the previous dual solution, which keeps
hyperparameters fixed while folding in every newly labeled event.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .select import ColumnNormalizer, check_binary_labels

logger = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    """SMO failed to satisfy the KKT conditions within the sweep budget."""


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and shape parameters."""

    kind: str = "linear"
    degree: int = 3
    coef0: float = 1.0
    width: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "poly", "gaussian"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "poly" and self.degree < 1:
            raise ValueError("polynomial degree must be >= 1")
        if self.kind == "gaussian" and self.width <= 0:
            raise ValueError("gaussian width must be positive")

    @property
    def complexity_rank(self) -> float:
        """Ordering used for tie-breaks: prefer simpler kernels."""
        if self.kind == "linear":
            return 1.0
        if self.kind == "poly":
            return float(self.degree)
        return math.inf

    def to_dict(self) -> dict:
        return {"kind": self.kind, "degree": self.degree,
                "coef0": self.coef0, "width": self.width}

    @classmethod
    def from_dict(cls, obj: dict) -> "KernelSpec":
        return cls(kind=obj["kind"], degree=int(obj.get("degree", 3)),
                   coef0=float(obj.get("coef0", 1.0)),
                   width=float(obj.get("width", 1.0)))

    def __str__(self) -> str:
        if self.kind == "poly":
            return f"poly{self.degree}"
        if self.kind == "gaussian":
            return f"gaussian({self.width:g})"
        return "linear"


def kernel_matrix(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Gram matrix K[i, j] = k(A[i], B[j])."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if spec.kind == "linear":
        return A @ B.T
    if spec.kind == "poly":
        return (A @ B.T + spec.coef0) ** spec.degree
    sq = (
        (A * A).sum(axis=1)[:, None]
        - 2.0 * (A @ B.T)
        + (B * B).sum(axis=1)[None, :]
    )
    return np.exp(-np.maximum(sq, 0.0) / (2.0 * spec.width ** 2))


@dataclass
class KernelClassifier:
    """A trained soft-margin kernel machine over its training pool.

    The full pool is retained (including zero-coefficient vectors) so
    warm-started online updates can re-solve from the stored dual
    state. ``labels`` are 0/1; internally the solver works in +-1.
    """

    spec: KernelSpec
    c: float
    class_weights: dict[int, float]
    vectors: np.ndarray
    labels: np.ndarray
    alphas: np.ndarray
    bias: float
    tol: float = 1e-3

    @property
    def signs(self) -> np.ndarray:
        return 2.0 * self.labels - 1.0

    @property
    def boxes(self) -> np.ndarray:
        w = np.array([self.class_weights[int(l)] for l in self.labels])
        return self.c * w

    @property
    def support_mask(self) -> np.ndarray:
        return self.alphas > 0

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        K = kernel_matrix(self.spec, self.vectors, X)
        return (self.alphas * self.signs) @ K + self.bias

    def predict(self, X: np.ndarray, threshold: float = 0.0) -> np.ndarray:
        return (self.decision_function(X) >= threshold).astype(np.int64)

    def kkt_max_residual(self) -> float:
        """Largest violation of the optimality conditions on the pool.

        Alphas within rounding distance of a bound count as sitting on
        it; otherwise a coefficient one ulp short of its box would be
        scored as a free vector and demand a unit margin.
        """
        margins = self.signs * self.decision_function(self.vectors)
        res = 0.0
        for a, box, m in zip(self.alphas, self.boxes, margins):
            slack = 1e-9 * max(1.0, box)
            if a <= slack:
                res = max(res, 1.0 - m)
            elif a >= box - slack:
                res = max(res, m - 1.0)
            else:
                res = max(res, abs(m - 1.0))
        return max(res, 0.0)

    def to_dict(self) -> dict:
        return {
            "kernel": self.spec.to_dict(),
            "c": self.c,
            "class_weights": {str(k): v for k, v in self.class_weights.items()},
            "vectors": self.vectors.tolist(),
            "labels": self.labels.astype(int).tolist(),
            "alphas": self.alphas.tolist(),
            "bias": self.bias,
            "tol": self.tol,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "KernelClassifier":
        return cls(
            spec=KernelSpec.from_dict(obj["kernel"]),
            c=float(obj["c"]),
            class_weights={int(k): float(v)
                           for k, v in obj["class_weights"].items()},
            vectors=np.asarray(obj["vectors"], dtype=np.float64),
            labels=np.asarray(obj["labels"], dtype=np.int64),
            alphas=np.asarray(obj["alphas"], dtype=np.float64),
            bias=float(obj["bias"]),
            tol=float(obj.get("tol", 1e-3)),
        )


def _solve_smo(
    K: np.ndarray,
    t: np.ndarray,
    boxes: np.ndarray,
    tol: float,
    max_sweeps: int,
    rng: np.random.Generator,
    alphas: np.ndarray,
    bias: float,
) -> tuple[np.ndarray, float]:
    n = len(t)
    eps = 1e-12
    err = (alphas * t) @ K + bias - t

    def take_step(i1: int, i2: int) -> bool:
        nonlocal bias, err
        if i1 == i2:
            return False
        a1o, a2o = alphas[i1], alphas[i2]
        t1, t2 = t[i1], t[i2]
        s = t1 * t2
        c1, c2 = boxes[i1], boxes[i2]
        if s < 0:
            gamma = a2o - a1o
            lo, hi = max(0.0, gamma), min(c2, c1 + gamma)
        else:
            gamma = a2o + a1o
            lo, hi = max(0.0, gamma - c1), min(c2, gamma)
        if hi - lo < eps:
            return False
        e1, e2 = err[i1], err[i2]
        k11, k12, k22 = K[i1, i1], K[i1, i2], K[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > eps:
            a2 = a2o + t2 * (e1 - e2) / eta
            a2 = min(max(a2, lo), hi)
        else:
            # flat direction (duplicate rows): objective is linear here
            gradient = t2 * (e1 - e2)
            if gradient > eps:
                a2 = hi
            elif gradient < -eps:
                a2 = lo
            else:
                return False
        if abs(a2 - a2o) < eps * (a2 + a2o + eps):
            return False
        a1 = a1o + s * (a2o - a2)
        if a1 < 0.0:
            a2 += s * a1
            a1 = 0.0
        elif a1 > c1:
            a2 += s * (a1 - c1)
            a1 = c1
        d1, d2 = t1 * (a1 - a1o), t2 * (a2 - a2o)
        b1 = bias - e1 - d1 * k11 - d2 * k12
        b2 = bias - e2 - d1 * k12 - d2 * k22
        if 0.0 < a1 < c1:
            b_new = b1
        elif 0.0 < a2 < c2:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)
        err += d1 * K[i1] + d2 * K[i2] + (b_new - bias)
        alphas[i1], alphas[i2] = a1, a2
        bias = b_new
        return True

    def examine(i2: int) -> bool:
        t2, a2 = t[i2], alphas[i2]
        r2 = err[i2] * t2
        if not ((r2 < -tol and a2 < boxes[i2]) or (r2 > tol and a2 > 0)):
            return False
        nonbound = np.flatnonzero((alphas > eps) & (alphas < boxes - eps))
        if len(nonbound) > 1:
            i1 = int(nonbound[np.argmax(np.abs(err[nonbound] - err[i2]))])
            if take_step(i1, i2):
                return True
        if len(nonbound):
            start = int(rng.integers(len(nonbound)))
            for k in range(len(nonbound)):
                if take_step(int(nonbound[(start + k) % len(nonbound)]), i2):
                    return True
        start = int(rng.integers(n))
        for k in range(n):
            if take_step((start + k) % n, i2):
                return True
        return False

    examine_all = True
    changed = 0
    sweeps = 0
    while changed > 0 or examine_all:
        changed = 0
        targets = (range(n) if examine_all else
                   np.flatnonzero((alphas > eps) & (alphas < boxes - eps)))
        for i2 in targets:
            changed += examine(int(i2))
        sweeps += 1
        if sweeps > max_sweeps:
            raise ConvergenceError(
                f"no KKT convergence after {sweeps} sweeps "
                f"(n={n}, last sweep changed {changed})"
            )
        if examine_all:
            examine_all = False
        elif changed == 0:
            examine_all = True
    return alphas, bias


def train(
    X: np.ndarray,
    y: np.ndarray,
    kernel: KernelSpec,
    c: float,
    class_weights: Mapping[int, float] | None = None,
    *,
    tol: float = 1e-3,
    max_sweeps: int = 20000,
    seed: int = 0,
    warm_start: tuple[np.ndarray, float] | None = None,
) -> KernelClassifier:
    """Fit the dual problem to KKT tolerance ``tol``.

    ``class_weights`` scales the per-sample box constraint to
    ``c * weight[label]``. A warm start supplies initial dual
    coefficients and bias from a previous solution over the same rows.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = check_binary_labels(y)
    if len(X) != len(y):
        raise ValueError("X and y row counts differ")
    if c <= 0:
        raise ValueError("C must be positive")
    weights = dict(class_weights) if class_weights else {0: 1.0, 1: 1.0}
    for cls in (0, 1):
        if weights.get(cls, 0) <= 0:
            raise ValueError(f"class weight for {cls} must be positive")
    t = 2.0 * y.astype(np.float64) - 1.0
    boxes = c * np.array([weights[int(lbl)] for lbl in y])
    if warm_start is not None:
        alphas = np.array(warm_start[0], dtype=np.float64, copy=True)
        bias = float(warm_start[1])
        if len(alphas) != len(y):
            raise ValueError("warm start size mismatch")
        alphas = np.clip(alphas, 0.0, boxes)
    else:
        alphas = np.zeros(len(y))
        bias = 0.0
    K = kernel_matrix(kernel, X, X)
    rng = np.random.default_rng(seed)
    alphas, bias = _solve_smo(K, t, boxes, tol, max_sweeps, rng, alphas, bias)
    return KernelClassifier(
        spec=kernel, c=c, class_weights=weights,
        vectors=X.copy(), labels=y.copy(), alphas=alphas, bias=bias, tol=tol,
    )


def online_update(
    model: KernelClassifier,
    x: np.ndarray,
    label: int,
    *,
    max_sweeps: int = 20000,
    seed: int = 0,
) -> KernelClassifier:
    """Fold one newly labeled sample into the pool and re-solve.

    Hyperparameters stay fixed; the previous dual coefficients seed the
    solver so unchanged regions of the solution are kept. Discarded
    (-1) samples must be filtered out by the caller.
    """
    if label not in (0, 1):
        raise ValueError(f"online update needs a 0/1 label, got {label}")
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if x.shape[1] != model.vectors.shape[1]:
        raise ValueError("dimension mismatch with the training pool")
    X = np.vstack([model.vectors, x])
    y = np.append(model.labels, label)
    alphas = np.append(model.alphas, 0.0)
    return train(
        X, y, model.spec, model.c, model.class_weights,
        tol=model.tol, max_sweeps=max_sweeps, seed=seed,
        warm_start=(alphas, model.bias),
    )


def _positive_f1(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2.0 * precision * recall / (precision + recall)


def stratified_folds(
    y: np.ndarray, folds: int, rng: np.random.Generator
) -> list[np.ndarray]:
    """Shuffled per-class round-robin fold assignment."""
    assignments = np.empty(len(y), dtype=np.int64)
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        assignments[idx] = np.arange(len(idx)) % folds
    return [np.flatnonzero(assignments == f) for f in range(folds)]


@dataclass(frozen=True)
class CvResult:
    """Winning hyperparameters of a cross-validation sweep."""

    kernel: KernelSpec
    c: float
    positive_weight: float
    mean_f1: float
    folds: int
    table: tuple[dict, ...] = field(default_factory=tuple)


def cross_validate(
    X: np.ndarray,
    y: np.ndarray,
    folds: int,
    kernels: Sequence[KernelSpec],
    c_grid: Sequence[float],
    weight_grid: Sequence[float],
    *,
    seed: int = 0,
    tol: float = 1e-3,
    max_sweeps: int = 20000,
) -> CvResult:
    """Pick the grid point with the best mean positive-class F1.

    Folds are stratified; if the smaller class cannot populate every
    fold, the fold count is reduced with a warning. Ties go to the
    smaller C, then the simpler kernel, then the smaller weight.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = check_binary_labels(y)
    if folds < 2:
        raise ValueError("need at least 2 folds")
    min_class = int(np.bincount(y).min())
    if min_class < 2:
        raise ValueError("need at least 2 samples of each class")
    if min_class < folds:
        logger.warning("reducing folds from %d to %d (smallest class size)",
                       folds, min_class)
        folds = min_class
    rng = np.random.default_rng(seed)
    fold_idx = stratified_folds(y, folds, rng)

    grid = sorted(
        ((c, k, w) for k in kernels for c in c_grid for w in weight_grid),
        key=lambda g: (g[0], g[1].complexity_rank, g[2]),
    )
    best: tuple[KernelSpec, float, float] | None = None
    best_f1 = -1.0
    table: list[dict] = []
    for c, kernel, w_pos in grid:
        scores = []
        for f in range(folds):
            test = fold_idx[f]
            trn = np.concatenate([fold_idx[g] for g in range(folds) if g != f])
            model = train(
                X[trn], y[trn], kernel, c, {0: 1.0, 1: w_pos},
                tol=tol, max_sweeps=max_sweeps, seed=seed,
            )
            scores.append(_positive_f1(y[test], model.predict(X[test])))
        mean_f1 = float(np.mean(scores))
        table.append({"kernel": str(kernel), "c": c, "positive_weight": w_pos,
                      "mean_f1": mean_f1})
        if mean_f1 > best_f1:
            best_f1 = mean_f1
            best = (kernel, c, w_pos)
    assert best is not None
    return CvResult(kernel=best[0], c=best[1], positive_weight=best[2],
                    mean_f1=best_f1, folds=folds, table=tuple(table))


@dataclass
class ModelBundle:
    """Normalizer + feature selection + classifier, ready for raw vectors.

    The selector indices address columns of the normalized space (after
    zero-variance columns were dropped).
    """

    normalizer: ColumnNormalizer
    selected: np.ndarray
    classifier: KernelClassifier
    meta: dict = field(default_factory=dict)

    def _reduce(self, x: np.ndarray) -> np.ndarray:
        z = self.normalizer.transform(np.atleast_2d(np.asarray(x, dtype=np.float64)))
        return z[:, self.selected]

    def decision_raw(self, x: np.ndarray) -> np.ndarray:
        return self.classifier.decision_function(self._reduce(x))

    def predict_raw(self, x: np.ndarray, threshold: float = 0.0) -> np.ndarray:
        return (self.decision_raw(x) >= threshold).astype(np.int64)

    def updated(self, x_raw: np.ndarray, label: int, *, seed: int = 0,
                max_sweeps: int = 20000) -> "ModelBundle":
        clf = online_update(self.classifier, self._reduce(x_raw)[0], label,
                            seed=seed, max_sweeps=max_sweeps)
        return ModelBundle(self.normalizer, self.selected, clf, dict(self.meta))


def save_model(path: str | Path, bundle: ModelBundle) -> None:
    norm = bundle.normalizer
    payload = {
        "normalizer": {
            "n_features": int(norm.n_features_in_),
            "kept": norm.kept_.tolist(),
            "means": norm.means_.tolist(),
            "stds": norm.stds_.tolist(),
        },
        "selected": np.asarray(bundle.selected).tolist(),
        "classifier": bundle.classifier.to_dict(),
        "meta": bundle.meta,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", "utf-8")


def load_model(path: str | Path) -> ModelBundle:
    obj = json.loads(Path(path).read_text("utf-8"))
    norm = ColumnNormalizer()
    stats = obj["normalizer"]
    norm.n_features_in_ = int(stats["n_features"])
    norm.kept_ = np.asarray(stats["kept"], dtype=np.int64)
    norm.means_ = np.asarray(stats["means"], dtype=np.float64)
    norm.stds_ = np.asarray(stats["stds"], dtype=np.float64)
    return ModelBundle(
        normalizer=norm,
        selected=np.asarray(obj["selected"], dtype=np.int64),
        classifier=KernelClassifier.from_dict(obj["classifier"]),
        meta=obj.get("meta", {}),
    )
