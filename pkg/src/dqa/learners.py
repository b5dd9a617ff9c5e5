"""Desk-scale model harness: logistic regression and random forest with
random-search tuning, plus the six evaluation metrics.

Both learners are self-contained: logistic regression is fit by full-batch
gradient descent with a Lipschitz step size, and the forest grows CART trees
on bootstrap samples with per-split feature subsampling.  Feature scaling is
deliberately NOT applied here; the cleaning pipeline's transformation step
owns scaling, which keeps cleaning-order experiments honest.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from dqa.dataset import Dataset

LOGREG = "logreg"
FOREST = "forest"
LEARNERS = (LOGREG, FOREST)

RF_N_ESTIMATORS = (50, 150, 250, 500, 750)
LR_C_RANGE = (1, 500)
LR_PENALTIES = ("l2", "none")
RF_CRITERIA = ("gini", "entropy")


class LearnerError(ValueError):
    pass


@dataclass(frozen=True)
class LogRegParams:
    penalty: str = "l2"
    c: float = 1.0


@dataclass(frozen=True)
class ForestParams:
    criterion: str = "gini"
    n_estimators: int = 100
    min_samples_split_fraction: float = 0.0


def sample_hyperparams(learner: str, rng: np.random.Generator):
    """One random draw from the learner's tuning grid."""
    if learner == LOGREG:
        penalty = LR_PENALTIES[rng.integers(len(LR_PENALTIES))]
        c = float(rng.integers(LR_C_RANGE[0], LR_C_RANGE[1] + 1))
        return LogRegParams(penalty=penalty, c=c)
    if learner == FOREST:
        criterion = RF_CRITERIA[rng.integers(len(RF_CRITERIA))]
        n_estimators = int(RF_N_ESTIMATORS[rng.integers(len(RF_N_ESTIMATORS))])
        frac = float(rng.uniform(0.0, 0.1))
        return ForestParams(criterion=criterion, n_estimators=n_estimators, min_samples_split_fraction=frac)
    raise LearnerError(f"unknown learner {learner!r}")


def default_hyperparams(learner: str):
    if learner == LOGREG:
        return LogRegParams()
    if learner == FOREST:
        return ForestParams()
    raise LearnerError(f"unknown learner {learner!r}")


def _design(ds: Dataset) -> tuple[np.ndarray, np.ndarray]:
    x = ds.features
    if ds.missing_mask.any():
        raise LearnerError("learners need complete rows; clean missing cells first")
    if not np.isfinite(x).all():
        raise LearnerError("features must be finite")
    y = ds.labels().astype(np.float64)
    if len(np.unique(y)) < 2:
        raise LearnerError("training data has a single class")
    return x, y


# -- logistic regression -----------------------------------------------------------


class LogisticModel:
    def __init__(self, weights: np.ndarray, bias: float, feature_names: tuple[str, ...]):
        self.weights = weights
        self.bias = bias
        self.feature_names = feature_names

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        z = x @ self.weights + self.bias
        return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))

    def score_dataset(self, ds: Dataset) -> np.ndarray:
        if ds.feature_names != self.feature_names:
            raise LearnerError("dataset columns do not match the fitted model")
        return self.predict_proba(ds.features)


def train_logreg(
    train: Dataset,
    hp: LogRegParams | None = None,
    seed: int = 0,
    max_iter: int = 4000,
    tol: float = 1e-5,
) -> LogisticModel:
    """Accelerated full-batch gradient descent on the mean log-loss.

    Uses only full-batch gradients with a Lipschitz step size plus Nesterov
    momentum (restarted when the objective direction flips), and declares
    convergence when the gradient's max-norm falls under ``tol``.  With the
    l2 penalty the objective carries 0.5 * ||w||^2 / (C * n); the bias is
    never penalized.  The fit is deterministic (zero initialization); the
    seed is accepted for interface symmetry with the forest.
    """
    del seed
    hp = hp or LogRegParams()
    x, y = _design(train)
    n, d = x.shape
    alpha = 0.0 if hp.penalty == "none" else 1.0 / (hp.c * n)
    # Centering is an exact reparameterization (weights unchanged, bias
    # shifted back afterwards); it removes the mean-offset curvature that
    # cripples the step size.  No scaling happens here.
    center = x.mean(axis=0)
    xb = np.hstack([x - center, np.ones((n, 1))])
    gram = (xb.T @ xb) / n
    lipschitz = 0.25 * float(np.linalg.eigvalsh(gram)[-1]) + alpha
    step = 1.0 / max(lipschitz, 1e-12)
    w = np.zeros(d + 1)  # last entry is the bias
    w_prev = w.copy()
    reg = np.full(d + 1, alpha)
    reg[-1] = 0.0
    converged = False
    since_restart = 0
    for _ in range(max_iter):
        u = w + (since_restart / (since_restart + 3.0)) * (w - w_prev)
        z = xb @ u
        p = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
        g = xb.T @ (p - y) / n + reg * u
        if float(np.abs(g).max(initial=0.0)) <= tol:
            w = u
            converged = True
            break
        w_prev = w
        w = u - step * g
        # restart momentum when the update fights the gradient direction
        since_restart = 0 if float(g @ (w - w_prev)) > 0.0 else since_restart + 1
    if not converged:
        warnings.warn("logistic regression did not reach tolerance; returning last iterate", stacklevel=2)
    bias = float(w[-1]) - float(center @ w[:-1])
    return LogisticModel(weights=w[:-1].copy(), bias=bias, feature_names=train.feature_names)


# -- random forest -------------------------------------------------------------------

_LOG2 = math.log(2.0)


def _weighted_child_impurity(sorted_y: np.ndarray, criterion: str) -> np.ndarray:
    """Weighted child impurity for every split position, all features at once.

    ``sorted_y`` is (m, k): labels of the node's rows sorted per candidate
    feature.  Row i of the result scores the split left = first i+1 rows,
    right = the rest, for each of the k features.
    """
    m = sorted_y.shape[0]
    ones_left = np.cumsum(sorted_y, axis=0)[:-1]
    count_left = np.arange(1, m, dtype=np.float64)[:, None]
    ones_right = sorted_y.sum(axis=0)[None, :] - ones_left
    count_right = m - count_left

    if criterion == "gini":
        # count * (1 - p^2 - q^2) == 2 * ones * zeros / count
        return 2.0 * (
            ones_left * (count_left - ones_left) / count_left
            + ones_right * (count_right - ones_right) / count_right
        )

    def weighted_entropy(ones, count):
        p = ones / count
        q = 1.0 - p
        with np.errstate(divide="ignore", invalid="ignore"):
            ent = -np.where(p > 0, p * np.log(p), 0.0) - np.where(q > 0, q * np.log(q), 0.0)
        return count * ent / _LOG2

    return weighted_entropy(ones_left, count_left) + weighted_entropy(ones_right, count_right)


def _grow_tree(x, y, rng, criterion, min_split, n_sub):
    """One CART tree as nested dicts; leaves carry the majority class."""
    n_features = x.shape[1]

    def leaf(y_node):
        return {"leaf": 1 if int(y_node.sum()) * 2 > y_node.size else 0}

    def build(idx):
        y_node = y[idx]
        m = idx.size
        ones = int(y_node.sum())
        if m < min_split or ones == 0 or ones == m:
            return leaf(y_node)
        feats = rng.permutation(n_features)[:n_sub]
        cols = x[np.ix_(idx, feats)]
        order = np.argsort(cols, axis=0)
        sorted_cols = np.take_along_axis(cols, order, axis=0)
        boundary = sorted_cols[:-1] != sorted_cols[1:]
        if not boundary.any():
            return leaf(y_node)
        impurity = _weighted_child_impurity(y_node[order], criterion)
        impurity[~boundary] = np.inf
        pos, feat_pos = np.unravel_index(int(np.argmin(impurity)), impurity.shape)
        threshold = 0.5 * (sorted_cols[pos, feat_pos] + sorted_cols[pos + 1, feat_pos])
        j = int(feats[feat_pos])
        mask = x[idx, j] <= threshold
        left, right = idx[mask], idx[~mask]
        if left.size == 0 or right.size == 0:
            return leaf(y_node)
        return {"feature": j, "threshold": float(threshold), "left": build(left), "right": build(right)}

    return build(np.arange(x.shape[0]))


def _tree_predict(tree, x: np.ndarray) -> np.ndarray:
    out = np.empty(x.shape[0], dtype=np.int8)
    stack = [(tree, np.arange(x.shape[0]))]
    while stack:
        node, idx = stack.pop()
        if idx.size == 0:
            continue
        if "leaf" in node:
            out[idx] = node["leaf"]
            continue
        mask = x[idx, node["feature"]] <= node["threshold"]
        stack.append((node["left"], idx[mask]))
        stack.append((node["right"], idx[~mask]))
    return out


class ForestModel:
    def __init__(self, trees: list, feature_names: tuple[str, ...]):
        self.trees = trees
        self.feature_names = feature_names

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        votes = np.zeros(x.shape[0])
        for tree in self.trees:
            votes += _tree_predict(tree, x)
        return votes / len(self.trees)

    def score_dataset(self, ds: Dataset) -> np.ndarray:
        if ds.feature_names != self.feature_names:
            raise LearnerError("dataset columns do not match the fitted model")
        return self.predict_proba(ds.features)


def train_random_forest(train: Dataset, hp: ForestParams | None = None, seed: int = 0) -> ForestModel:
    """Bagged CART trees with sqrt-feature subsampling per split.

    A node refuses to split below ``min_samples_split_fraction * n`` rows
    (n = training size); tree votes are averaged into the defect probability.
    """
    hp = hp or ForestParams()
    if hp.n_estimators < 1:
        raise LearnerError("n_estimators must be >= 1")
    x, y = _design(train)
    n = x.shape[0]
    rng = np.random.default_rng(seed)
    n_sub = max(1, math.ceil(math.sqrt(x.shape[1])))
    min_split = max(2, math.ceil(hp.min_samples_split_fraction * n))
    trees = []
    for _ in range(hp.n_estimators):
        sample = rng.integers(0, n, size=n)
        trees.append(_grow_tree(x[sample], y[sample], rng, hp.criterion, min_split, n_sub))
    return ForestModel(trees=trees, feature_names=train.feature_names)


def train(learner: str, ds: Dataset, hp=None, seed: int = 0):
    if learner == LOGREG:
        return train_logreg(ds, hp, seed=seed)
    if learner == FOREST:
        return train_random_forest(ds, hp, seed=seed)
    raise LearnerError(f"unknown learner {learner!r}")


# -- metrics -----------------------------------------------------------------------------


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class EvalResult:
    precision: float
    recall: float
    f1: float
    mcc: float
    auroc: float
    auprc: float

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "mcc": self.mcc,
            "auroc": self.auroc,
            "auprc": self.auprc,
        }


METRIC_NAMES = ("precision", "recall", "f1", "mcc", "auroc", "auprc")


def confusion_at(y: np.ndarray, scores: np.ndarray, threshold: float = 0.5) -> ConfusionMatrix:
    pred = scores >= threshold
    actual = y == 1
    return ConfusionMatrix(
        tp=int((pred & actual).sum()),
        tn=int((~pred & ~actual).sum()),
        fp=int((pred & ~actual).sum()),
        fn=int((~pred & actual).sum()),
    )


def precision_of(cm: ConfusionMatrix) -> float:
    return cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else 0.0


def recall_of(cm: ConfusionMatrix) -> float:
    if cm.tp + cm.fn == 0:
        raise LearnerError("recall undefined: no positive rows in the test set")
    return cm.tp / (cm.tp + cm.fn)


def f1_of(cm: ConfusionMatrix) -> float:
    p, r = precision_of(cm), recall_of(cm)
    return 2 * p * r / (p + r) if p + r else 0.0


def mcc_of(cm: ConfusionMatrix) -> float:
    denom = (
        (cm.tp + cm.fp) * (cm.tp + cm.fn) * (cm.tn + cm.fp) * (cm.tn + cm.fn)
    )
    if denom == 0:
        return 0.0
    return (cm.tp * cm.tn - cm.fp * cm.fn) / math.sqrt(denom)


def auroc_rank(y: np.ndarray, scores: np.ndarray) -> float:
    """P(score+ > score-) + 0.5 P(tie), computed from midranks."""
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise LearnerError("AU-ROC undefined on a single-class test set")
    ranks = rankdata(scores)
    u = float(ranks[pos].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def auroc_trapezoid(y: np.ndarray, scores: np.ndarray) -> float:
    """Trapezoidal area under the ROC curve over distinct thresholds."""
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise LearnerError("AU-ROC undefined on a single-class test set")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_pos = pos[order].astype(np.float64)
    distinct = np.r_[sorted_scores[1:] != sorted_scores[:-1], True]
    tp = np.cumsum(sorted_pos)[distinct]
    fp = np.cumsum(1.0 - sorted_pos)[distinct]
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    return float(np.trapz(tpr, fpr))


def average_precision(y: np.ndarray, scores: np.ndarray) -> float:
    """Step-interpolated area under the precision-recall curve."""
    pos = y == 1
    n_pos = int(pos.sum())
    if n_pos == 0:
        raise LearnerError("AU-PRC undefined without positive rows")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_pos = pos[order].astype(np.float64)
    distinct = np.r_[sorted_scores[1:] != sorted_scores[:-1], True]
    tp = np.cumsum(sorted_pos)[distinct]
    predicted = np.flatnonzero(distinct) + 1.0
    precision = tp / predicted
    recall = tp / n_pos
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def evaluate(model, test: Dataset, threshold: float = 0.5) -> EvalResult:
    """Score a model on an already-transformed test set.

    The confusion matrix uses the given threshold; AU-ROC comes from the
    rank formulation and AU-PRC from step-interpolated average precision.
    """
    if test.n_rows == 0:
        raise LearnerError("empty test set")
    y = test.labels()
    if len(np.unique(y)) < 2:
        raise LearnerError("AU-ROC undefined on a single-class test set")
    scores = model.score_dataset(test)
    if not np.isfinite(scores).all():
        raise LearnerError("model produced non-finite scores")
    cm = confusion_at(y, scores, threshold)
    return EvalResult(
        precision=precision_of(cm),
        recall=recall_of(cm),
        f1=f1_of(cm),
        mcc=mcc_of(cm),
        auroc=auroc_rank(y, scores),
        auprc=average_precision(y, scores),
    )


# -- tuning --------------------------------------------------------------------------------


def stratified_folds(ds: Dataset, k: int, seed: int) -> list[np.ndarray]:
    """Deterministic stratified k-fold assignment (round-robin per class)."""
    y = ds.labels()
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in (0, 1):
        members = np.flatnonzero(y == cls)
        if members.size < k:
            raise LearnerError("fold construction impossible: a class has fewer rows than folds")
        for pos, row in enumerate(rng.permutation(members)):
            folds[pos % k].append(int(row))
    return [np.array(sorted(f), dtype=np.int64) for f in folds]


def random_search(
    train_ds: Dataset,
    learner: str,
    n_iter: int = 10,
    k: int = 3,
    seed: int = 0,
):
    """Random-search tuning: ``n_iter`` draws scored by mean AU-ROC over
    ``k`` stratified folds; ties keep the first draw."""
    rng = np.random.default_rng(seed)
    draws = [sample_hyperparams(learner, rng) for _ in range(n_iter)]
    folds = stratified_folds(train_ds, k, seed=seed)
    all_rows = np.arange(train_ds.n_rows)
    best_hp, best_score = None, -math.inf
    for draw_index, hp in enumerate(draws):
        scores = []
        for fold in folds:
            keep = np.setdiff1d(all_rows, fold)
            model = train(learner, train_ds.take_rows(keep), hp, seed=_fit_seed(seed, draw_index))
            val = train_ds.take_rows(fold)
            scores.append(auroc_rank(val.labels(), model.score_dataset(val)))
        mean_score = float(np.mean(scores))
        if mean_score > best_score:
            best_hp, best_score = hp, mean_score
    return best_hp


def _fit_seed(seed: int, draw_index: int) -> int:
    return int(np.random.SeedSequence([seed & 0xFFFFFFFF, draw_index]).generate_state(1)[0])
