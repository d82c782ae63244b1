"""Immediate-threshold ordinal logistic regression over one-hot features.

The model keeps one weight per (component, label) cell. A response's
evidence value is the sum of the weights its labels select,

    eta = sum_i w[i][label_i],

and the predicted category is the j with theta_j <= eta < theta_{j+1}
(sentinels theta_0 = -inf, theta_K = +inf). Training penalizes, for each
sample, only the two thresholds bounding its gold category through a
logistic (softplus) surrogate:

    loss(y, eta) = [y > 0] * softplus(theta_y - eta)
                 + [y < K-1] * softplus(eta - theta_{y+1})

plus an L2 penalty on the weights (thresholds unregularized). Thresholds
are optimized through a softplus-increment reparameterization that keeps
them strictly increasing, with a deterministic full-batch quasi-Newton
minimizer driving an analytic gradient.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from .errors import StalenessError, TrainingError
from .featurize import FeatureMatrix, FeatureVector
from .ioutil import read_json, write_json
from .metrics import qwk

THRESHOLD_GAP_FLOOR = 1e-4  # minimal separation enforced by the reparameterization
NUM_LABELS = 3


@dataclass
class TrainConfig:
    lambda_grid: tuple[float, ...] = (0.0, 0.001, 0.01, 0.1, 1.0)
    max_iterations: int = 5000
    gradient_tolerance: float = 1e-6
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.lambda_grid:
            raise ValueError("lambda_grid must be non-empty")
        if any(lam < 0 for lam in self.lambda_grid):
            raise ValueError("lambda values must be non-negative")
        if self.gradient_tolerance <= 0:
            raise ValueError("gradient_tolerance must be positive")


@dataclass
class OrdinalModel:
    item_id: str
    component_set_digest: str
    k: int
    num_categories: int
    weights: np.ndarray  # (k, 3)
    thresholds: np.ndarray  # (K-1,), strictly increasing
    category_offset: int
    lam: float = 0.0
    training_meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=float)
        self.thresholds = np.asarray(self.thresholds, dtype=float)
        if self.weights.shape != (self.k, NUM_LABELS):
            raise ValueError(f"weights must be ({self.k}, {NUM_LABELS}), got {self.weights.shape}")
        if self.thresholds.shape != (self.num_categories - 1,):
            raise ValueError("thresholds must have length K-1")
        if self.num_categories < 2:
            raise ValueError("need at least two categories")
        if not np.all(np.isfinite(self.weights)) or not np.all(np.isfinite(self.thresholds)):
            raise ValueError("parameters must be finite")
        if np.any(np.diff(self.thresholds) <= 0):
            raise ValueError("thresholds must be strictly increasing")


def _check_dims(model: OrdinalModel, features: FeatureVector) -> None:
    if features.k != model.k:
        raise ValueError(f"feature length {features.k} != model k {model.k}")
    if (
        features.component_set_digest is not None
        and features.component_set_digest != model.component_set_digest
    ):
        raise StalenessError("feature vector and model disagree on the component set")


def _eta_from_labels(model: OrdinalModel, labels: Sequence[int]) -> float:
    # plain left-to-right float sum; explanations reuse this exact order so
    # per-component contributions total eta without rounding residue
    total = 0.0
    for i, label in enumerate(labels):
        total += float(model.weights[i, int(label)])
    return total


def eta(model: OrdinalModel, features: FeatureVector) -> float:
    """Evidence value: sum of the weights selected by the labels."""
    _check_dims(model, features)
    return _eta_from_labels(model, features.labels)


def predict_eta(model: OrdinalModel, value: float) -> int:
    """Category for an evidence value; thresholds are lower-inclusive."""
    j = int(np.searchsorted(model.thresholds, value, side="right"))
    return model.category_offset + j


def predict(model: OrdinalModel, features: FeatureVector) -> int:
    return predict_eta(model, eta(model, features))


def batch_predict(model: OrdinalModel, labels_matrix: np.ndarray) -> np.ndarray:
    etas = np.array([_eta_from_labels(model, row) for row in labels_matrix])
    return model.category_offset + np.searchsorted(model.thresholds, etas, side="right")


def contribution_table(
    model: OrdinalModel, features: FeatureVector
) -> list[tuple[int, int, float]]:
    """(component_index, label, weight contribution) rows; rows sum to eta
    under plain sequential addition."""
    _check_dims(model, features)
    return [
        (i, int(features.labels[i]), float(model.weights[i, int(features.labels[i])]))
        for i in range(model.k)
    ]


# ---------------------------------------------------------------------------
# Objective
# ---------------------------------------------------------------------------


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


def thresholds_from_raw(u: np.ndarray) -> np.ndarray:
    """theta_1 = u_1; theta_{j+1} = theta_j + gap_floor + softplus(u_{j+1})."""
    u = np.asarray(u, dtype=float)
    gaps = THRESHOLD_GAP_FLOOR + _softplus(u[1:])
    return u[0] + np.concatenate([[0.0], np.cumsum(gaps)])


def raw_from_thresholds(thresholds: np.ndarray) -> np.ndarray:
    """Inverse reparameterization; requires gaps strictly above the floor."""
    t = np.asarray(thresholds, dtype=float)
    gaps = np.diff(t) - THRESHOLD_GAP_FLOOR
    if np.any(gaps <= 0):
        raise ValueError("threshold gaps must exceed the reparameterization floor")
    # inverse softplus, stable for both small and large gaps
    with np.errstate(over="ignore"):
        inv = np.where(gaps > 30, gaps, np.log(np.expm1(np.minimum(gaps, 30))))
    return np.concatenate([[t[0]], inv])


def pack_params(weights: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.concatenate([np.asarray(weights, dtype=float).ravel(), np.asarray(u, dtype=float)])


def unpack_params(params: np.ndarray, k: int, num_categories: int) -> tuple[np.ndarray, np.ndarray]:
    w = params[: k * NUM_LABELS].reshape(k, NUM_LABELS)
    u = params[k * NUM_LABELS :]
    if u.shape != (num_categories - 1,):
        raise ValueError("parameter vector has wrong length")
    return w, u


def objective_and_grad(
    params: np.ndarray,
    one_hot: np.ndarray,
    gold_categories: np.ndarray,
    k: int,
    num_categories: int,
    lam: float,
) -> tuple[float, np.ndarray]:
    """Regularized immediate-threshold objective and its analytic gradient.

    ``params`` packs the flattened weights followed by the raw threshold
    parameters u. ``one_hot`` is the (n, 3k) featurization and
    ``gold_categories`` holds 0-based category indices.
    """
    n = one_hot.shape[0]
    kk = num_categories
    w, u = unpack_params(np.asarray(params, dtype=float), k, kk)
    w_flat = w.ravel()
    theta = thresholds_from_raw(u)
    y = np.asarray(gold_categories, dtype=int)
    etas = one_hot @ w_flat

    has_lower = y >= 1
    has_upper = y <= kk - 2
    z_low = theta[np.clip(y - 1, 0, None)] - etas
    z_up = etas - theta[np.clip(y, 0, kk - 2)]

    data_loss = np.where(has_lower, _softplus(z_low), 0.0)
    data_loss = data_loss + np.where(has_upper, _softplus(z_up), 0.0)
    value = float(data_loss.mean()) + lam * float((w_flat**2).sum())

    a = np.where(has_lower, expit(z_low), 0.0)
    b = np.where(has_upper, expit(z_up), 0.0)
    dloss_deta = (b - a) / n
    grad_w = one_hot.T @ dloss_deta + 2.0 * lam * w_flat

    grad_theta = np.zeros(kk - 1)
    np.add.at(grad_theta, np.clip(y - 1, 0, None), np.where(has_lower, a / n, 0.0))
    np.add.at(grad_theta, np.clip(y, 0, kk - 2), np.where(has_upper, -b / n, 0.0))

    # chain through the reparameterization: theta_j depends on u_0 and on
    # every u_t with 1 <= t <= j, with d theta_j / d u_t = sigmoid(u_t)
    suffix = np.cumsum(grad_theta[::-1])[::-1]
    grad_u = np.empty_like(suffix)
    grad_u[0] = suffix[0]
    if len(suffix) > 1:
        grad_u[1:] = expit(u[1:]) * suffix[1:]

    return value, np.concatenate([grad_w, grad_u])


def it_loss(
    model: OrdinalModel, batch: Sequence[tuple[FeatureVector, int]]
) -> float:
    """Mean immediate-threshold loss of a labeled batch under the model,
    plus the model's own L2 weight penalty."""
    if not batch:
        raise ValueError("empty batch")
    one_hot = np.array([fv.one_hot for fv, _ in batch], dtype=float)
    y = np.array([score - model.category_offset for _, score in batch], dtype=int)
    if y.min() < 0 or y.max() >= model.num_categories:
        raise ValueError("gold scores outside the model's category range")
    params = pack_params(model.weights, raw_from_thresholds(model.thresholds))
    value, _ = objective_and_grad(params, one_hot, y, model.k, model.num_categories, model.lam)
    return value


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def _one_hot_from_labels(labels_matrix: np.ndarray) -> np.ndarray:
    n, k = labels_matrix.shape
    out = np.zeros((n, k * NUM_LABELS), dtype=float)
    rows = np.repeat(np.arange(n), k)
    cols = (np.arange(k)[None, :] * NUM_LABELS + labels_matrix).ravel()
    out[rows, cols] = 1.0
    return out


def _fit_single(
    one_hot: np.ndarray,
    y: np.ndarray,
    k: int,
    num_categories: int,
    lam: float,
    config: TrainConfig,
) -> tuple[np.ndarray, np.ndarray, dict]:
    rng = np.random.default_rng(config.seed)
    w0 = rng.normal(0.0, 0.01, size=k * NUM_LABELS)
    theta0 = np.linspace(-(num_categories - 2) / 2.0, (num_categories - 2) / 2.0, num_categories - 1)
    x0 = np.concatenate([w0, raw_from_thresholds(theta0)])

    result = minimize(
        objective_and_grad,
        x0,
        args=(one_hot, y, k, num_categories, lam),
        jac=True,
        method="L-BFGS-B",
        options={
            "maxiter": config.max_iterations,
            "ftol": 1e-14,
            "gtol": config.gradient_tolerance,
        },
    )
    if not np.isfinite(result.fun):
        raise TrainingError(f"non-finite loss ({result.fun}) at lambda={lam}")
    w, u = unpack_params(result.x, k, num_categories)
    meta = {
        "iterations": int(result.nit),
        "converged": bool(result.success),
        "final_loss": float(result.fun),
    }
    return w, thresholds_from_raw(u), meta


def train(
    train_matrix: FeatureMatrix,
    train_scores: Mapping[str, int],
    valid_matrix: FeatureMatrix,
    valid_scores: Mapping[str, int],
    *,
    score_min: int,
    score_max: int,
    config: TrainConfig | None = None,
) -> OrdinalModel:
    """Fit one model per lambda in the grid and keep the one with the best
    validation QWK (ties favor the smaller lambda).

    ``train_scores``/``valid_scores`` map response ids to gold scores;
    every id must be present in the corresponding matrix. Matrix rows
    without a score are ignored (they belong to other splits).
    """
    config = config or TrainConfig()
    if train_matrix.component_set_digest != valid_matrix.component_set_digest:
        raise StalenessError("train and valid matrices come from different component sets")
    num_categories = score_max - score_min + 1

    def arrays(matrix: FeatureMatrix, scores: Mapping[str, int]) -> tuple[np.ndarray, np.ndarray]:
        ids = sorted(scores)
        missing = [rid for rid in ids if rid not in matrix.rows]
        if missing:
            raise TrainingError(f"scored responses missing from matrix: {missing[:5]}")
        labels = matrix.labels_array(ids)
        y = np.array([scores[rid] - score_min for rid in ids], dtype=int)
        if len(y) and (y.min() < 0 or y.max() >= num_categories):
            raise TrainingError("gold scores outside the declared range")
        return labels, y

    labels_train, y_train = arrays(train_matrix, train_scores)
    labels_valid, y_valid = arrays(valid_matrix, valid_scores)
    if len(y_train) == 0:
        raise TrainingError("empty training set")
    if len(y_train) < num_categories:
        raise TrainingError(f"need at least {num_categories} training rows, got {len(y_train)}")
    k = labels_train.shape[1]

    present = np.unique(y_train)
    if len(present) < num_categories:
        missing_cats = sorted(set(range(num_categories)) - set(present.tolist()))
        warnings.warn(
            f"categories {missing_cats} absent from training data; their thresholds "
            "are defined by the reparameterization only"
        )

    one_hot_train = _one_hot_from_labels(labels_train)

    best: tuple[float, float, OrdinalModel] | None = None  # (-qwk, lam, model)
    valid_qwk_by_lambda: dict[str, float] = {}
    for lam in sorted(config.lambda_grid):
        w, theta, meta = _fit_single(one_hot_train, y_train, k, num_categories, lam, config)
        candidate = OrdinalModel(
            item_id=train_matrix.item_id,
            component_set_digest=train_matrix.component_set_digest,
            k=k,
            num_categories=num_categories,
            weights=w,
            thresholds=theta,
            category_offset=score_min,
            lam=lam,
            training_meta={"seed": config.seed, **meta},
        )
        preds = batch_predict(candidate, labels_valid)
        score = qwk(preds.tolist(), (y_valid + score_min).tolist(), score_min, score_max)
        valid_qwk_by_lambda[repr(lam)] = score
        if best is None or score > best[0]:
            best = (score, lam, candidate)

    assert best is not None
    model = best[2]
    model.training_meta["validation_qwk"] = best[0]
    model.training_meta["validation_qwk_by_lambda"] = valid_qwk_by_lambda
    return model


# ---------------------------------------------------------------------------
# Persistence (bit-exact JSON round-trip)
# ---------------------------------------------------------------------------


def model_to_dict(model: OrdinalModel) -> dict:
    return {
        "item_id": model.item_id,
        "component_set_digest": model.component_set_digest,
        "k": model.k,
        "K": model.num_categories,
        "category_offset": model.category_offset,
        "weights": [[float(v) for v in row] for row in model.weights],
        "thresholds": [float(v) for v in model.thresholds],
        "lambda": model.lam,
        "training_meta": model.training_meta,
    }


def model_from_dict(d: dict) -> OrdinalModel:
    return OrdinalModel(
        item_id=d["item_id"],
        component_set_digest=d["component_set_digest"],
        k=int(d["k"]),
        num_categories=int(d["K"]),
        weights=np.array(d["weights"], dtype=float),
        thresholds=np.array(d["thresholds"], dtype=float),
        category_offset=int(d["category_offset"]),
        lam=float(d["lambda"]),
        training_meta=d.get("training_meta", {}),
    )


def save_model(model: OrdinalModel, path: str | Path) -> None:
    write_json(path, model_to_dict(model))


def load_model(path: str | Path) -> OrdinalModel:
    return model_from_dict(read_json(path))
