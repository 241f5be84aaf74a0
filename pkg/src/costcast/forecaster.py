"""Feature engineering and load-forecast models trained on pluggable losses.

Two model families share the same training contract: the objective is the
mean of a differentiable loss L(ε) over relative errors ε = (ŷ − y)/y, and
its gradient flows through ∂ε/∂θ = (∂ŷ/∂θ)/y.  The loss may be a single
function or a 24-slot hourly family routed by each sample's calendar hour.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DivergenceError, ParseError, ValidationError
from .loss_fit import LossVariant

GRAD_TOL = 1e-8
DIVERGENCE_STREAK = 50

HOURS_PER_DAY = 24
HOURS_PER_YEAR = 8766.0


@dataclass(frozen=True)
class FeatureConfig:
    """Recipe for the calendar/temperature feature matrix.

    ``lag_hours`` adds the temperature observed that many hours earlier;
    ``avg_days`` adds the trailing mean temperature over that many days.
    Both appear as polynomial bases of ``temperature_degree``.  The first
    ``lag_hours + 24*avg_days`` rows of a series lack full context and are
    dropped.
    """

    lag_hours: int = 4
    avg_days: int = 3
    temperature_degree: int = 3

    def __post_init__(self):
        if self.lag_hours < 0:
            raise ValidationError("lag_hours must be >= 0")
        if self.avg_days < 0:
            raise ValidationError("avg_days must be >= 0")
        if self.temperature_degree < 1:
            raise ValidationError("temperature_degree must be >= 1")

    @property
    def warmup_rows(self) -> int:
        return self.lag_hours + HOURS_PER_DAY * self.avg_days


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with aligned targets, timestamps and hour slots."""

    X: np.ndarray
    Y: np.ndarray
    timestamps: pd.DatetimeIndex
    hours: np.ndarray          # 1..24; slot 1 covers midnight-01:00
    feature_names: tuple
    fingerprint: str

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        if X.ndim != 2 or X.shape[0] != Y.size:
            raise ValidationError("X rows must match Y length")
        if X.shape[1] != len(self.feature_names):
            raise ValidationError("feature_names must match X columns")
        if not np.all(np.isfinite(X)):
            raise ValidationError("features contain non-finite values")
        if np.any(Y <= 0.0):
            raise ValidationError("targets must be strictly positive")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "hours", np.asarray(self.hours, dtype=int))

    def __len__(self) -> int:
        return self.Y.size

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def slice_range(self, start, end) -> "Dataset":
        """Rows with start <= timestamp < end."""
        start, end = pd.Timestamp(start), pd.Timestamp(end)
        if start >= end:
            raise ValidationError("slice start must precede end")
        mask = (self.timestamps >= start) & (self.timestamps < end)
        if not mask.any():
            raise ValidationError(f"dataset has no rows in [{start}, {end})")
        return Dataset(self.X[mask], self.Y[mask], self.timestamps[mask],
                       self.hours[mask], self.feature_names, self.fingerprint)


def build_features(series, config: FeatureConfig | None = None) -> Dataset:
    """Derive the feature matrix from an hourly load/temperature series.

    Encodings: running time in years; one-hot calendar categories with the
    first level dropped; weekend×hour and temperature×hour interactions;
    polynomial bases of the current, trailing-average and lagged
    temperatures.
    """
    config = config or FeatureConfig()
    warmup = config.warmup_rows
    if len(series) <= warmup:
        raise ValidationError(
            f"series has {len(series)} rows; needs more than the "
            f"{warmup}-row warm-up for lags and averages")

    ts = series.timestamps
    temp = series.temperature
    n = len(series)

    cols: list[np.ndarray] = []
    names: list[str] = []

    def add(name, values):
        names.append(name)
        cols.append(np.asarray(values, dtype=float))

    add("trend_years", np.arange(n) / HOURS_PER_YEAR)

    month = ts.month.to_numpy()
    for m in range(2, 13):
        add(f"month_{m:02d}", month == m)
    dow = ts.dayofweek.to_numpy()
    for d in range(1, 7):
        add(f"weekday_{d}", dow == d)
    hour = ts.hour.to_numpy()
    for h in range(1, 24):
        add(f"hour_{h:02d}", hour == h)

    weekend = (dow >= 5).astype(float)
    for h in range(1, 24):
        add(f"weekend_x_hour_{h:02d}", weekend * (hour == h))

    degree = config.temperature_degree
    for p in range(1, degree + 1):
        add(f"temp_p{p}", temp**p)
    if config.avg_days > 0:
        window = HOURS_PER_DAY * config.avg_days
        avg = (pd.Series(temp).rolling(window).mean().shift(1).to_numpy())
        for p in range(1, degree + 1):
            add(f"temp_avg{config.avg_days}d_p{p}", avg**p)
    if config.lag_hours > 0:
        lag = pd.Series(temp).shift(config.lag_hours).to_numpy()
        for p in range(1, degree + 1):
            add(f"temp_lag{config.lag_hours}h_p{p}", lag**p)
    for h in range(1, 24):
        add(f"temp_x_hour_{h:02d}", temp * (hour == h))

    X = np.column_stack(cols)[warmup:]
    Y = series.load[warmup:]
    kept_ts = ts[warmup:]
    hours = hour[warmup:] + 1
    fingerprint = _fingerprint(config, names)
    return Dataset(X, Y, kept_ts, hours, tuple(names), fingerprint)


def _fingerprint(config: FeatureConfig, names) -> str:
    payload = json.dumps({
        "lag_hours": config.lag_hours,
        "avg_days": config.avg_days,
        "temperature_degree": config.temperature_degree,
        "features": list(names),
    }, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


# ------------------------------------------------------------------ MLR


@dataclass(frozen=True)
class MlrModel:
    """Linear model ŷ = w₀ + x·w over raw (unstandardized) features."""

    weights: np.ndarray        # bias first, then one weight per feature
    feature_fingerprint: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise ValidationError("weights must be a non-empty vector")
        if not np.all(np.isfinite(w)):
            raise ValidationError("weights must be finite")
        object.__setattr__(self, "weights", w)


def mlr_loss_and_gradient(weights, X, Y, loss: LossVariant, hours=None):
    """Mean loss over samples and its gradient in the given weight space.

    ``weights`` is bias-first; the gradient matches central finite
    differences of the returned objective.
    """
    weights = np.asarray(weights, dtype=float)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    pred = weights[0] + X @ weights[1:]
    eps = (pred - Y) / Y
    values, grads = loss.evaluate_many(eps, hours)
    scaled = grads / Y / Y.size
    grad = np.concatenate([[np.sum(scaled)], X.T @ scaled])
    return float(np.mean(values)), grad


def train_mlr(data: Dataset, loss: LossVariant, eta0: float = 0.5,
              gamma: float = 0.1, t_max: int = 2000,
              initial_weights=None, standardize: bool = True) -> MlrModel:
    """Gradient descent on the mean loss with rate η_t = η⁰/(1 + γt).

    Features and targets are standardized internally (opt-out for exact
    hand-checkable runs); stored weights always apply to raw features.
    Raises DivergenceError when the objective rises for 50 straight
    iterations.
    """
    if eta0 <= 0.0:
        raise ValidationError("eta0 must be > 0")
    if gamma < 0.0:
        raise ValidationError("gamma must be >= 0")
    if t_max < 1:
        raise ValidationError("t_max must be >= 1")
    hours = data.hours if loss.kind == "hourly" else None

    if standardize:
        mu = data.X.mean(axis=0)
        sigma = data.X.std(axis=0)
        sigma[sigma == 0.0] = 1.0
        y_scale = float(data.Y.mean())
    else:
        mu = np.zeros(data.n_features)
        sigma = np.ones(data.n_features)
        y_scale = 1.0
    Xs = (data.X - mu) / sigma
    Ys = data.Y / y_scale

    if initial_weights is not None:
        w_raw = np.asarray(initial_weights, dtype=float)
        if w_raw.size != data.n_features + 1:
            raise ValidationError("initial_weights must have one entry per "
                                  "feature plus a bias")
        w = _raw_to_internal(w_raw, mu, sigma, y_scale)
    else:
        w = np.zeros(data.n_features + 1)

    log = []
    prev_obj = np.inf
    streak = 0
    iterations = 0
    for t in range(t_max):
        obj, grad = mlr_loss_and_gradient(w, Xs, Ys, loss, hours)
        if not np.isfinite(obj):
            raise DivergenceError(
                f"objective became non-finite at iteration {t}",
                trace=[row[1] for row in log[-60:]])
        grad_norm = float(np.linalg.norm(grad))
        log.append((t, obj, grad_norm))
        streak = streak + 1 if obj > prev_obj else 0
        if streak >= DIVERGENCE_STREAK:
            raise DivergenceError(
                f"objective rose for {streak} consecutive iterations",
                trace=[row[1] for row in log[-(streak + 10):]])
        prev_obj = obj
        if grad_norm < GRAD_TOL:
            break
        w = w - eta0 / (1.0 + gamma * t) * grad
        iterations = t + 1

    model = MlrModel(
        weights=_internal_to_raw(w, mu, sigma, y_scale),
        feature_fingerprint=data.fingerprint,
        metadata={"loss_kind": loss.kind, "eta0": eta0, "gamma": gamma,
                  "iterations": iterations, "final_loss": log[-1][1],
                  "final_grad_norm": log[-1][2]})
    object.__setattr__(model, "training_log", log)
    return model


def _raw_to_internal(w_raw, mu, sigma, y_scale):
    w = np.empty_like(w_raw)
    w[1:] = w_raw[1:] * sigma / y_scale
    w[0] = (w_raw[0] + np.dot(w_raw[1:], mu)) / y_scale
    return w


def _internal_to_raw(w, mu, sigma, y_scale):
    w_raw = np.empty_like(w)
    w_raw[1:] = y_scale * w[1:] / sigma
    w_raw[0] = y_scale * (w[0] - np.dot(w[1:], mu / sigma))
    return w_raw


# ------------------------------------------------------------------ ANN


@dataclass(frozen=True)
class AnnModel:
    """Feed-forward network with rectifier hidden activations.

    Layers carry weight matrices only; a constant column appended to the
    standardized features plays the role of the bias (without it a
    rectifier stack is positively homogeneous and pinned to zero at the
    origin).  ``weights[l]`` maps layer l-1 outputs to layer l
    pre-activations; the last matrix has a single row producing the
    prediction, which is multiplied by ``y_scale`` after the forward pass.
    """

    weights: tuple             # matrices, each (fan_out, fan_in)
    mu: np.ndarray
    sigma: np.ndarray
    y_scale: float
    feature_fingerprint: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        ws = tuple(np.asarray(w, dtype=float) for w in self.weights)
        if not ws:
            raise ValidationError("network needs at least one weight matrix")
        for a, b in zip(ws, ws[1:]):
            if b.shape[1] != a.shape[0]:
                raise ValidationError(
                    f"layer shapes do not chain: {a.shape} then {b.shape}")
        if ws[-1].shape[0] != 1:
            raise ValidationError("output layer must have a single unit")
        if any(not np.all(np.isfinite(w)) for w in ws):
            raise ValidationError("weights must be finite")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))
        object.__setattr__(self, "sigma", np.asarray(self.sigma, dtype=float))


def _augment(X):
    """Append the constant column that stands in for per-layer biases."""
    return np.hstack([X, np.ones((X.shape[0], 1))])


def _ann_forward(weights, X):
    """Return pre-activations and activations for each layer."""
    zs, vs = [], [X]
    v = X
    for i, W in enumerate(weights):
        z = v @ W.T
        zs.append(z)
        v = np.maximum(z, 0.0) if i < len(weights) - 1 else z
        vs.append(v)
    return zs, vs


def ann_loss_and_gradient(weights, X, Y, loss: LossVariant, y_scale=1.0,
                          hours=None):
    """Mean loss over samples and per-matrix gradients (backpropagation)."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    zs, vs = _ann_forward(weights, X)
    pred = vs[-1][:, 0] * y_scale
    eps = (pred - Y) / Y
    values, grads = loss.evaluate_many(eps, hours)
    # d(mean loss)/d(network output before y_scale)
    delta = (grads * y_scale / Y / Y.size)[:, None]
    grad_mats = [None] * len(weights)
    for i in range(len(weights) - 1, -1, -1):
        grad_mats[i] = delta.T @ vs[i]
        if i > 0:
            delta = (delta @ weights[i]) * (zs[i - 1] > 0.0)
    return float(np.mean(values)), grad_mats


def glorot_init(arch, rng):
    """Uniform init in ±√(6/(fan_in+fan_out)) for each consecutive pair."""
    weights = []
    for fan_in, fan_out in zip(arch[:-1], arch[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
    return weights


def train_ann(data: Dataset, loss: LossVariant, arch=(64, 128, 64),
              alpha: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
              eps_adam: float = 1e-8, batch_size: int = 64,
              max_epochs: int = 100, seed: int = 0,
              initial_weights=None) -> AnnModel:
    """Mini-batch Adam on the mean loss; deterministic for a fixed seed.

    Each epoch shuffles the sample order and walks batches of
    ``batch_size`` (the final short batch is trained, not dropped).  The
    update divides by √(v̂ + ε).  ``initial_weights`` (matrices matching
    ``arch``, e.g. from a finished run on another loss) replace the
    random start.  Raises DivergenceError when the epoch objective rises
    for 50 straight epochs or turns non-finite.
    """
    if batch_size < 1:
        raise ValidationError("batch_size must be >= 1")
    if max_epochs < 1:
        raise ValidationError("max_epochs must be >= 1")
    if not arch or any(int(m) < 1 for m in arch):
        raise ValidationError("arch must list positive hidden widths")
    hours = data.hours if loss.kind == "hourly" else None

    mu = data.X.mean(axis=0)
    sigma = data.X.std(axis=0)
    sigma[sigma == 0.0] = 1.0
    y_scale = float(data.Y.mean())
    Xs = _augment((data.X - mu) / sigma)
    n = len(data)

    rng = np.random.default_rng(seed)
    shapes = (data.n_features + 1, *map(int, arch), 1)
    if initial_weights is not None:
        weights = [np.array(w, dtype=float, copy=True)
                   for w in initial_weights]
        want = [(shapes[i + 1], shapes[i]) for i in range(len(shapes) - 1)]
        if [w.shape for w in weights] != want:
            raise ValidationError(
                f"initial_weights shapes {[w.shape for w in weights]} do "
                f"not match arch {want}")
    else:
        weights = glorot_init(shapes, rng)
    m = [np.zeros_like(w) for w in weights]
    v = [np.zeros_like(w) for w in weights]
    t_adam = 0

    log = []
    prev_obj = np.inf
    streak = 0
    for ep in range(max_epochs):
        order = rng.permutation(n)
        for lo in range(0, n, batch_size):
            batch = order[lo:lo + batch_size]
            bh = hours[batch] if hours is not None else None
            obj, grads = ann_loss_and_gradient(
                weights, Xs[batch], data.Y[batch], loss, y_scale, bh)
            if not np.isfinite(obj):
                raise DivergenceError(
                    f"non-finite batch objective in epoch {ep} at sample "
                    f"offset {lo}", trace=[row[1] for row in log[-60:]])
            t_adam += 1
            c1 = 1.0 - beta1**t_adam
            c2 = 1.0 - beta2**t_adam
            for i, g in enumerate(grads):
                m[i] = beta1 * m[i] + (1.0 - beta1) * g
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g
                weights[i] = weights[i] - alpha * (m[i] / c1) / np.sqrt(
                    v[i] / c2 + eps_adam)
        obj, grads = ann_loss_and_gradient(weights, Xs, data.Y, loss,
                                           y_scale, hours)
        grad_norm = float(np.sqrt(sum(np.sum(g * g) for g in grads)))
        log.append((ep, obj, grad_norm))
        streak = streak + 1 if obj > prev_obj else 0
        if streak >= DIVERGENCE_STREAK:
            raise DivergenceError(
                f"epoch objective rose for {streak} consecutive epochs",
                trace=[row[1] for row in log[-(streak + 10):]])
        prev_obj = obj

    model = AnnModel(
        weights=tuple(weights), mu=mu, sigma=sigma, y_scale=y_scale,
        feature_fingerprint=data.fingerprint,
        metadata={"loss_kind": loss.kind, "arch": list(map(int, arch)),
                  "alpha": alpha, "beta1": beta1, "beta2": beta2,
                  "eps_adam": eps_adam, "batch_size": batch_size,
                  "epochs": max_epochs, "seed": seed,
                  "final_loss": log[-1][1], "final_grad_norm": log[-1][2]})
    object.__setattr__(model, "training_log", log)
    return model


# ------------------------------------------------------------ prediction


def predict(model, X) -> np.ndarray:
    """Forward pass for either model family on raw features."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValidationError("X must be 2-D")
    if isinstance(model, MlrModel):
        if X.shape[1] != model.weights.size - 1:
            raise ValidationError(
                f"model expects {model.weights.size - 1} features, "
                f"got {X.shape[1]}")
        return model.weights[0] + X @ model.weights[1:]
    if isinstance(model, AnnModel):
        if X.shape[1] != model.weights[0].shape[1] - 1:
            raise ValidationError(
                f"model expects {model.weights[0].shape[1] - 1} features, "
                f"got {X.shape[1]}")
        Xs = _augment((X - model.mu) / model.sigma)
        _, vs = _ann_forward(model.weights, Xs)
        return vs[-1][:, 0] * model.y_scale
    raise ValidationError(f"unknown model type {type(model).__name__}")


# --------------------------------------------------------- persistence


def model_to_dict(model) -> dict:
    if isinstance(model, MlrModel):
        return {"kind": "mlr", "weights": model.weights.tolist(),
                "feature_fingerprint": model.feature_fingerprint,
                "metadata": model.metadata}
    if isinstance(model, AnnModel):
        return {"kind": "ann",
                "shapes": [list(w.shape) for w in model.weights],
                "weights": [w.reshape(-1).tolist() for w in model.weights],
                "mu": model.mu.tolist(), "sigma": model.sigma.tolist(),
                "y_scale": model.y_scale,
                "feature_fingerprint": model.feature_fingerprint,
                "metadata": model.metadata}
    raise ValidationError(f"unknown model type {type(model).__name__}")


def model_from_dict(payload) -> MlrModel | AnnModel:
    try:
        kind = payload["kind"]
        if kind == "mlr":
            return MlrModel(np.asarray(payload["weights"], dtype=float),
                            payload["feature_fingerprint"],
                            dict(payload.get("metadata", {})))
        if kind == "ann":
            mats = tuple(
                np.asarray(flat, dtype=float).reshape(shape)
                for flat, shape in zip(payload["weights"], payload["shapes"]))
            return AnnModel(mats, np.asarray(payload["mu"], dtype=float),
                            np.asarray(payload["sigma"], dtype=float),
                            float(payload["y_scale"]),
                            payload["feature_fingerprint"],
                            dict(payload.get("metadata", {})))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed model payload: {exc}") from exc
    raise ParseError(f"unknown model kind {kind!r}")


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2)
        fh.write("\n")


def load_model(path) -> MlrModel | AnnModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read model {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"model {path} is not valid JSON: {exc}") from exc
    return model_from_dict(payload)
