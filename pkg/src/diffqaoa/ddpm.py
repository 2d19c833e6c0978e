"""A small DDPM over 6-dimensional vectors, written directly in numpy.

The noise predictor is a 4-layer MLP (6 -> 128 -> 128 -> 128 -> 6) with a
learned per-timestep embedding added after each of the first three linear
layers. Gradients are hand-derived; training uses Adam and keeps an
exponential moving average of the weights, which is what sampling uses.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from diffqaoa.errors import ParameterError, ParseError, TrainingDivergedError, VersionError
from diffqaoa.rng import make_rng

CHECKPOINT_FORMAT = "diffqaoa-ddpm-checkpoint"
CHECKPOINT_VERSION = 1
PARAM_NAMES = ("W1", "b1", "E1", "W2", "b2", "E2", "W3", "b3", "E3", "W4", "b4")


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step constants; array index ``t - 1`` holds step ``t``."""

    T: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    sigma: np.ndarray

    def check_step(self, t) -> None:
        t = np.asarray(t)
        if np.any(t < 1) or np.any(t > self.T):
            raise ParameterError(f"timestep must lie in [1, {self.T}]")


def schedule_from_betas(beta) -> NoiseSchedule:
    beta = np.asarray(beta, dtype=np.float64)
    if beta.ndim != 1 or beta.size < 2 or np.any(beta <= 0) or np.any(beta >= 1):
        raise ParameterError("betas must be a 1-d array of at least 2 values in (0, 1)")
    alpha = 1.0 - beta
    return NoiseSchedule(beta.size, beta, alpha, np.cumprod(alpha), np.sqrt(beta))


def build_schedule(T: int = 100, beta_start: float = 1e-4, beta_end: float = 0.02) -> NoiseSchedule:
    """Linear beta schedule from ``beta_start`` at t=1 to ``beta_end`` at t=T."""
    if T < 2:
        raise ParameterError(f"T must be >= 2, got {T}")
    return schedule_from_betas(np.linspace(beta_start, beta_end, T))


def forward_diffuse(x0, t, schedule: NoiseSchedule, noise) -> np.ndarray:
    """Closed-form corruption ``sqrt(abar_t) x0 + sqrt(1 - abar_t) noise``.

    ``t`` may be a scalar or one step per row of a batched ``x0``.
    """
    schedule.check_step(t)
    x0 = np.asarray(x0, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    ab = schedule.alpha_bar[np.asarray(t) - 1]
    if np.ndim(ab) == 1:
        ab = ab[:, None]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * noise


@dataclass
class NoisePredictor:
    dim: int
    hidden: int
    num_steps: int
    params: dict[str, np.ndarray]
    adam_m: dict[str, np.ndarray] = field(default_factory=dict)
    adam_v: dict[str, np.ndarray] = field(default_factory=dict)
    adam_step: int = 0
    ema: dict[str, np.ndarray] | None = None

    @classmethod
    def init(cls, seed: int, dim: int = 6, hidden: int = 128, num_steps: int = 100) -> NoisePredictor:
        rng = make_rng(seed)
        p = {}
        sizes = [(dim, hidden), (hidden, hidden), (hidden, hidden), (hidden, dim)]
        for i, (fan_in, fan_out) in enumerate(sizes, start=1):
            bound = 1.0 / math.sqrt(fan_in)
            p[f"W{i}"] = rng.uniform(-bound, bound, (fan_in, fan_out))
            p[f"b{i}"] = rng.uniform(-bound, bound, fan_out)
            if i <= 3:
                p[f"E{i}"] = rng.normal(0.0, 0.02, (num_steps, hidden))
        return cls(dim, hidden, num_steps, p)

    @classmethod
    def zeros(cls, dim: int = 6, hidden: int = 128, num_steps: int = 100) -> NoisePredictor:
        model = cls.init(0, dim, hidden, num_steps)
        for v in model.params.values():
            v[...] = 0.0
        return model

    def copy(self) -> NoisePredictor:
        return NoisePredictor(
            self.dim,
            self.hidden,
            self.num_steps,
            {k: v.copy() for k, v in self.params.items()},
            {k: v.copy() for k, v in self.adam_m.items()},
            {k: v.copy() for k, v in self.adam_v.items()},
            self.adam_step,
            None if self.ema is None else {k: v.copy() for k, v in self.ema.items()},
        )

    @property
    def inference_params(self) -> dict[str, np.ndarray]:
        return self.params if self.ema is None else self.ema

    def forward(self, x: np.ndarray, t: np.ndarray, params=None) -> tuple[np.ndarray, tuple]:
        p = self.params if params is None else params
        idx = t - 1
        h = x
        acts = [x]
        pre = []
        for i in (1, 2, 3):
            a = h @ p[f"W{i}"] + p[f"b{i}"] + p[f"E{i}"][idx]
            h = np.maximum(a, 0.0)
            pre.append(a)
            acts.append(h)
        out = h @ p["W4"] + p["b4"]
        return out, (idx, acts, pre)

    def backward(self, cache: tuple, dout: np.ndarray) -> dict[str, np.ndarray]:
        idx, acts, pre = cache
        p = self.params
        grads = {"W4": acts[3].T @ dout, "b4": dout.sum(axis=0)}
        dh = dout @ p["W4"].T
        for i in (3, 2, 1):
            da = dh * (pre[i - 1] > 0)
            grads[f"W{i}"] = acts[i - 1].T @ da
            grads[f"b{i}"] = da.sum(axis=0)
            de = np.zeros_like(p[f"E{i}"])
            np.add.at(de, idx, da)
            grads[f"E{i}"] = de
            if i > 1:
                dh = da @ p[f"W{i}"].T
        return grads

    def adam_update(self, grads: dict[str, np.ndarray], lr: float,
                    beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
        if not self.adam_m:
            self.adam_m = {k: np.zeros_like(v) for k, v in self.params.items()}
            self.adam_v = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.adam_step += 1
        c1 = 1.0 - beta1**self.adam_step
        c2 = 1.0 - beta2**self.adam_step
        for k in PARAM_NAMES:
            g = grads[k]
            m = self.adam_m[k] = beta1 * self.adam_m[k] + (1.0 - beta1) * g
            v = self.adam_v[k] = beta2 * self.adam_v[k] + (1.0 - beta2) * (g * g)
            self.params[k] -= lr * (m / c1) / (np.sqrt(v / c2) + eps)

    def update_ema(self, decay: float) -> None:
        if self.ema is None:
            self.ema = {k: v.copy() for k, v in self.params.items()}
            return
        for k in PARAM_NAMES:
            self.ema[k] = decay * self.ema[k] + (1.0 - decay) * self.params[k]


def predict_noise(model: NoisePredictor, x_t, t) -> np.ndarray:
    """Predicted noise for one vector (scalar ``t``) or a batch (``t`` per row).

    Uses the averaged weights when the model has them.
    """
    x = np.asarray(x_t, dtype=np.float64)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    tb = np.broadcast_to(np.asarray(t, dtype=np.int64), (xb.shape[0],))
    if np.any(tb < 1) or np.any(tb > model.num_steps):
        raise ParameterError(f"timestep must lie in [1, {model.num_steps}]")
    out, _ = model.forward(xb, tb, model.inference_params)
    return out[0] if single else out


def noise_prediction_loss(model: NoisePredictor, x0: np.ndarray, t: np.ndarray, eps: np.ndarray,
                          schedule: NoiseSchedule) -> tuple[float, dict[str, np.ndarray]]:
    """Mean squared error between ``eps`` and the prediction at ``x_t``, plus its gradients."""
    x_t = forward_diffuse(x0, t, schedule, eps)
    out, cache = model.forward(x_t, t)
    diff = out - eps
    loss = float(np.mean(diff * diff))
    grads = model.backward(cache, 2.0 * diff / diff.size)
    return loss, grads


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 50
    learning_rate: float = 1e-3
    seed: int = 0
    hidden: int = 128
    # 0 disables averaging; sampling then uses the last iterate
    ema_decay: float = 0.995

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ParameterError("epochs and batch_size must be >= 1")
        if not 0.0 <= self.ema_decay < 1.0:
            raise ParameterError("ema_decay must lie in [0, 1)")
        if not self.learning_rate > 0:
            raise ParameterError("learning_rate must be positive")


def train(dataset, schedule: NoiseSchedule, cfg: TrainConfig,
          model: NoisePredictor | None = None) -> tuple[NoisePredictor, list[float]]:
    """Fit the noise predictor; returns the model and the mean loss of each epoch."""
    data = np.asarray(dataset, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ParameterError("dataset must be a non-empty (N, dim) array")
    rng = make_rng(cfg.seed)
    if model is None:
        model = NoisePredictor.init(int(rng.integers(2**63)), data.shape[1], cfg.hidden, schedule.T)
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(data.shape[0])
        total = 0.0
        for start in range(0, data.shape[0], cfg.batch_size):
            x0 = data[order[start:start + cfg.batch_size]]
            t = rng.integers(1, schedule.T + 1, size=x0.shape[0])
            eps = rng.standard_normal(x0.shape)
            loss, grads = noise_prediction_loss(model, x0, t, eps, schedule)
            if not math.isfinite(loss):
                raise TrainingDivergedError(f"loss became {loss} in epoch {epoch + 1}")
            model.adam_update(grads, cfg.learning_rate)
            if cfg.ema_decay > 0:
                model.update_ema(cfg.ema_decay)
            total += loss * x0.shape[0]
        history.append(total / data.shape[0])
    return model, history


def reverse_step(model: NoisePredictor, schedule: NoiseSchedule, x_t: np.ndarray, t: int,
                 z: np.ndarray) -> np.ndarray:
    """One ancestral step ``x_t -> x_{t-1}`` given the injected noise ``z``."""
    i = t - 1
    eps = predict_noise(model, x_t, t)
    coef = (1.0 - schedule.alpha[i]) / math.sqrt(1.0 - schedule.alpha_bar[i])
    return (x_t - coef * eps) / math.sqrt(schedule.alpha[i]) + schedule.sigma[i] * z


def sample(model: NoisePredictor, schedule: NoiseSchedule, count: int, seed: int) -> np.ndarray:
    """Draw ``count`` vectors by ancestral sampling from ``x_T ~ N(0, I)``."""
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    rng = make_rng(seed)
    x = rng.standard_normal((count, model.dim))
    for t in range(schedule.T, 0, -1):
        z = rng.standard_normal(x.shape) if t > 1 else np.zeros_like(x)
        x = reverse_step(model, schedule, x, t, z)
    return x


def zero_model_sample_variance(schedule: NoiseSchedule) -> float:
    """Per-component variance of ``x_0`` when the predictor outputs zero everywhere.

    Then ``x_{t-1} = x_t / sqrt(alpha_t) + sigma_t z``, which unrolls to
    ``1 / abar_T + sum_{t>=2} beta_t / abar_{t-1}``.
    """
    ab = schedule.alpha_bar
    return float(1.0 / ab[-1] + np.sum(schedule.beta[1:] / ab[:-1]))


# ---------------------------------------------------------------- checkpoints


def _encode(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"], validate=True)
    return np.frombuffer(raw, dtype="<f8").reshape(d["shape"]).astype(np.float64)


def checkpoint_bytes(model: NoisePredictor, schedule: NoiseSchedule) -> bytes:
    arrays = {k: _encode(model.params[k]) for k in PARAM_NAMES}
    for k in model.adam_m:
        arrays[f"adam_m.{k}"] = _encode(model.adam_m[k])
        arrays[f"adam_v.{k}"] = _encode(model.adam_v[k])
    for k, v in (model.ema or {}).items():
        arrays[f"ema.{k}"] = _encode(v)
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "byte_order": "little",
        "dtype": "float64",
        "dims": {"input": model.dim, "hidden": model.hidden, "steps": model.num_steps},
        "schedule": {"T": schedule.T, "beta": _encode(schedule.beta)},
        "adam_step": model.adam_step,
        "arrays": arrays,
    }
    return (json.dumps(doc, sort_keys=True, indent=1) + "\n").encode("utf-8")


def save_checkpoint(model: NoisePredictor, schedule: NoiseSchedule, path) -> None:
    Path(path).write_bytes(checkpoint_bytes(model, schedule))


def load_checkpoint(path) -> tuple[NoisePredictor, NoiseSchedule]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: not a valid checkpoint ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise ParseError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    if doc.get("version", 0) > CHECKPOINT_VERSION:
        raise VersionError(f"{path}: checkpoint version {doc['version']} is newer than {CHECKPOINT_VERSION}")
    if doc.get("byte_order") != "little" or doc.get("dtype") != "float64":
        raise ParseError(f"{path}: unsupported array encoding")
    try:
        dims = doc["dims"]
        arrays = {k: _decode(v) for k, v in doc["arrays"].items()}
        schedule = schedule_from_betas(_decode(doc["schedule"]["beta"]))
        model = NoisePredictor(
            int(dims["input"]),
            int(dims["hidden"]),
            int(dims["steps"]),
            {k: arrays[k] for k in PARAM_NAMES},
            {k[7:]: v for k, v in arrays.items() if k.startswith("adam_m.")},
            {k[7:]: v for k, v in arrays.items() if k.startswith("adam_v.")},
            int(doc["adam_step"]),
            {k[4:]: v for k, v in arrays.items() if k.startswith("ema.")} or None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed checkpoint ({exc})") from exc
    if schedule.T != model.num_steps:
        raise ParseError(f"{path}: schedule has {schedule.T} steps but model expects {model.num_steps}")
    return model, schedule
