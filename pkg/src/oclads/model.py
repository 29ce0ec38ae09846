"""Two-class softmax classifier with one tanh hidden layer and focal loss.

The same parameter value travels between server and device, so the model is
an immutable record: every training call returns a new ``ModelParams``.
Focal loss handles the heavy class imbalance of the stream; its gradient is
computed analytically (and checked against finite differences in the tests).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

EPS_PROB = 1e-12


class TrainingFailureError(RuntimeError):
    """Raised when a forward pass or loss turns non-finite."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.02
    steps_per_batch: int = 20
    minibatch_size: int = 32
    gamma_fl: float = 2.0
    alpha_fl: float = 0.8

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.steps_per_batch < 1:
            raise ValueError("steps_per_batch must be >= 1")
        if self.minibatch_size < 1:
            raise ValueError("minibatch_size must be >= 1")
        if self.gamma_fl < 0:
            raise ValueError("gamma_fl must be >= 0")
        if not 0.0 < self.alpha_fl < 1.0:
            raise ValueError("alpha_fl must lie in (0, 1)")


@dataclass(frozen=True)
class ModelParams:
    """Weights/biases for input(M) -> hidden(H, tanh) -> output(2)."""

    w1: np.ndarray  # (H, M)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (2, H)
    b2: np.ndarray  # (2,)

    def __post_init__(self) -> None:
        h, m = self.w1.shape
        if self.b1.shape != (h,) or self.w2.shape != (2, h) or self.b2.shape != (2,):
            raise ValueError("inconsistent parameter shapes")

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[0]

    def is_finite(self) -> bool:
        return all(
            np.isfinite(a).all() for a in (self.w1, self.b1, self.w2, self.b2)
        )

    def to_record(self) -> dict:
        """JSON-compatible payload: version tag, shape header, row-major values."""
        flat = np.concatenate(
            [self.w1.ravel(), self.b1, self.w2.ravel(), self.b2]
        )
        return {
            "version": 1,
            "dims": [self.input_dim, self.hidden_dim, 2],
            "values": flat.tolist(),
        }

    @classmethod
    def from_record(cls, record: dict) -> "ModelParams":
        if record.get("version") != 1:
            raise ValueError(f"unsupported model record version: {record.get('version')!r}")
        m, h, out = (int(d) for d in record["dims"])
        if out != 2:
            raise ValueError("model record must have exactly 2 output units")
        flat = np.asarray(record["values"], dtype=np.float64)
        expected = h * m + h + 2 * h + 2
        if flat.shape != (expected,):
            raise ValueError(
                f"model record has {flat.size} values, expected {expected}"
            )
        w1, rest = flat[: h * m].reshape(h, m), flat[h * m :]
        b1, rest = rest[:h], rest[h:]
        w2, b2 = rest[: 2 * h].reshape(2, h), rest[2 * h :]
        return cls(w1=w1, b1=b1, w2=w2, b2=b2)


def init_params(input_dim: int, hidden_dim: int, rng: np.random.Generator) -> ModelParams:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization per layer."""
    lim1 = 1.0 / np.sqrt(input_dim)
    lim2 = 1.0 / np.sqrt(hidden_dim)
    return ModelParams(
        w1=rng.uniform(-lim1, lim1, size=(hidden_dim, input_dim)),
        b1=rng.uniform(-lim1, lim1, size=hidden_dim),
        w2=rng.uniform(-lim2, lim2, size=(2, hidden_dim)),
        b2=rng.uniform(-lim2, lim2, size=2),
    )


def _forward(params: ModelParams, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hidden activations and stable softmax probabilities for (n, M) input."""
    hidden = np.tanh(x @ params.w1.T + params.b1)
    logits = hidden @ params.w2.T + params.b2
    shifted = logits - logits.max(axis=1, keepdims=True)
    expz = np.exp(shifted)
    probs = expz / expz.sum(axis=1, keepdims=True)
    return hidden, probs


def predict_batch(params: ModelParams, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Softmax probabilities (n, 2) and hard labels; a 0.5/0.5 tie goes to class 0."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != params.input_dim:
        raise ValueError(
            f"input has dimension {x.shape[1]}, model expects {params.input_dim}"
        )
    _, probs = _forward(params, x)
    labels = (probs[:, 1] > probs[:, 0]).astype(np.int64)
    return probs, labels


def predict(params: ModelParams, x: np.ndarray) -> tuple[np.ndarray, int]:
    probs, labels = predict_batch(params, x)
    return probs[0], int(labels[0])


def focal_loss(
    params: ModelParams,
    x: np.ndarray,
    y: np.ndarray,
    gamma_fl: float = 2.0,
    alpha_fl: float = 0.8,
) -> tuple[float, ModelParams]:
    """Mean focal loss over a minibatch and its gradient w.r.t. all parameters.

    Per sample: -alpha_c (1 - p_c)^gamma log p_c, with alpha_1 = alpha_fl for
    the anomalous class and alpha_0 = 1 - alpha_fl for the normal class; the
    true-class probability is clamped to [EPS_PROB, 1 - EPS_PROB]. Where the
    clamp is active the loss is locally flat in p_c, so those samples get a
    zero dL/dp term (the gradient stays the exact derivative of the computed
    loss). Returns (loss, gradient) with the gradient packed as ModelParams.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = x.shape[0]
    if n == 0:
        raise ValueError("minibatch must be nonempty")

    hidden, probs = _forward(params, x)
    if not np.isfinite(probs).all():
        raise TrainingFailureError("non-finite values in forward pass")

    p_true = probs[np.arange(n), y]
    clamped = np.clip(p_true, EPS_PROB, 1.0 - EPS_PROB)
    alpha = np.where(y == 1, alpha_fl, 1.0 - alpha_fl)
    one_minus = 1.0 - clamped
    log_p = np.log(clamped)
    loss = float(np.mean(-alpha * one_minus**gamma_fl * log_p))
    if not np.isfinite(loss):
        raise TrainingFailureError("non-finite focal loss")

    # dL/dp_c, zeroed where the clamp flattens the loss.
    if gamma_fl == 0.0:
        dl_dp = -alpha / clamped
    else:
        dl_dp = -alpha * (
            -gamma_fl * one_minus ** (gamma_fl - 1.0) * log_p + one_minus**gamma_fl / clamped
        )
    dl_dp = np.where(p_true == clamped, dl_dp, 0.0)

    # dp_c/dz_k = p_c (delta_{k,c} - p_k); fold in the 1/n of the mean.
    onehot = np.zeros_like(probs)
    onehot[np.arange(n), y] = 1.0
    dz = (dl_dp * p_true)[:, None] * (onehot - probs) / n

    grad_w2 = dz.T @ hidden
    grad_b2 = dz.sum(axis=0)
    dpre = (dz @ params.w2) * (1.0 - hidden**2)
    grad_w1 = dpre.T @ x
    grad_b1 = dpre.sum(axis=0)
    return loss, ModelParams(w1=grad_w1, b1=grad_b1, w2=grad_w2, b2=grad_b2)


def _sgd_step(params: ModelParams, grad: ModelParams, lr: float) -> ModelParams:
    return replace(
        params,
        w1=params.w1 - lr * grad.w1,
        b1=params.b1 - lr * grad.b1,
        w2=params.w2 - lr * grad.w2,
        b2=params.b2 - lr * grad.b2,
    )


def train_steps(
    params: ModelParams,
    features: np.ndarray,
    labels: np.ndarray,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> ModelParams:
    """Run cfg.steps_per_batch SGD steps on minibatches drawn with replacement."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = features.shape[0]
    if n == 0:
        raise ValueError("training collection must be nonempty")
    for _ in range(cfg.steps_per_batch):
        idx = rng.integers(0, n, size=cfg.minibatch_size)
        _, grad = focal_loss(params, features[idx], labels[idx], cfg.gamma_fl, cfg.alpha_fl)
        params = _sgd_step(params, grad, cfg.learning_rate)
    if not params.is_finite():
        raise TrainingFailureError("parameters diverged to non-finite values")
    return params


def bootstrap_finetune(
    params: ModelParams,
    features: np.ndarray,
    labels: np.ndarray,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> ModelParams:
    """Fine-tune fresh parameters on the warm-start set.

    Every policy starts from the result of this call, so runs differ only in
    what happens after deployment.
    """
    if len(features) == 0:
        raise ValueError("bootstrap dataset must be nonempty")
    return train_steps(params, features, labels, cfg, rng)
