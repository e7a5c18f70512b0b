"""Feed-forward preference model with hand-rolled backpropagation.

Maps a 10-entry feature vector (normalized motion status, one-hot situation,
normalized obstacle/target distances) to a predicted preference vector in
(0, 1)^4.  Hidden layers use tanh, the output layer a logistic squash.  All
parameters live in one flat float64 vector so meta-updates are plain vector
arithmetic; ``sgd_step`` returns new parameters and never mutates its input.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .world import DEFAULT_NEAR_OBSTACLE_M, DEFAULT_NEAR_TARGET_M, SITUATIONS

FEATURE_DIM = 10
OUTPUT_DIM = 4
DEFAULT_LAYER_DIMS = (FEATURE_DIM, 64, 64, OUTPUT_DIM)

CHECKPOINT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ModelParams:
    """Architecture metadata plus the flat parameter vector theta."""

    layer_dims: tuple[int, ...]
    theta: np.ndarray
    activations: tuple[str, ...]

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)  # private copy
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "layer_dims", tuple(int(d) for d in self.layer_dims))
        object.__setattr__(self, "activations", tuple(self.activations))
        expected = num_params(self.layer_dims)
        if theta.shape != (expected,):
            raise ValueError("shape error")
        if len(self.activations) != len(self.layer_dims) - 1:
            raise ValueError("shape error")
        if any(a not in ("tanh", "logistic") for a in self.activations):
            raise ValueError(f"unsupported activation tags {self.activations}")

    def with_theta(self, theta: np.ndarray) -> "ModelParams":
        return ModelParams(self.layer_dims, theta, self.activations)


@dataclass(frozen=True)
class LabeledSample:
    """One (feature vector, preference label) training pair."""

    input: np.ndarray  # (FEATURE_DIM,)
    label: np.ndarray  # (OUTPUT_DIM,), components in [0, 1]


def num_params(layer_dims) -> int:
    return sum((fi + 1) * fo for fi, fo in zip(layer_dims[:-1], layer_dims[1:]))


def default_activations(layer_dims) -> tuple[str, ...]:
    return ("tanh",) * (len(layer_dims) - 2) + ("logistic",)


def init_params(seed: int, layer_dims=DEFAULT_LAYER_DIMS) -> ModelParams:
    """Seeded symmetric-uniform weight init (biases zero)."""
    rng = np.random.default_rng(seed)
    chunks = []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        chunks.append(rng.uniform(-limit, limit, size=fan_in * fan_out))
        chunks.append(np.zeros(fan_out))
    return ModelParams(tuple(layer_dims), np.concatenate(chunks), default_activations(layer_dims))


def unpack(params: ModelParams) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split theta into per-layer (W, b) views; W has shape (fan_in, fan_out)."""
    layers = []
    offset = 0
    dims = params.layer_dims
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w = params.theta[offset:offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        b = params.theta[offset:offset + fan_out]
        offset += fan_out
        layers.append((w, b))
    return layers


def _logistic(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward_pass(params: ModelParams, x: np.ndarray):
    """Run the network on a (B, in) batch, keeping activations for backprop."""
    acts = [x]
    h = x
    for (w, b), tag in zip(unpack(params), params.activations):
        z = h @ w + b
        h = np.tanh(z) if tag == "tanh" else _logistic(z)
        acts.append(h)
    return acts


def batch_forward(params: ModelParams, inputs: np.ndarray) -> np.ndarray:
    """Predictions for a (B, FEATURE_DIM) batch; each output lies in (0, 1)."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2 or inputs.shape[1] != params.layer_dims[0]:
        raise ValueError("shape error")
    return _forward_pass(params, inputs)[-1]


def forward(params: ModelParams, features) -> np.ndarray:
    """Predicted preference vector for a single feature vector."""
    x = np.asarray(features, dtype=float)
    if x.shape != (params.layer_dims[0],):
        raise ValueError("shape error")
    return _forward_pass(params, x[None, :])[-1][0]


def loss(prediction, label) -> float:
    """Half squared L2 distance between predicted and target preferences."""
    diff = np.asarray(prediction, dtype=float) - np.asarray(label, dtype=float)
    return 0.5 * float(np.dot(diff.ravel(), diff.ravel()))


def samples_to_arrays(batch: list[LabeledSample]) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([np.asarray(s.input, dtype=float) for s in batch])
    y = np.stack([np.asarray(s.label, dtype=float) for s in batch])
    return x, y


def batch_loss_arrays(params: ModelParams, x: np.ndarray, y: np.ndarray) -> float:
    pred = batch_forward(params, x)
    diff = pred - y
    return 0.5 * float(np.einsum("ij,ij->", diff, diff)) / x.shape[0]


def batch_loss(params: ModelParams, batch: list[LabeledSample]) -> float:
    """Mean per-sample loss over a batch."""
    if not batch:
        raise ValueError("empty batch")
    return batch_loss_arrays(params, *samples_to_arrays(batch))


def gradient_arrays(params: ModelParams, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Exact gradient of the mean batch loss, flattened like theta."""
    if x.ndim != 2 or x.shape[1] != params.layer_dims[0]:
        raise ValueError("shape error")
    n = x.shape[0]
    layers = unpack(params)
    acts = _forward_pass(params, x)
    out = acts[-1]

    # Output layer is logistic: dL/dz = (out - y) * out * (1 - out), mean-scaled.
    delta = (out - y) * out * (1.0 - out) / n
    grads: list[np.ndarray] = []
    for li in range(len(layers) - 1, -1, -1):
        w, _ = layers[li]
        grads.append(delta.sum(axis=0))  # db
        grads.append((acts[li].T @ delta).ravel())  # dW
        if li > 0:
            upstream = delta @ w.T
            a_prev = acts[li]  # tanh activation of layer li
            delta = upstream * (1.0 - a_prev * a_prev)
    return np.concatenate(grads[::-1])


def gradient(params: ModelParams, batch: list[LabeledSample]) -> np.ndarray:
    if not batch:
        raise ValueError("empty batch")
    return gradient_arrays(params, *samples_to_arrays(batch))


def sgd_step_arrays(params: ModelParams, x: np.ndarray, y: np.ndarray, lr: float) -> ModelParams:
    return params.with_theta(params.theta - lr * gradient_arrays(params, x, y))


def sgd_step(params: ModelParams, batch: list[LabeledSample], lr: float) -> ModelParams:
    """One gradient step on the batch; returns new params (input unchanged)."""
    if not batch:
        raise ValueError("empty batch")
    return sgd_step_arrays(params, *samples_to_arrays(batch), lr)


def make_features(
    status_norm,
    situation_code: str,
    dist_obstacle: float,
    dist_target: float,
    near_obstacle_m: float = DEFAULT_NEAR_OBSTACLE_M,
    near_target_m: float = DEFAULT_NEAR_TARGET_M,
) -> np.ndarray:
    """Assemble the 10-entry model input.

    Layout: normalized status (4) | one-hot situation FF/TF/FT/TT (4) |
    distances to nearest obstacle and target, clamped to [0, 1] by dividing
    by twice the respective near/far threshold.
    """
    features = np.zeros(FEATURE_DIM)
    features[:4] = np.asarray(status_norm, dtype=float)
    features[4 + SITUATIONS.index(situation_code)] = 1.0
    features[8] = min(max(dist_obstacle / (2.0 * near_obstacle_m), 0.0), 1.0)
    features[9] = min(max(dist_target / (2.0 * near_target_m), 0.0), 1.0)
    return features


def _created_at() -> str:
    # Deterministic stamp: honors SOURCE_DATE_EPOCH, defaults to the epoch so
    # identical runs produce byte-identical checkpoints.
    import datetime

    epoch = int(os.environ.get("SOURCE_DATE_EPOCH", "0"))
    return datetime.datetime.fromtimestamp(epoch, datetime.timezone.utc).isoformat()


def save_checkpoint(path, params: ModelParams, trained_with: str, seed: int) -> None:
    """Write a JSON checkpoint; theta round-trips bit-exactly."""
    payload = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "layer_dims": list(params.layer_dims),
        "activations": list(params.activations),
        "theta": params.theta.tolist(),
        "trained_with": trained_with,
        "seed": int(seed),
        "created_at": _created_at(),
    }
    Path(path).write_text(json.dumps(payload) + "\n")


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    """Read a checkpoint, returning params plus the raw metadata dict."""
    raw = json.loads(Path(path).read_text())
    if raw.get("schema_version") != CHECKPOINT_SCHEMA_VERSION:
        raise ValueError(f"unsupported checkpoint schema {raw.get('schema_version')!r}")
    params = ModelParams(
        layer_dims=tuple(raw["layer_dims"]),
        theta=np.array(raw["theta"], dtype=float),
        activations=tuple(raw["activations"]),
    )
    return params, raw
