"""Small fully connected network trained with Adam on binary cross entropy.

Everything is float64 numpy: forward, backprop, Adam state.  Dropout is
inverted and active only during training, so inference is deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import LengthMismatchError

PREDICTION_EPS = 1e-7
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_loss(predictions, labels) -> float:
    """Mean binary cross entropy with predictions clamped to [eps, 1-eps]."""
    predictions = np.asarray(predictions, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if predictions.shape != labels.shape:
        raise LengthMismatchError(
            f"predictions {predictions.shape} vs labels {labels.shape}")
    p = np.clip(predictions, PREDICTION_EPS, 1.0 - PREDICTION_EPS)
    return float(-np.mean(labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p)))


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0


class MLP:
    """Feed-forward ReLU network with a sigmoid output unit.

    ``dropout_rates`` gives the drop probability on the input features and on
    the last hidden activation, mirroring the two-dropout risk-model head.
    """

    def __init__(self, layer_sizes: list[int], seed: int = 0,
                 dropout_rates: tuple[float, float] = (0.0, 0.0)):
        if len(layer_sizes) < 2 or layer_sizes[-1] != 1:
            raise ValueError("layer_sizes must end in a single output unit")
        self.layer_sizes = list(layer_sizes)
        self.dropout_rates = tuple(dropout_rates)
        rng = np.random.default_rng(seed)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            scale = np.sqrt(2.0 / n_in)
            self.weights.append(rng.normal(0.0, scale, size=(n_in, n_out)))
            self.biases.append(np.zeros(n_out))
        self._adam = AdamState(
            m=[np.zeros_like(w) for w in self.parameters()],
            v=[np.zeros_like(w) for w in self.parameters()],
        )

    # -- parameter plumbing ------------------------------------------------

    def parameters(self) -> list[np.ndarray]:
        return self.weights + self.biases

    def snapshot(self) -> list[np.ndarray]:
        return [p.copy() for p in self.parameters()]

    def restore(self, snapshot: list[np.ndarray]) -> None:
        params = self.parameters()
        if len(snapshot) != len(params):
            raise ValueError("snapshot layout mismatch")
        for p, s in zip(params, snapshot):
            p[...] = s

    # -- forward / backward ------------------------------------------------

    def _dropout_masks(self, x_shape, h_shape, rng: np.random.Generator | None):
        if rng is None:
            return None, None
        r0, r1 = self.dropout_rates
        mask0 = mask1 = None
        if r0 > 0:
            mask0 = (rng.random(x_shape) >= r0) / (1.0 - r0)
        if r1 > 0:
            mask1 = (rng.random(h_shape) >= r1) / (1.0 - r1)
        return mask0, mask1

    def forward(self, x: np.ndarray, rng: np.random.Generator | None = None
                ) -> np.ndarray:
        """Predicted probabilities for a batch (n, n_in).

        Passing ``rng`` enables training-mode (inverted) dropout.
        """
        p, _ = self._forward_full(np.asarray(x, dtype=np.float64), rng)
        return p

    def _forward_full(self, x: np.ndarray, rng: np.random.Generator | None):
        n_hidden_layers = len(self.weights) - 1
        mask0, mask1 = self._dropout_masks(
            x.shape, (x.shape[0], self.layer_sizes[-2]), rng)
        cache = {"masks": (mask0, mask1), "inputs": [], "activations": []}
        h = x if mask0 is None else x * mask0
        for i in range(n_hidden_layers):
            cache["inputs"].append(h)
            z = h @ self.weights[i] + self.biases[i]
            cache["activations"].append(z)
            h = np.maximum(z, 0.0)
        if mask1 is not None:
            h = h * mask1
        cache["inputs"].append(h)
        z_out = h @ self.weights[-1] + self.biases[-1]
        p = sigmoid(z_out[:, 0])
        cache["probabilities"] = p
        return p, cache

    def loss_and_gradients(self, x: np.ndarray, y: np.ndarray,
                           rng: np.random.Generator | None = None
                           ) -> tuple[float, list[np.ndarray]]:
        """BCE loss and gradients w.r.t. every parameter (weights then biases)."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        p, cache = self._forward_full(x, rng)
        loss = bce_loss(p, y)

        n = x.shape[0]
        clamped = np.clip(p, PREDICTION_EPS, 1.0 - PREDICTION_EPS)
        # dL/dp on the clamped value; zero where the clamp is active so the
        # analytic gradient matches finite differences of the actual loss.
        dldp = (-(y / clamped) + (1.0 - y) / (1.0 - clamped)) / n
        dldp = np.where((p > PREDICTION_EPS) & (p < 1.0 - PREDICTION_EPS), dldp, 0.0)
        delta = (dldp * p * (1.0 - p))[:, None]  # dL/dz_out

        grad_w = [np.zeros_like(w) for w in self.weights]
        grad_b = [np.zeros_like(b) for b in self.biases]
        _, mask1 = cache["masks"]

        grad_w[-1] = cache["inputs"][-1].T @ delta
        grad_b[-1] = delta.sum(axis=0)
        upstream = delta @ self.weights[-1].T
        if mask1 is not None:
            upstream = upstream * mask1

        for i in range(len(self.weights) - 2, -1, -1):
            upstream = upstream * (cache["activations"][i] > 0)
            grad_w[i] = cache["inputs"][i].T @ upstream
            grad_b[i] = upstream.sum(axis=0)
            if i > 0:
                upstream = upstream @ self.weights[i].T
        return loss, grad_w + grad_b

    # -- optimization --------------------------------------------------------

    def adam_step(self, gradients: list[np.ndarray], learning_rate: float,
                  beta1: float = ADAM_BETA1, beta2: float = ADAM_BETA2,
                  eps: float = ADAM_EPS) -> None:
        state = self._adam
        state.t += 1
        for i, (param, grad) in enumerate(zip(self.parameters(), gradients)):
            state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad
            state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad * grad
            m_hat = state.m[i] / (1.0 - beta1 ** state.t)
            v_hat = state.v[i] / (1.0 - beta2 ** state.t)
            param -= learning_rate * m_hat / (np.sqrt(v_hat) + eps)

    def reset_optimizer(self) -> None:
        self._adam = AdamState(
            m=[np.zeros_like(p) for p in self.parameters()],
            v=[np.zeros_like(p) for p in self.parameters()],
        )

    # -- persistence ---------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "layer_sizes": self.layer_sizes,
            "dropout_rates": list(self.dropout_rates),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "MLP":
        model = cls(d["layer_sizes"], dropout_rates=tuple(d["dropout_rates"]))
        model.weights = [np.array(w, dtype=np.float64) for w in d["weights"]]
        model.biases = [np.array(b, dtype=np.float64) for b in d["biases"]]
        model.reset_optimizer()
        return model

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "MLP":
        return cls.from_json_dict(json.loads(Path(path).read_text()))
