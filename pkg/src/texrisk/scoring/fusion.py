"""Risk-factor fusion: a three-layer network combining the texture score with
age, presence of clips, and percentage mammographic density."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import LengthMismatchError
from .mlp import MLP
from .training import ScorerConfig, rank_auc

FUSION_INPUT_ORDER = ("texture_score", "age_normalized", "clips_indicator", "pmd")
HOLDOUT_FRACTION = 0.25


@dataclass
class FusionModel:
    """Trained fusion network plus the age normalization it was fit with."""

    mlp: MLP
    age_min: float
    age_max: float

    def inputs(self, texture_scores, ages, clips, pmds) -> np.ndarray:
        texture_scores = np.asarray(texture_scores, dtype=float)
        ages = np.asarray(ages, dtype=float)
        clips = np.asarray(clips, dtype=float)
        pmds = np.asarray(pmds, dtype=float)
        span = max(self.age_max - self.age_min, 1e-9)
        age_norm = np.clip((ages - self.age_min) / span, 0.0, 1.0)
        return np.column_stack([texture_scores, age_norm, clips, pmds])

    def predict(self, texture_scores, ages, clips, pmds) -> np.ndarray:
        return self.mlp.forward(self.inputs(texture_scores, ages, clips, pmds))

    def to_json_dict(self) -> dict:
        return {"mlp": self.mlp.to_json_dict(),
                "age_min": self.age_min, "age_max": self.age_max,
                "input_order": list(FUSION_INPUT_ORDER)}

    @classmethod
    def from_json_dict(cls, d: dict) -> "FusionModel":
        return cls(mlp=MLP.from_json_dict(d["mlp"]),
                   age_min=d["age_min"], age_max=d["age_max"])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "FusionModel":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def train_fusion(texture_scores, ages, clips, pmds, labels,
                 config: ScorerConfig | None = None,
                 hidden_sizes: tuple[int, int] = (16, 8)) -> FusionModel:
    """Train the fusion network with BCE and early stopping on a held-out AUC.

    Input arrays must be aligned; ages are normalized to [0, 1] over the
    training range.  Deterministic given ``config.seed``.
    """
    config = config or ScorerConfig(learning_rate=0.01, max_epochs=200,
                                    dropout_rates=(0.0, 0.0))
    arrays = [np.asarray(a, dtype=float)
              for a in (texture_scores, ages, clips, pmds, labels)]
    n = arrays[0].shape[0]
    if any(a.shape[0] != n for a in arrays):
        raise LengthMismatchError("fusion inputs are not aligned")
    texture_scores, ages, clips, pmds, labels = arrays

    for name, column in zip(FUSION_INPUT_ORDER, (texture_scores, ages, clips, pmds)):
        if np.ptp(column) == 0 and np.ptp(labels) > 0:
            warnings.warn(f"fusion input {name!r} is constant", stacklevel=2)

    model = FusionModel(
        mlp=MLP([4, hidden_sizes[0], hidden_sizes[1], 1], seed=config.seed,
                dropout_rates=config.dropout_rates),
        age_min=float(ages.min()), age_max=float(ages.max()))
    x = model.inputs(texture_scores, ages, clips, pmds)
    y = labels.astype(np.float64)

    rng = np.random.default_rng(config.seed)
    order = rng.permutation(n)
    n_holdout = max(2, int(HOLDOUT_FRACTION * n))
    holdout, train = order[:n_holdout], order[n_holdout:]
    # keep both classes in both splits; fall back to whole-set stopping otherwise
    if len({0, 1} & set(y[holdout].astype(int))) < 2 or y[train].min() == y[train].max():
        holdout = train = np.arange(n)

    best_auc, best_params = -np.inf, model.mlp.snapshot()
    for _ in range(config.max_epochs):
        batch_order = rng.permutation(train)
        for start in range(0, len(batch_order), config.batch_size):
            idx = batch_order[start:start + config.batch_size]
            _, grads = model.mlp.loss_and_gradients(x[idx], y[idx], rng=rng)
            model.mlp.adam_step(grads, config.learning_rate,
                                config.adam_beta1, config.adam_beta2,
                                config.adam_eps)
        auc = rank_auc(model.mlp.forward(x[holdout]), y[holdout] == 1)
        if auc > best_auc:
            best_auc, best_params = auc, model.mlp.snapshot()
    model.mlp.restore(best_params)
    return model
