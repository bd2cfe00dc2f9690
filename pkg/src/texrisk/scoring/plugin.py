"""External scorer plug-in: an executable scoring a batch of standardized views.

Contract: the executable is invoked with one argument, the path of an ``.npz``
file containing a float32 array ``views`` of shape (n, height, width), and
must print one score per view (one float per line) on standard output.  This
lets an external deep model replace the native feature+MLP scorer at
inference time.
"""

from __future__ import annotations

import subprocess
import tempfile
from pathlib import Path

import numpy as np


class ExternalScorer:
    """Adapter running the plug-in executable per batch of views."""

    def __init__(self, executable: str | Path):
        self.executable = Path(executable)
        if not self.executable.exists():
            raise FileNotFoundError(f"scorer executable {self.executable} not found")

    def score_views(self, std_views: list[np.ndarray]) -> np.ndarray:
        if not std_views:
            return np.zeros(0)
        batch = np.stack([np.asarray(v, dtype=np.float32) for v in std_views])
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "views.npz"
            np.savez_compressed(path, views=batch)
            proc = subprocess.run(
                [str(self.executable), str(path)],
                capture_output=True, text=True, check=True)
        scores = np.array([float(line) for line in proc.stdout.split()])
        if scores.size != batch.shape[0]:
            raise ValueError(
                f"plugin returned {scores.size} scores for {batch.shape[0]} views")
        if np.any((scores < 0) | (scores > 1)):
            raise ValueError("plugin scores must lie in [0, 1]")
        return scores
