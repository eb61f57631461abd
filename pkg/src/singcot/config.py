"""Run configuration shared by the CLI and the experiment scripts."""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class Tolerances:
    bracket: float = 1e-9  # max |{g_i, g_j}| with analytic gradients
    descent: float = 1e-12  # |g_i' o Phi - g_i| across a gluing
    atlas: float = 1e-8  # inverse and cocycle residuals of transitions
    jacobian: float = 1e-5  # analytic vs finite-difference transition Jacobians
    drift: float = 1e-8  # conservation drift along a flow

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"tolerance {k} must be positive, got {v}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RunConfig:
    model: str | None = None
    epsilon: float = math.pi / 16
    samples: int = 10_000
    gluing_samples: int = 1000
    atlas_samples: int = 256
    seed: int = 42
    out: Path | None = None
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)
    tol: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        if self.samples < 1 or self.gluing_samples < 1 or self.atlas_samples < 1:
            raise ValueError("sample counts must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def to_dict(self) -> dict:
        # workers and out do not change results, so they stay out of reports
        return {
            "model": self.model,
            "epsilon": self.epsilon,
            "samples": self.samples,
            "gluing_samples": self.gluing_samples,
            "atlas_samples": self.atlas_samples,
            "seed": self.seed,
            "tolerances": self.tol.to_dict(),
        }
