"""Pydantic models for regularizers, input documents and CLI runs."""

from __future__ import annotations

import math
from pathlib import Path
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

RegularizerKind = Literal["entropy", "l2"]


class Regularizer(BaseModel):
    """Strongly convex regularizer Ω with its temperature γ.

    ``entropy`` is the negative entropy γ Σ q log q (log-sum-exp / softmax),
    ``l2`` is the squared norm (γ/2)‖q‖² (sparse projections onto the simplex).
    """

    model_config = ConfigDict(frozen=True)

    kind: RegularizerKind = "entropy"
    gamma: float = Field(1.0, gt=0, allow_inf_nan=False, description="Temperature, strictly positive")

    @classmethod
    def entropy(cls, gamma: float = 1.0) -> "Regularizer":
        return cls(kind="entropy", gamma=gamma)

    @classmethod
    def l2(cls, gamma: float = 1.0) -> "Regularizer":
        return cls(kind="l2", gamma=gamma)

    @property
    def is_entropy(self) -> bool:
        return self.kind == "entropy"

    def with_gamma(self, gamma: float) -> "Regularizer":
        return Regularizer(kind=self.kind, gamma=gamma)


class DagDocument(BaseModel):
    """DAG JSON document: 1-based ``[child, parent, weight]`` edges."""

    n_nodes: int = Field(..., ge=2)
    edges: List[Tuple[int, int, float]] = Field(..., min_length=1)


class PotentialTensorDocument(BaseModel):
    """Viterbi potentials JSON document ``{"T", "S", "theta"}``."""

    T: int = Field(..., ge=1)
    S: int = Field(..., ge=1)
    theta: List[List[List[float]]]

    @model_validator(mode="after")
    def _check_shape(self) -> "PotentialTensorDocument":
        if len(self.theta) != self.T:
            raise ValueError(f"theta has {len(self.theta)} time steps, expected T={self.T}")
        for t, slab in enumerate(self.theta):
            if len(slab) != self.S or any(len(row) != self.S for row in slab):
                raise ValueError(f"theta[{t}] is not an S x S matrix with S={self.S}")
            if not all(math.isfinite(value) for row in slab for value in row):
                raise ValueError(f"theta[{t}] contains non-finite values")
        for i, row in enumerate(self.theta[0]):
            if any(value != row[0] for value in row):
                raise ValueError(f"theta[0][{i}] must be constant across previous states")
        return self

    def to_array(self) -> np.ndarray:
        return np.asarray(self.theta, dtype=float)


class RunConfig(BaseModel):
    """Validated arguments of one CLI invocation."""

    command: Literal["align", "tag", "gradcheck", "paths"]
    reg: RegularizerKind = "entropy"
    regs: List[RegularizerKind] = Field(default_factory=list)
    gamma: float = Field(1.0, gt=0, allow_inf_nan=False)
    out: Optional[Path] = None
    seed: int = 0
    header: bool = False

    # align
    cost: Optional[Path] = None
    series_a: Optional[Path] = None
    series_b: Optional[Path] = None
    hard: bool = False

    # tag / paths
    input: Optional[Path] = None
    cap: int = Field(10**6, ge=1)

    # gradcheck
    sizes: int = Field(4, ge=1)
    trials: int = Field(20, ge=1)

    @model_validator(mode="after")
    def _check_inputs(self) -> "RunConfig":
        if self.command == "align":
            pair = self.series_a is not None and self.series_b is not None
            if (self.cost is None) == (not pair):
                raise ValueError("align needs either --cost or both --a and --b")
        if self.command in ("tag", "paths") and self.input is None:
            raise ValueError(f"{self.command} needs an input file")
        return self

    @property
    def regularizer(self) -> Regularizer:
        return Regularizer(kind=self.reg, gamma=self.gamma)

    @property
    def regularizers(self) -> List[Regularizer]:
        kinds = self.regs or [self.reg]
        return [Regularizer(kind=kind, gamma=self.gamma) for kind in kinds]
