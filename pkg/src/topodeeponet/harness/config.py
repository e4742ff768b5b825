"""Experiment configuration: a YAML document validated before any compute."""

from __future__ import annotations

from pathlib import Path
from typing import List, Literal, Optional, Tuple

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..errors import ConfigError, RejectedInputError
from ..operators import (
    Antiderivative,
    GaussianConvolution,
    NonlinearComposition,
    PowerSeries,
    RankOneMatrix,
)
from ..spaces import (
    MeasurementSpace,
    SpaceKind,
    coordinate_family,
    functional_from_density,
    hermite_family,
    trig_family,
)

__all__ = [
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "build_space",
    "build_family",
    "build_oracle",
    "build_density",
]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class SpaceConfig(_Strict):
    kind: Literal["matrix", "sequence_lp", "sequence_c0", "l2_interval", "schwartz_hermite"]
    shape: List[int] = Field(min_length=1, max_length=2)
    interval: Tuple[float, float] = (0.0, 1.0)
    p: float = 2.0
    quad_order: int = 0


class FamilyConfig(_Strict):
    builder: Literal["trig", "hermite", "coordinate"]
    modes: List[Tuple[Literal["sin", "cos", "mono"], int]] = []
    orders: List[int] = []
    indices: List[int] = []
    box: Tuple[float, float] = (-1.0, 1.0)


class OperatorConfig(_Strict):
    kind: Literal["antiderivative", "rank_one_matrix", "power_series", "gaussian_convolution",
                  "nonlinear_composition"]
    w0: Optional[List[float]] = None
    v: List[float] = [1.0]
    omega0: List[float] = [1.0]
    zeta0: float = 0.0
    domain: Optional[Tuple[List[float], List[float]]] = None
    radius: float = 0.9
    s: float = 0.5
    half_width: float = 3.0


class ConstructConfig(_Strict):
    epsilon: float = Field(0.05, gt=0)
    n_train: int = Field(2000, ge=2)
    n_validation: int = Field(500, ge=1)
    dict_size: int = Field(128, ge=1)
    atom_budget: int = Field(64, ge=1)


class TrainBlock(_Strict):
    p: int = Field(8, ge=1)
    branch_widths: List[int] = [16]
    mixing: bool = True
    activation: Literal["tanh", "relu", "sigmoid"] = "tanh"
    n_u: int = Field(300, ge=2)
    split_ratio: float = Field(0.8, gt=0, lt=1)
    epochs: int = Field(300, ge=1)
    batch_size: int = Field(16, ge=1)
    learning_rate: float = Field(3e-3, gt=0)
    decay: float = Field(0.99, gt=0)
    freeze_functionals: bool = False


class DensityConfig(_Strict):
    kind: Literal["constant", "monomial", "gaussian"] = "monomial"
    value: float = 1.0
    k: int = Field(1, ge=0)


class DiscretizeConfig(_Strict):
    density: DensityConfig = DensityConfig()
    deltas: List[float] = [1e-4]
    n_check: int = Field(1000, ge=1)


class GridConfig(_Strict):
    y_points: int = Field(101, ge=1)
    n_eval: int = Field(200, ge=1)


class SweepConfig(_Strict):
    parameter: Literal["epsilon", "dict_size", "seed", "delta", "p"]
    values: List[float] = Field(min_length=1)


class ExperimentConfig(_Strict):
    name: str = "experiment"
    seed: int = 0
    output_dir: str = "runs"
    pipeline: Literal["constructive", "trained", "chen_chen_discretized"] = "constructive"
    space: SpaceConfig
    family: FamilyConfig
    operator: Optional[OperatorConfig] = None
    # YAML key "construct"; renamed in Python to avoid shadowing BaseModel.construct
    construction: ConstructConfig = Field(ConstructConfig(), alias="construct")
    train: TrainBlock = TrainBlock()
    discretize: DiscretizeConfig = DiscretizeConfig()
    grids: GridConfig = GridConfig()
    sweep: Optional[SweepConfig] = None

    @model_validator(mode="after")
    def _pipeline_needs(self):
        if self.pipeline in ("constructive", "trained") and self.operator is None:
            raise ValueError(f"pipeline {self.pipeline!r} needs an operator block")
        return self


def _format_errors(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def parse_config(data) -> ExperimentConfig:
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"config: {_format_errors(exc)}") from exc
    # build once so semantic errors (bad shapes, wrong space for a builder) surface now
    try:
        space = build_space(cfg)
        family = build_family(cfg, space)
        if cfg.operator is not None:
            build_oracle(cfg, family)
    except RejectedInputError as exc:
        raise ConfigError(f"config: {exc}") from exc
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    return parse_config(data)


def build_space(cfg: ExperimentConfig) -> MeasurementSpace:
    s = cfg.space
    return MeasurementSpace(SpaceKind(s.kind), tuple(s.shape), tuple(s.interval), s.p, s.quad_order)


def build_family(cfg: ExperimentConfig, space: MeasurementSpace):
    f = cfg.family
    if f.builder == "trig":
        return trig_family(space, f.modes, f.box)
    if f.builder == "hermite":
        return hermite_family(space, f.orders, f.box)
    return coordinate_family(space, f.indices, f.box)


def build_oracle(cfg: ExperimentConfig, family):
    op = cfg.operator
    space = family.space
    if op.kind == "antiderivative":
        return Antiderivative(family)
    if op.kind == "nonlinear_composition":
        return NonlinearComposition(family)
    if op.kind == "power_series":
        return PowerSeries(space, op.radius)
    if op.kind == "gaussian_convolution":
        return GaussianConvolution(space, op.s, op.half_width)
    w0 = np.eye(*space.shape).ravel() if op.w0 is None else op.w0
    domain = None if op.domain is None else (np.array(op.domain[0]), np.array(op.domain[1]))
    return RankOneMatrix(space, w0, op.v, op.omega0, op.zeta0, domain)


def build_density(cfg: ExperimentConfig, space: MeasurementSpace):
    d = cfg.discretize.density
    if d.kind == "constant":
        g = lambda x: np.full_like(x, d.value)  # noqa: E731
    elif d.kind == "monomial":
        g = lambda x: d.value * x ** d.k  # noqa: E731
    else:
        g = lambda x: d.value * np.exp(-x * x)  # noqa: E731
    return functional_from_density(space, g)
