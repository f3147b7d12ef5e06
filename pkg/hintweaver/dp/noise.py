from __future__ import annotations

import math
from typing import Any, Protocol, runtime_checkable

import attrs
import numpy as np
from loguru import logger

from hintweaver.errors import ParameterError
from hintweaver.models.privacy import NoiseKind, NoiseParams, PrivacyParams


@runtime_checkable
class NoiseSource(Protocol):
    """Anything exposing the `numpy.random.Generator` laplace/normal draws."""

    def laplace(self, loc: float = ..., scale: float = ..., size: Any = ...) -> Any:
        ...

    def normal(self, loc: float = ..., scale: float = ..., size: Any = ...) -> Any:
        ...


@attrs.define(frozen=True)
class ZeroNoise:
    """Noise source that always draws 0. Used to stub mechanisms in tests and dry runs."""

    def laplace(self, loc: float = 0.0, scale: float = 1.0, size: Any = None) -> Any:
        return 0.0 if size is None else np.zeros(size)

    def normal(self, loc: float = 0.0, scale: float = 1.0, size: Any = None) -> Any:
        return 0.0 if size is None else np.zeros(size)


def _require_positive(**values: float) -> None:
    for name, value in values.items():
        if not (value > 0 and math.isfinite(value)):
            raise ParameterError(f"{name} must be a positive finite number, got {value!r}")


def laplace_scale(sensitivity: float, epsilon: float) -> float:
    """Laplace scale b = Δ1/ε."""
    _require_positive(sensitivity=sensitivity, epsilon=epsilon)
    return sensitivity / epsilon


def gaussian_sigma(sensitivity2: float, epsilon: float, delta: float) -> float:
    """Classic Gaussian calibration σ = sqrt(2 ln(1.25/δ)) Δ2/ε."""
    _require_positive(sensitivity2=sensitivity2, epsilon=epsilon)
    if not 0 < delta < 1:
        raise ParameterError(f"gaussian mechanism requires 0 < delta < 1, got {delta!r}")
    return math.sqrt(2 * math.log(1.25 / delta)) * sensitivity2 / epsilon


def noise_for(params: PrivacyParams, kind: NoiseKind = NoiseKind.LAPLACE) -> NoiseParams:
    if kind is NoiseKind.LAPLACE:
        return NoiseParams(kind=kind, scale=laplace_scale(params.sensitivity, params.epsilon))
    return NoiseParams(
        kind=kind, scale=gaussian_sigma(params.sensitivity, params.epsilon, params.delta)
    )


def sample_noise(params: NoiseParams, rng: NoiseSource, size: int | tuple[int, ...] | None = None):
    """
    Draw from the configured noise distribution.

    Returns a float when `size` is None, else an array of draws. Deterministic given the
    state of `rng`.
    """
    if params.kind is NoiseKind.LAPLACE:
        draw = rng.laplace(0.0, params.scale, size)
    else:
        draw = rng.normal(0.0, params.scale, size)
    if size is None:
        draw = float(draw)
        logger.trace(
            "noise draw (kind={}, scale={}, value={})", params.kind.value, params.scale, draw
        )
    return draw
