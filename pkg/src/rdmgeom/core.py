"""Shared value types, axis conventions and seeded randomness."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

AXES = {
    "spin0d": ("XX", "Z", "X"),
    "spin1d": ("XX", "Z", "X"),
    "spinMF": ("XX", "Z", "X"),
    "classical2d": ("zz", "S", "z"),
    "bose3d": ("Ekin", "S", "psi"),
}

MODEL_TAGS = tuple(AXES)


def axis_labels(model_tag: str) -> tuple[str, str, str]:
    """Names of the three plotted coordinates for a model."""
    try:
        return AXES[model_tag]
    except KeyError:
        raise ValueError(
            f"unknown model tag {model_tag!r}; expected one of {', '.join(MODEL_TAGS)}"
        ) from None


@dataclass(frozen=True)
class ExpectationPoint:
    """A point ``(a, b, c)`` in a three-observable expectation space."""

    a: float
    b: float
    c: float
    axes: tuple[str, str, str] = ("XX", "Z", "X")

    def __post_init__(self):
        for name in ("a", "b", "c"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"non-finite coordinate {name}={v}")
            object.__setattr__(self, name, v)
        object.__setattr__(self, "axes", tuple(self.axes))

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c])

    def replace_c(self, c: float) -> "ExpectationPoint":
        return ExpectationPoint(self.a, self.b, c, self.axes)


@dataclass(frozen=True)
class SpinParams:
    """Couplings of ``H = -J sum X_i X_j - Bz sum Z_i - Bx sum X_i``."""

    J: float
    Bz: float
    Bx: float = 0.0

    def __post_init__(self):
        for name in ("J", "Bz", "Bx"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"non-finite parameter {name}={v}")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class Direction3:
    """Unit normal in expectation space; normalised on construction."""

    n: tuple[float, float, float]

    def __post_init__(self):
        v = np.asarray(self.n, dtype=float)
        if v.shape != (3,) or not np.all(np.isfinite(v)):
            raise ValueError(f"direction must be three finite numbers, got {self.n!r}")
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            raise ValueError("zero direction")
        object.__setattr__(self, "n", tuple(float(x) for x in v / norm))

    def as_array(self) -> np.ndarray:
        return np.array(self.n)


@dataclass(frozen=True)
class SeededRng:
    """Reproducible random streams keyed by ``(seed, stream)``.

    ``generator(*keys)`` derives an independent numpy Generator for any
    extra integer keys (for instance a sample index), so results do not
    depend on how work is split between processes.
    """

    seed: int = 0
    stream: int = 0
    _mask: int = field(default=(1 << 64) - 1, repr=False, compare=False)

    def __post_init__(self):
        if not (0 <= self.seed <= self._mask and 0 <= self.stream <= self._mask):
            raise ValueError("seed and stream must be unsigned 64-bit integers")

    def generator(self, *keys: int) -> np.random.Generator:
        ss = np.random.SeedSequence([self.seed, self.stream, *[int(k) for k in keys]])
        return np.random.Generator(np.random.PCG64(ss))

    def spawn(self, stream: int) -> "SeededRng":
        return SeededRng(self.seed, stream)


def fibonacci_sphere(count: int, hemisphere: bool = False) -> np.ndarray:
    """Quasi-uniform unit vectors on the sphere (or the ``c >= 0`` half)."""
    if count < 1:
        raise ValueError("count must be positive")
    i = np.arange(count) + 0.5
    golden = (1 + 5 ** 0.5) / 2
    if hemisphere:
        c = i / count
    else:
        c = 1 - 2 * i / count
    r = np.sqrt(np.clip(1 - c * c, 0.0, None))
    phi = 2 * np.pi * i / golden
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), c])
