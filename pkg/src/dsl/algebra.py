"""Cayley-Dickson algebras R, C, H, O.

Levels 0..3 of the doubling construction, with the sign convention

    (a, b)(c, d) = (ac - conj(d) b, da + b conj(c)),

recursing down to real multiplication at level 0. Under this convention
the level-2 units satisfy i j = k and the level-3 algebra is the usual
octonions: non-associative but alternative, and normed at every level
(|xy| = |x| |y|), which is what the unit-sphere multiplication maps are
built on.

Levels are capped at 3; the level-4 doubling loses the norm identity.
All arithmetic is 64-bit floating point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels

MAX_LEVEL = 3

__all__ = [
    "MAX_LEVEL",
    "AlgebraElement",
    "cd_mul",
    "cd_conj",
    "cd_norm",
    "cd_inv",
    "mul_arrays",
    "conj_arrays",
    "inv_arrays",
]


def _check_level(level: int) -> int:
    if not 0 <= level <= MAX_LEVEL:
        raise ValueError(f"level must be in 0..{MAX_LEVEL}, got {level}")
    return level


@dataclass(frozen=True)
class AlgebraElement:
    """A value in the level-k Cayley-Dickson algebra, k in 0..3.

    coords has length 2**level; the Euclidean norm of coords is the
    algebra norm.
    """

    level: int
    coords: np.ndarray = field(repr=False)

    def __post_init__(self):
        _check_level(self.level)
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.shape != (2**self.level,):
            raise ValueError(
                f"level {self.level} element needs {2**self.level} coordinates, "
                f"got shape {coords.shape}"
            )
        object.__setattr__(self, "coords", coords)

    @classmethod
    def from_coords(cls, coords) -> "AlgebraElement":
        coords = np.asarray(coords, dtype=np.float64)
        level = int(np.log2(len(coords)))
        return cls(level, coords)

    @classmethod
    def one(cls, level: int) -> "AlgebraElement":
        return cls.basis(level, 0)

    @classmethod
    def basis(cls, level: int, index: int) -> "AlgebraElement":
        _check_level(level)
        coords = np.zeros(2**level)
        coords[index] = 1.0
        return cls(level, coords)

    @classmethod
    def random_unit(cls, level: int, rng: np.random.Generator) -> "AlgebraElement":
        _check_level(level)
        coords = rng.standard_normal(2**level)
        return cls(level, coords / np.linalg.norm(coords))

    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))

    def conj(self) -> "AlgebraElement":
        return AlgebraElement(self.level, _kernels.cd_conj(self.coords))

    def inverse(self) -> "AlgebraElement":
        return cd_inv(self)

    def __mul__(self, other: "AlgebraElement") -> "AlgebraElement":
        return cd_mul(self, other)

    def __neg__(self) -> "AlgebraElement":
        return AlgebraElement(self.level, -self.coords)

    def __repr__(self) -> str:
        return f"AlgebraElement(level={self.level}, coords={self.coords.tolist()})"


def cd_mul(a: AlgebraElement, b: AlgebraElement) -> AlgebraElement:
    """Cayley-Dickson product. Raises on level mismatch."""
    if a.level != b.level:
        raise ValueError(f"level mismatch: {a.level} != {b.level}")
    return AlgebraElement(a.level, _kernels.cd_mul(a.coords, b.coords))


def cd_conj(a: AlgebraElement) -> AlgebraElement:
    """Conjugation: negates every coordinate except the first."""
    return a.conj()


def cd_norm(a: AlgebraElement) -> float:
    """Algebra norm, the Euclidean norm of the coordinates."""
    return a.norm()


def cd_inv(a: AlgebraElement) -> AlgebraElement:
    """Multiplicative inverse conj(a) / |a|^2. Raises on zero input."""
    n2 = float(a.coords @ a.coords)
    if n2 == 0.0:
        raise ZeroDivisionError("cannot invert the zero element")
    return AlgebraElement(a.level, _kernels.cd_conj(a.coords) / n2)


# Array-level entry points used by the geometry modules, which keep
# points as raw coordinate arrays of shape (..., 2**level).


def mul_arrays(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return _kernels.cd_mul(a, b)


def conj_arrays(a: np.ndarray) -> np.ndarray:
    return _kernels.cd_conj(a)


def inv_arrays(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    n2 = np.sum(a * a, axis=-1, keepdims=True)
    if np.any(n2 == 0.0):
        raise ZeroDivisionError("cannot invert the zero element")
    return _kernels.cd_conj(a) / n2
