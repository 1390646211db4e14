"""Scalar rings used by every kernel.

Two instantiations exist: exact integers modulo the Mersenne prime 2^31 - 1
(bit-exact oracle comparisons regardless of summation order) and float64
(benchmarks). Both operate on numpy arrays in place.
"""

from abc import ABC, abstractmethod
from enum import Enum
from typing import Any

import numpy as np
from numpy.typing import NDArray

MERSENNE_31 = (1 << 31) - 1
_LOW_MASK = (1 << 16) - 1


class ScalarMode(Enum):
    """Scalar arithmetic selected per run."""

    INT = "int"
    F64 = "f64"


class Ring(ABC):
    """Commutative ring over numpy arrays."""

    mode: ScalarMode
    dtype: np.dtype

    def zeros(self, shape: int | tuple[int, ...]) -> NDArray:
        """Allocate a zero-filled array of ring elements."""
        return np.zeros(shape, dtype=self.dtype)

    @abstractmethod
    def random(self, rng: np.random.Generator, shape: tuple[int, ...]) -> NDArray:
        """Draw uniformly distributed ring elements."""

    @abstractmethod
    def product(self, u: NDArray, v: NDArray) -> NDArray:
        """Matrix product u @ v of two 2-D operands."""

    @abstractmethod
    def add_into(self, x: NDArray, y: NDArray) -> None:
        """In place: x <- x + y."""

    def mul_add(self, x: NDArray, u: NDArray, v: NDArray) -> None:
        """In place: x <- x + u @ v."""
        self.add_into(x, self.product(u, v))

    @abstractmethod
    def fma(self, acc: Any, a: Any, b: Any) -> Any:
        """Scalar acc + a * b."""

    @abstractmethod
    def equal(self, a: NDArray, b: NDArray) -> bool:
        """Compare two arrays under the ring's equality."""


class ModularRing(Ring):
    """Integers modulo 2^31 - 1 stored as int64.

    Products are formed by splitting the right operand into 16-bit halves so
    that every partial dot product stays below 2^63 for inner extents up to
    2^16.
    """

    mode = ScalarMode.INT
    dtype = np.dtype(np.int64)

    def __init__(self, modulus: int = MERSENNE_31):
        if modulus < 2 or modulus > MERSENNE_31:
            raise ValueError(f"modulus must lie in [2, 2^31 - 1], got {modulus}")
        self.modulus = modulus

    def random(self, rng: np.random.Generator, shape: tuple[int, ...]) -> NDArray:
        return rng.integers(0, self.modulus, size=shape, dtype=np.int64)

    def product(self, u: NDArray, v: NDArray) -> NDArray:
        p = self.modulus
        low = (u @ (v & _LOW_MASK)) % p
        high = (u @ (v >> 16)) % p
        return (low + (high << 16) % p) % p

    def add_into(self, x: NDArray, y: NDArray) -> None:
        np.add(x, y, out=x)
        np.remainder(x, self.modulus, out=x)

    def fma(self, acc: Any, a: Any, b: Any) -> int:
        return (int(acc) + int(a) * int(b)) % self.modulus

    def equal(self, a: NDArray, b: NDArray) -> bool:
        return a.shape == b.shape and bool(np.array_equal(a, b))


class FloatRing(Ring):
    """IEEE float64; equality is approximate."""

    mode = ScalarMode.F64
    dtype = np.dtype(np.float64)

    def __init__(self, rtol: float = 1e-9, atol: float = 1e-9):
        self.rtol = rtol
        self.atol = atol

    def random(self, rng: np.random.Generator, shape: tuple[int, ...]) -> NDArray:
        return rng.uniform(-1.0, 1.0, size=shape)

    def product(self, u: NDArray, v: NDArray) -> NDArray:
        return u @ v

    def add_into(self, x: NDArray, y: NDArray) -> None:
        np.add(x, y, out=x)

    def fma(self, acc: Any, a: Any, b: Any) -> float:
        return float(acc) + float(a) * float(b)

    def equal(self, a: NDArray, b: NDArray) -> bool:
        return a.shape == b.shape and bool(np.allclose(a, b, rtol=self.rtol, atol=self.atol))


def ring_for(mode: ScalarMode | str, rtol: float = 1e-9, atol: float = 1e-9) -> Ring:
    """Get the ring for a scalar mode.

    Args:
        mode: ScalarMode or its string value ("int" or "f64")
        rtol: Relative tolerance for float comparisons
        atol: Absolute tolerance for float comparisons

    Returns:
        A Ring instance
    """
    mode = ScalarMode(mode)
    if mode is ScalarMode.INT:
        return ModularRing()
    return FloatRing(rtol=rtol, atol=atol)
