"""Tests for the scalar rings."""

import numpy as np
import pytest

from hybridkernels.domain.ring import MERSENNE_31, FloatRing, ModularRing, ScalarMode, ring_for


class TestModularRing:
    """Tests for integers modulo 2^31 - 1."""

    def test_product_matches_python_integers(self, int_ring, rng):
        """The split product equals exact integer arithmetic mod p."""
        u = int_ring.random(rng, (8, 16))
        v = int_ring.random(rng, (16, 4))
        exact = (u.astype(object) @ v.astype(object)) % MERSENNE_31

        assert np.array_equal(int_ring.product(u, v), exact.astype(np.int64))

    def test_product_of_largest_elements(self, int_ring):
        """No overflow at the top of the range."""
        u = np.full((4, 64), MERSENNE_31 - 1, dtype=np.int64)
        v = np.full((64, 4), MERSENNE_31 - 1, dtype=np.int64)
        expected = (64 * (MERSENNE_31 - 1) ** 2) % MERSENNE_31

        assert (int_ring.product(u, v) == expected).all()

    def test_add_into_reduces(self, int_ring):
        """Sums wrap modulo p."""
        x = np.array([MERSENNE_31 - 1], dtype=np.int64)
        int_ring.add_into(x, np.array([2], dtype=np.int64))
        assert x.tolist() == [1]

    def test_fma(self, int_ring):
        """Scalar fused multiply-add reduces modulo p."""
        assert int_ring.fma(1, MERSENNE_31 - 1, 2) == MERSENNE_31 - 1

    def test_modulus_range(self):
        """The modulus must fit the split product."""
        with pytest.raises(ValueError):
            ModularRing(1 << 40)

    def test_equal_is_exact(self, int_ring):
        """Integer equality tolerates nothing."""
        a = np.array([1, 2], dtype=np.int64)
        assert int_ring.equal(a, a.copy())
        assert not int_ring.equal(a, a + 1)


class TestFloatRing:
    """Tests for float64."""

    def test_equal_within_tolerance(self, f64_ring):
        """Float comparison is approximate."""
        a = np.array([1.0, 2.0])
        assert f64_ring.equal(a, a + 1e-12)
        assert not f64_ring.equal(a, a + 1e-3)

    def test_random_range(self, f64_ring, rng):
        """Random floats lie in [-1, 1)."""
        values = f64_ring.random(rng, (100,))
        assert values.min() >= -1.0 and values.max() < 1.0


class TestRingFor:
    """Tests for ring selection."""

    def test_by_name(self):
        """Strings and enum members select the ring."""
        assert isinstance(ring_for("int"), ModularRing)
        assert isinstance(ring_for(ScalarMode.F64), FloatRing)

    def test_unknown(self):
        """Unknown modes are rejected."""
        with pytest.raises(ValueError):
            ring_for("f16")
