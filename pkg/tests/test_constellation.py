import numpy as np
import pytest

from doim_otfs.constellation import Constellation
from doim_otfs.errors import ConfigError

ORDERS = [2, 4, 8, 16, 64]


@pytest.mark.parametrize("order", ORDERS)
def test_unit_average_power(order):
    c = Constellation.gray(order)
    assert c.order == order
    assert np.mean(np.abs(c.points) ** 2) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("order", ORDERS)
def test_nearest_neighbours_differ_in_one_bit(order):
    c = Constellation.gray(order)
    d = np.abs(c.points[:, None] - c.points[None, :])
    np.fill_diagonal(d, np.inf)
    dmin = d.min()
    for a, b in zip(*np.nonzero(np.isclose(d, dmin))):
        assert bin(a ^ b).count("1") == 1


@pytest.mark.parametrize("order", ORDERS)
def test_bits_labels_round_trip(order, rng):
    c = Constellation.gray(order)
    bits = rng.integers(0, 2, 300 * c.bits_per_symbol)
    labels = c.bits_to_labels(bits)
    np.testing.assert_array_equal(c.labels_to_bits(labels), bits)
    np.testing.assert_array_equal(c.demodulate(c.modulate(labels)), labels)


def test_qpsk_label_zero():
    c = Constellation.gray(4)
    assert c.points[0] == pytest.approx((1 + 1j) / np.sqrt(2))


def test_bad_order():
    with pytest.raises(ConfigError):
        Constellation.gray(6)
