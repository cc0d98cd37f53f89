import numpy as np
import pytest

from graphkf.errors import DimensionError
from graphkf.graphs import GraphTopology, row_normalize, sym_normalize

PATH3 = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)


def test_sym_normalize_hand_computed_path():
    # path 0-1-2: self-loop degrees (2, 3, 2)
    got = sym_normalize(PATH3)
    want = np.array(
        [
            [1 / 2, 1 / np.sqrt(6), 0],
            [1 / np.sqrt(6), 1 / 3, 1 / np.sqrt(6)],
            [0, 1 / np.sqrt(6), 1 / 2],
        ]
    )
    assert np.allclose(got, want, atol=1e-15)
    assert np.allclose(got, got.T)


def test_sym_normalize_spectrum_in_unit_interval():
    rng = np.random.default_rng(5)
    a = (rng.random((10, 10)) < 0.3).astype(float)
    a = np.triu(a, 1)
    a = a + a.T
    eig = np.linalg.eigvalsh(sym_normalize(a))
    assert eig.min() >= -1 - 1e-12 and eig.max() <= 1 + 1e-12


def test_sym_normalize_isolated_node_unit_self_loop():
    a = np.zeros((3, 3))
    a[0, 1] = a[1, 0] = 1.0
    got = sym_normalize(a)
    assert got[2, 2] == 1.0
    assert got[2, 0] == got[2, 1] == 0.0


def test_row_normalize_rows_sum_to_one_and_zero_rows_stay():
    a = np.zeros((3, 3))
    a[0, 1] = a[1, 0] = 1.0
    a[1, 2] = a[2, 1] = 1.0
    got = row_normalize(a)
    assert np.allclose(got.sum(axis=1), [1.0, 1.0, 1.0])
    b = np.zeros((2, 2))
    assert np.array_equal(row_normalize(b), b)


def test_adjacency_validation():
    with pytest.raises(DimensionError):
        sym_normalize(np.ones((2, 3)))
    with pytest.raises(DimensionError):
        sym_normalize(np.array([[0.0, np.inf], [np.inf, 0.0]]))
    with pytest.raises(DimensionError):
        sym_normalize(np.array([[0.0, -1.0], [-1.0, 0.0]]))
    with pytest.raises(DimensionError):
        sym_normalize(np.eye(2))
    with pytest.raises(DimensionError):
        GraphTopology(np.array([[0.0, 1.0], [0.0, 0.0]]))  # asymmetric


def test_topology_immutable_and_cached():
    top = GraphTopology(PATH3)
    with pytest.raises(ValueError):
        top.adjacency[0, 1] = 5.0
    with pytest.raises(ValueError):
        top.normalized_sym[0, 0] = 5.0


def test_edges_round_trip_and_equality():
    top = GraphTopology(PATH3)
    assert top.edges() == [(0, 1), (1, 2)]
    again = GraphTopology.from_edges(3, top.edges())
    assert again == top
    assert GraphTopology.from_edges(3, [(0, 1)]) != top


def test_is_connected():
    assert GraphTopology(PATH3).is_connected()
    assert not GraphTopology.from_edges(4, [(0, 1), (2, 3)]).is_connected()
    assert GraphTopology(np.zeros((1, 1))).is_connected()
