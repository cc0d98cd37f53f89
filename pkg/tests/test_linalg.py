import numpy as np
import pytest

from graphkf.errors import DimensionError, SingularInnovationError
from graphkf.linalg import bullet, spd_solve, symmetrize


def test_symmetrize_exact():
    a = np.array([[1.0, 2.0], [0.0, 3.0]])
    s = symmetrize(a)
    assert np.array_equal(s, s.T)
    assert np.allclose(s, [[1.0, 1.0], [1.0, 3.0]])


def test_bullet_matches_einsum():
    rng = np.random.default_rng(7)
    tensor = rng.normal(size=(4, 3, 5))
    mat = rng.normal(size=(3, 5))
    want = np.einsum("kij,ij->k", tensor, mat)
    assert np.allclose(bullet(tensor, mat), want, atol=1e-14)


def test_bullet_shape_checks():
    with pytest.raises(DimensionError):
        bullet(np.zeros((3, 3)), np.zeros((3, 3)))
    with pytest.raises(DimensionError):
        bullet(np.zeros((2, 3, 4)), np.zeros((3, 3)))


def test_spd_solve_matches_direct():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(6, 6))
    s = a @ a.T + 6 * np.eye(6)
    b = rng.normal(size=(6, 4))
    assert np.allclose(spd_solve(s, b), np.linalg.solve(s, b), atol=1e-10)
    # vector right-hand side keeps its shape
    v = rng.normal(size=6)
    assert spd_solve(s, v).shape == (6,)


def test_spd_solve_rejects_indefinite():
    s = np.diag([1.0, -1.0])
    with pytest.raises(SingularInnovationError) as exc:
        spd_solve(s, np.ones(2))
    assert exc.value.min_pivot <= 0.0


def test_spd_solve_shape_checks():
    with pytest.raises(DimensionError):
        spd_solve(np.ones((2, 3)), np.ones(2))
    with pytest.raises(DimensionError):
        spd_solve(np.eye(3), np.ones(4))
