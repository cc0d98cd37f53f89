import numpy as np
import pytest

from graphkf.diffable import DiffFn
from graphkf.errors import DimensionError
from graphkf.kalman import Belief, LinearSystem, ekf_step, joseph_update, kf_predict, kf_update, run_kf


def _scalar_system(f=0.8, g=0.5, h=1.5, q=0.04, r=0.09):
    to = lambda v: np.array([[v]])
    return LinearSystem(to(f), to(g), to(h), to(q), to(r))


def test_scalar_kf_against_hand_rolled():
    # one predict/update cycle worked out with the textbook equations
    sys_ = _scalar_system()
    belief = Belief(np.array([0.2]), np.array([[1.0]]))
    x, y = np.array([1.0]), np.array([0.7])

    pre = kf_predict(belief, sys_, x, 0)
    m_pre = 0.8 * 0.2 + 0.5 * 1.0
    p_pre = 0.8 * 1.0 * 0.8 + 0.04
    assert np.isclose(pre.mean[0], m_pre)
    assert np.isclose(pre.cov[0, 0], p_pre)

    post, gain, innov = kf_update(pre, sys_, y, 0)
    s = 1.5 * p_pre * 1.5 + 0.09
    k = p_pre * 1.5 / s
    assert np.isclose(gain[0, 0], k)
    assert np.isclose(innov[0], y[0] - 1.5 * m_pre)
    assert np.isclose(post.mean[0], m_pre + k * innov[0])
    # Joseph form equals the short form (1 - k h) p for the exact gain
    assert np.isclose(post.cov[0, 0], (1 - k * 1.5) * p_pre)


def test_joseph_update_psd_for_suboptimal_gain():
    # Joseph form must stay PSD even when the gain is not the optimal one;
    # check directly with a perturbed gain against its defining formula
    rng = np.random.default_rng(3)
    p = rng.normal(size=(4, 4))
    p = p @ p.T + np.eye(4)
    h = rng.normal(size=(2, 4))
    r = np.diag([0.5, 0.2])
    k_opt = np.linalg.solve(h @ p @ h.T + r, h @ p).T
    for k in (k_opt, k_opt + 0.3):
        ikh = np.eye(4) - k @ h
        want = ikh @ p @ ikh.T + k @ r @ k.T
        # reproduce through the kernel by forcing its gain: only check k_opt path
        if k is k_opt:
            _, cov, gain = joseph_update(np.zeros(4), p, h, r, np.zeros(2))
            assert np.allclose(gain, k_opt, atol=1e-10)
            assert np.allclose(cov, want, atol=1e-10)
        assert np.linalg.eigvalsh(want).min() > -1e-12


def test_ekf_reduces_to_kf_on_linear_functions():
    rng = np.random.default_rng(1)
    n, m = 3, 2
    f_mat = 0.5 * rng.normal(size=(n, n))
    g_mat = rng.normal(size=(n, m))
    h_mat = rng.normal(size=(m, n))
    q = 0.1 * np.eye(n)
    r = 0.2 * np.eye(m)
    sys_ = LinearSystem(f_mat, g_mat, h_mat, q, r)

    f_st = DiffFn(lambda s, x: f_mat @ s + g_mat @ x, [lambda s, x: f_mat, lambda s, x: g_mat])
    f_ro = DiffFn(lambda s: h_mat @ s, [lambda s: h_mat])

    belief_kf = Belief(np.zeros(n), np.eye(n))
    belief_ekf = Belief(np.zeros(n), np.eye(n))
    for t in range(5):
        x = rng.normal(size=m)
        y = rng.normal(size=m)
        belief_kf = kf_predict(belief_kf, sys_, x, t)
        belief_kf, _, _ = kf_update(belief_kf, sys_, y, t)
        belief_ekf, _ = ekf_step(belief_ekf, f_st, f_ro, x, y, q, r)
        assert np.allclose(belief_kf.mean, belief_ekf.mean, atol=1e-12)
        assert np.allclose(belief_kf.cov, belief_ekf.cov, atol=1e-12)


def test_run_kf_tracks_noiseless_linear_system():
    # with zero noise and exact model, the filter locks on and the
    # prediction error goes to zero
    f = np.array([[0.9, 0.1], [0.0, 0.8]])
    g = np.eye(2)
    h = np.array([[1.0, 0.0]])
    sys_ = LinearSystem(f, g, h, 1e-12 * np.eye(2), 1e-12 * np.eye(1))
    rng = np.random.default_rng(0)
    s = np.array([0.3, -0.4])
    xs, ys = [], []
    for _ in range(30):
        x = rng.normal(size=2)
        s = f @ s + g @ x
        xs.append(x)
        ys.append(h @ s)
    y_preds, _, final = run_kf(sys_, Belief(np.zeros(2), np.eye(2)), np.array(xs), np.array(ys))
    assert abs(y_preds[-1][0] - ys[-1][0]) < 1e-6
    assert np.allclose(final.mean, s, atol=1e-5)


def test_time_varying_matrices_are_called_with_t():
    seen = []

    def f_of_t(t):
        seen.append(t)
        return np.array([[1.0]])

    sys_ = LinearSystem(f_of_t, np.eye(1), np.eye(1), np.eye(1), np.eye(1))
    b = Belief(np.zeros(1), np.eye(1))
    kf_predict(b, sys_, np.zeros(1), 7)
    assert seen == [7]


def test_belief_validation_and_symmetrization():
    with pytest.raises(DimensionError):
        Belief(np.zeros(2), np.eye(3))
    b = Belief(np.zeros(2), np.array([[1.0, 0.2], [0.0, 1.0]]))
    assert np.array_equal(b.cov, b.cov.T)
