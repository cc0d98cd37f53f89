"""Classical linear and extended Kalman filters on flat state vectors.

Conventions
-----------
State-space model::

    h_t = F h_{t-1} + G x_{t-1} + w,   w ~ N(0, Q)
    y_t = H h_t + v,                   v ~ N(0, R)

Updates use the Joseph form ``P+ = (I - K H) P- (I - K H)^T + K R K^T``,
which stays positive semi-definite for any gain, and innovation covariances
are factorized with a Cholesky solve — no explicit inverses anywhere.
The same update kernel backs the graph filter, so reductions between the
two are exact rather than approximate.
"""

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .diffable import DiffFn
from .errors import DimensionError
from .linalg import spd_solve, symmetrize

__all__ = ["LinearSystem", "Belief", "kf_predict", "kf_update", "ekf_step", "run_kf", "joseph_update"]

MatrixOrFn = Union[np.ndarray, Callable[[int], np.ndarray]]


def _at(m: MatrixOrFn, t: int) -> np.ndarray:
    return np.asarray(m(t) if callable(m) else m, dtype=np.float64)


@dataclass
class LinearSystem:
    """Time-variant linear system; each matrix is a constant or a callable of t."""

    F: MatrixOrFn
    G: MatrixOrFn
    H: MatrixOrFn
    Q: MatrixOrFn
    R: MatrixOrFn

    def matrices(self, t: int):
        return (_at(self.F, t), _at(self.G, t), _at(self.H, t), _at(self.Q, t), _at(self.R, t))


@dataclass
class Belief:
    """Gaussian state belief. Covariance is symmetrized on construction."""

    mean: np.ndarray
    cov: np.ndarray = field(default=None)

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64).ravel()
        if self.cov is not None:
            cov = np.asarray(self.cov, dtype=np.float64)
            if cov.shape != (self.mean.size, self.mean.size):
                raise DimensionError(f"Belief: cov shape {cov.shape} does not match mean dim {self.mean.size}")
            self.cov = symmetrize(cov)


def kf_predict(belief: Belief, system: LinearSystem, x: np.ndarray, t: int) -> Belief:
    """Time update: propagate mean and covariance one step."""
    F, G, _, Q, _ = system.matrices(t)
    x = np.asarray(x, dtype=np.float64).ravel()
    mean = F @ belief.mean + G @ x
    cov = symmetrize(F @ belief.cov @ F.T + Q)
    return Belief(mean, cov)


def joseph_update(mean_pre, cov_pre, h_mat, r_mat, innovation):
    """Measurement update in Joseph form, shared by all filters.

    Returns ``(mean_post, cov_post, gain)``. ``innovation`` is
    ``y - y_pred`` for the caller's own prediction, so nonlinear callers
    can reuse the kernel unchanged.
    """
    s = symmetrize(h_mat @ cov_pre @ h_mat.T + r_mat)
    # K = P- H^T S^{-1}, computed as a solve against S on the right.
    gain = spd_solve(s, h_mat @ cov_pre).T
    mean_post = mean_pre + gain @ innovation
    ikh = np.eye(cov_pre.shape[0]) - gain @ h_mat
    cov_post = symmetrize(ikh @ cov_pre @ ikh.T + gain @ r_mat @ gain.T)
    return mean_post, cov_post, gain


def kf_update(belief: Belief, system: LinearSystem, y: np.ndarray, t: int):
    """Measurement update. Returns (posterior, gain, innovation)."""
    _, _, H, _, R = system.matrices(t)
    y = np.asarray(y, dtype=np.float64).ravel()
    innovation = y - H @ belief.mean
    mean, cov, gain = joseph_update(belief.mean, belief.cov, H, R, innovation)
    return Belief(mean, cov), gain, innovation


def ekf_step(belief: Belief, f_st: DiffFn, f_ro: DiffFn, x, y, Q, R):
    """One predict+update cycle of the extended Kalman filter.

    ``f_st(h, x)`` is the state transition, ``f_ro(h)`` the readout; both
    are linearized at the usual points (posterior mean for the transition,
    predicted mean for the readout).

    Returns
    -------
    (posterior Belief, predicted output y_pred)
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    Q = np.asarray(Q, dtype=np.float64)
    R = np.asarray(R, dtype=np.float64)

    F = f_st.jacobian(0, belief.mean, x)
    mean_pre = f_st(belief.mean, x)
    cov_pre = symmetrize(F @ belief.cov @ F.T + Q)

    y_pred = f_ro(mean_pre)
    H = f_ro.jacobian(0, mean_pre)
    mean, cov, _ = joseph_update(mean_pre, cov_pre, H, R, y - y_pred)
    return Belief(mean, cov), y_pred


def run_kf(system: LinearSystem, belief: Belief, xs: np.ndarray, ys: np.ndarray):
    """Filter a whole sequence; convenience loop over predict/update.

    ``xs[t]`` drives the prediction of ``ys[t]``. Returns arrays of
    predicted outputs and posterior means, one row per step.
    """
    y_preds = []
    means = []
    for t in range(len(ys)):
        belief = kf_predict(belief, system, xs[t], t)
        H = _at(system.H, t)
        y_preds.append(H @ belief.mean)
        belief, _, _ = kf_update(belief, system, ys[t], t)
        means.append(belief.mean)
    return np.array(y_preds), np.array(means), belief
