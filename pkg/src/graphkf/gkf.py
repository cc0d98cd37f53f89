"""Kalman filtering over graph state-space models.

One filter cycle around a model's (encode, transition, readout) triple:

1. encode the input,
2. propagate the posterior mean through the transition (a-priori state),
3. read out the a-priori output prediction,
4. linearize the transition in the state and in the noise entry point,
5. linearize the readout likewise,
6. propagate covariance ``P- = F P+ F^T + L Q L^T``,
7. compute gain against innovation covariance ``H P- H^T + M R M^T``,
8. refine mean and covariance (Joseph form).

With ``refine=False`` only 1-3 run and the a-priori state feeds forward,
which is the open-loop baseline everything is measured against. Additive
models have unit noise Jacobians (``L``/``M`` identity) and take scalar
noise variances, in which case each covariance term is a plain ``q I``;
matrix-noise models contract their full Jacobian against the noise
covariance over the n-by-n matrix space.
"""

import csv
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import DimensionError, NumericalError
from .kalman import Belief, joseph_update
from .linalg import symmetrize
from .models import GssModel

__all__ = ["GkfConfig", "GkfTrace", "gkf_step", "gkf_run", "initial_belief"]

ScalarOrMatrix = Union[float, np.ndarray]


@dataclass
class GkfConfig:
    """Noise levels and prior for a filter run.

    ``state_noise`` is the covariance of the transition noise in the
    model's noise space: a scalar means ``q I``; a full matrix is accepted
    for small problems (for adjacency-noise models the space is n^2
    dimensional, so full matrices are refused above 8 nodes).
    ``readout_noise`` likewise on the output space. ``prior_cov`` defaults
    to ``state_noise * I`` for scalar state noise.
    """

    state_noise: ScalarOrMatrix
    readout_noise: ScalarOrMatrix
    prior_mean: Optional[np.ndarray] = None
    prior_cov: Optional[ScalarOrMatrix] = None

    @classmethod
    def for_generator(cls, gen_config) -> "GkfConfig":
        """Noise settings matching a synthetic generator config (known-variance setting)."""
        return cls(state_noise=gen_config.state_noise_std**2, readout_noise=gen_config.readout_noise_std**2)


def initial_belief(model: GssModel, cfg: GkfConfig) -> Belief:
    """Prior belief: zero mean (unless overridden), ``state_noise * I`` covariance."""
    dim = model.state_dim
    mean = np.zeros(dim) if cfg.prior_mean is None else np.asarray(cfg.prior_mean, dtype=np.float64)
    if cfg.prior_cov is None:
        if not np.isscalar(cfg.state_noise):
            raise DimensionError("prior_cov must be given explicitly when state_noise is a matrix")
        cov = float(cfg.state_noise) * np.eye(dim)
    elif np.isscalar(cfg.prior_cov):
        cov = float(cfg.prior_cov) * np.eye(dim)
    else:
        cov = np.asarray(cfg.prior_cov, dtype=np.float64)
    return Belief(mean, cov)


def _state_noise_cov(model: GssModel, cfg: GkfConfig, l_jac) -> np.ndarray:
    """Effective transition-noise covariance ``L Q L^T`` on the state space."""
    q = cfg.state_noise
    if l_jac is None:  # additive: L is the identity
        if np.isscalar(q):
            return float(q) * np.eye(model.state_dim)
        q = np.asarray(q, dtype=np.float64)
        if q.shape != (model.state_dim, model.state_dim):
            raise DimensionError(f"state_noise matrix shape {q.shape} != state dim {model.state_dim}")
        return q
    if np.isscalar(q):
        return float(q) * (l_jac @ l_jac.T)
    q = np.asarray(q, dtype=np.float64)
    if model.noise_mode == "adjacency" and model.n_nodes > 8:
        raise DimensionError("full-matrix state noise over the adjacency space is limited to 8 nodes")
    if q.shape != (model.noise_dim, model.noise_dim):
        raise DimensionError(f"state_noise matrix shape {q.shape} != noise dim {model.noise_dim}")
    return l_jac @ q @ l_jac.T


def _readout_noise_cov(model: GssModel, cfg: GkfConfig, m_jac) -> np.ndarray:
    """Effective readout-noise covariance ``M R M^T`` on the output space."""
    r = cfg.readout_noise
    if np.isscalar(r):
        r_mat = float(r) * np.eye(model.out_dim)
    else:
        r_mat = np.asarray(r, dtype=np.float64)
        if r_mat.shape != (model.out_dim, model.out_dim):
            raise DimensionError(f"readout_noise matrix shape {r_mat.shape} != output dim {model.out_dim}")
    if m_jac is None:  # additive readout noise
        return r_mat
    return m_jac @ r_mat @ m_jac.T


def gkf_step(model: GssModel, cfg: GkfConfig, belief: Belief, x, y, refine: bool = True):
    """One filter cycle. Returns ``(posterior Belief, record dict)``.

    ``x`` and ``y`` are the step's input and observed output as ``(n, d)``
    or flat arrays. The record carries the a-priori/a-posteriori states and
    output predictions plus the gain when refinement ran.
    """
    x_enc = model.encode_step(np.asarray(x, dtype=np.float64).reshape(model.n_nodes, model.d_x))
    s_pre = model.transition_flat(belief.mean, x_enc)
    y_pre = model.readout_flat(s_pre)
    if not (np.all(np.isfinite(s_pre)) and np.all(np.isfinite(y_pre))):
        raise NumericalError("gkf_step: non-finite prediction; transition is diverging")
    record = {"s_pre": s_pre, "y_pre": y_pre}
    if not refine:
        return Belief(s_pre, None), record

    f_jac = model.transition_jacobian(belief.mean, x_enc)
    l_jac = model.noise_jacobian(belief.mean, x_enc)
    h_jac = model.readout_jacobian(s_pre)
    m_jac = model.readout_noise_jacobian(s_pre)

    cov_pre = symmetrize(f_jac @ belief.cov @ f_jac.T + _state_noise_cov(model, cfg, l_jac))
    r_eff = _readout_noise_cov(model, cfg, m_jac)
    y_flat = np.asarray(y, dtype=np.float64).ravel()
    mean, cov, gain = joseph_update(s_pre, cov_pre, h_jac, r_eff, y_flat - y_pre)

    record.update(
        s_post=mean,
        y_post=model.readout_flat(mean),
        cov_pre=cov_pre,
        cov_post=cov,
        gain=gain,
        F=f_jac,
        H=h_jac,
    )
    return Belief(mean, cov), record


class GkfTrace:
    """Per-step arrays collected by :func:`gkf_run`.

    Always present: ``t`` (index of the predicted step within the given
    arrays), ``s_pre``, ``y_pre``, ``mse_pre``. Refined runs add
    ``s_post``, ``y_post``, ``mse_post``, covariance traces, minimum
    eigenvalues, and the gain's Frobenius norm. ``matrices`` holds full
    per-step (P-, P+, F, H, K) tuples when requested.
    """

    def __init__(self, refined: bool):
        self.refined = refined
        self.t = []
        self.s_pre, self.y_pre, self.mse_pre = [], [], []
        self.s_post, self.y_post, self.mse_post = [], [], []
        self.tr_p_pre, self.tr_p_post = [], []
        self.min_eig_pre, self.min_eig_post = [], []
        self.gain_fro = []
        self.matrices = []

    def finalize(self):
        for name in ("t", "s_pre", "y_pre", "mse_pre", "s_post", "y_post", "mse_post",
                     "tr_p_pre", "tr_p_post", "min_eig_pre", "min_eig_post", "gain_fro"):
            setattr(self, name, np.array(getattr(self, name)))
        return self

    @property
    def mse(self) -> float:
        """Mean a-priori prediction error over all steps and output scalars."""
        return float(np.mean(self.mse_pre))

    @property
    def mse_refined(self) -> float:
        if not self.refined:
            raise DimensionError("trace has no refined predictions (run had refine=False)")
        return float(np.mean(self.mse_post))

    def to_csv(self, path) -> None:
        """One row per step: t, mse_pre, mse_post, tr_p_pre, tr_p_post, gain_fro."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "mse_pre", "mse_post", "tr_p_pre", "tr_p_post", "gain_fro"])
            for i in range(len(self.t)):
                if self.refined:
                    row = [self.t[i], self.mse_pre[i], self.mse_post[i],
                           self.tr_p_pre[i], self.tr_p_post[i], self.gain_fro[i]]
                else:
                    row = [self.t[i], self.mse_pre[i], float("nan"), float("nan"), float("nan"), float("nan")]
                writer.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])


def gkf_run(model: GssModel, cfg: GkfConfig, inputs, outputs=None, refine: bool = True,
            compute_health: bool = True, keep_matrices: bool = False) -> GkfTrace:
    """Filter a sequence start to end from the prior belief.

    ``inputs``/``outputs`` are ``(T, n)`` or ``(T, n, d)`` arrays (an
    episode-like object with those attributes also works). Step ``t``
    consumes ``inputs[t-1]`` and predicts ``outputs[t]``, so the trace has
    ``T - 1`` rows. With ``refine=False`` the a-priori state feeds forward
    unrefined (open loop).
    """
    if outputs is None:  # episode-like object
        outputs = inputs.outputs
        inputs = inputs.inputs
    inputs = np.asarray(inputs, dtype=np.float64)
    outputs = np.asarray(outputs, dtype=np.float64)
    if inputs.shape[0] != outputs.shape[0]:
        raise DimensionError(f"inputs length {inputs.shape[0]} != outputs length {outputs.shape[0]}")

    belief = initial_belief(model, cfg)
    trace = GkfTrace(refined=refine)
    for t in range(1, inputs.shape[0]):
        belief, rec = gkf_step(model, cfg, belief, inputs[t - 1], outputs[t], refine=refine)
        y_obs = outputs[t].ravel()
        trace.t.append(t)
        trace.s_pre.append(rec["s_pre"])
        trace.y_pre.append(rec["y_pre"])
        trace.mse_pre.append(float(np.mean((rec["y_pre"] - y_obs) ** 2)))
        if refine:
            trace.s_post.append(rec["s_post"])
            trace.y_post.append(rec["y_post"])
            trace.mse_post.append(float(np.mean((rec["y_post"] - y_obs) ** 2)))
            trace.tr_p_pre.append(float(np.trace(rec["cov_pre"])))
            trace.tr_p_post.append(float(np.trace(rec["cov_post"])))
            trace.gain_fro.append(float(np.linalg.norm(rec["gain"])))
            if compute_health:
                trace.min_eig_pre.append(float(np.linalg.eigvalsh(rec["cov_pre"])[0]))
                trace.min_eig_post.append(float(np.linalg.eigvalsh(rec["cov_post"])[0]))
            if keep_matrices:
                trace.matrices.append(
                    {"P_pre": rec["cov_pre"], "P_post": rec["cov_post"], "F": rec["F"], "H": rec["H"], "K": rec["gain"]}
                )
    return trace.finalize()
