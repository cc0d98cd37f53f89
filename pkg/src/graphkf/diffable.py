"""Differentiable-function bundles, a finite-difference oracle, and Adam.

Analytic Jacobians are the product here; the finite-difference routine is
the independent check that arbitrates them in tests. Training gradients are
hand-written reverse-mode passes inside the models; the optimizer below
consumes whatever flat gradient vector they produce.
"""

import numpy as np

from .errors import DimensionError, NumericalError

__all__ = ["DiffFn", "fd_jacobian", "AdamState", "adam_step"]


class DiffFn:
    """A vector function bundled with analytic Jacobians per input slot.

    Parameters
    ----------
    fn : callable
        ``fn(*inputs) -> ndarray``. Inputs are 1-d vectors.
    jacobians : sequence of callables or None
        ``jacobians[k](*inputs)`` returns the Jacobian of ``fn`` with
        respect to input slot ``k`` as an (out_dim, in_dim_k) matrix. A
        ``None`` entry means the slot is not differentiated.
    param_grad : callable, optional
        ``param_grad(cotangent, *inputs) -> ndarray`` — gradient of
        ``cotangent @ fn(*inputs)`` with respect to internal parameters,
        for bundles that carry trainable state.
    """

    def __init__(self, fn, jacobians, param_grad=None):
        self.fn = fn
        self.jacobians = tuple(jacobians)
        self.param_grad = param_grad

    def __call__(self, *inputs) -> np.ndarray:
        return np.asarray(self.fn(*inputs), dtype=np.float64)

    def jacobian(self, slot: int, *inputs) -> np.ndarray:
        jac = self.jacobians[slot]
        if jac is None:
            raise DimensionError(f"DiffFn: no jacobian registered for slot {slot}")
        return np.asarray(jac(*inputs), dtype=np.float64)


def fd_jacobian(fn, slot: int, inputs, rel_step: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian of ``fn`` w.r.t. input slot ``slot``.

    Step per coordinate is ``rel_step * max(1, |x_i|)``, which keeps the
    truncation/rounding trade-off sane across magnitudes. Intended as an
    oracle for analytic Jacobians, not for production use.

    Parameters
    ----------
    fn : callable or DiffFn
    slot : int
        Which positional input to differentiate.
    inputs : sequence of 1-d ndarrays
        The evaluation point.

    Returns
    -------
    (out_dim, in_dim) ndarray
    """
    call = fn.fn if isinstance(fn, DiffFn) else fn
    inputs = [np.asarray(v, dtype=np.float64) for v in inputs]
    x = inputs[slot]
    if x.ndim != 1:
        raise DimensionError(f"fd_jacobian: slot {slot} must be a 1-d vector, got shape {x.shape}")
    base = np.asarray(call(*inputs), dtype=np.float64)
    if not np.all(np.isfinite(base)):
        raise NumericalError("fd_jacobian: function is non-finite at the evaluation point")
    jac = np.empty((base.size, x.size))
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        bumped = list(inputs)
        xp = x.copy()
        xp[i] += h
        bumped[slot] = xp
        fp = np.asarray(call(*bumped), dtype=np.float64).ravel()
        xm = x.copy()
        xm[i] -= h
        bumped[slot] = xm
        fm = np.asarray(call(*bumped), dtype=np.float64).ravel()
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise NumericalError(f"fd_jacobian: non-finite value while perturbing coordinate {i}")
        jac[:, i] = (fp - fm) / (2.0 * h)
    return jac


class AdamState:
    """First/second moment accumulators for Adam.

    Defaults follow the training recipe used throughout the experiments:
    lr 0.01, beta1 0.9, beta2 0.999, eps 1e-8.
    """

    def __init__(self, n_params: int, lr: float = 0.01, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.step = 0
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Advance one Adam step and return the updated parameter vector.

    Mutates ``state`` in place (single-owner); ``params`` is not modified.
    """
    params = np.asarray(params, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if params.shape != grad.shape or params.shape != state.m.shape:
        raise DimensionError(
            f"adam_step: shape mismatch params {params.shape}, grad {grad.shape}, state {state.m.shape}"
        )
    if not np.all(np.isfinite(grad)):
        raise NumericalError("adam_step: gradient has non-finite entries")
    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = state.m / (1.0 - state.beta1**state.step)
    v_hat = state.v / (1.0 - state.beta2**state.step)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
