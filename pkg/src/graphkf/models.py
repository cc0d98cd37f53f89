"""Graph state-space model families.

A model factors into three node-wise maps tied together by a graph:

* an input encoder ``x -> x_enc``,
* a state transition ``s_t = f(s_{t-1}, x_enc_{t-1})`` that mixes node
  states over the topology,
* a readout ``y_t = g(s_t)``.

Per-step signals are ``(n_nodes, d)`` arrays; every forward routine also
accepts a leading batch axis. The filters see flat vectors in node-major
order (node index major, feature minor), produced by ``ravel()`` on the
``(n, d)`` layout.

Two noise-entry modes exist. ``additive`` models receive state noise
directly on the state signal (noise space = state space, unit Jacobian).
``adjacency`` models receive it as a perturbation matrix added to the
adjacency; their noise space is the n*n matrix space and the noise
Jacobian is a genuine 3-tensor (see ``alpha_jacobian``).

Every Jacobian here is hand-derived; ``diffable.fd_jacobian`` is the
independent oracle that checks them in the test suite. The ``*_fwd`` /
``*_bwd`` pairs are the reverse-mode primitives the training loop chains
through an unrolled window.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, UnsupportedNoiseModeError
from .graphs import GraphTopology
from .rng import STREAM_PARAMS, stream_rng

__all__ = [
    "ACTIVATIONS",
    "ACTIVATION_SECONDS",
    "ReplicaParams",
    "ReplicaModel",
    "StgnnModel",
    "AdjacencyNoiseModel",
    "alpha_jacobian",
    "as_transition_difffn",
    "as_readout_difffn",
]

# name -> (fn, derivative expressed through the output value)
ACTIVATIONS = {
    "identity": (lambda z: z, lambda out: np.ones_like(out)),
    "tanh": (np.tanh, lambda out: 1.0 - out * out),
}

# second derivative through (output, first derivative); tanh'' = -2 tanh tanh'
ACTIVATION_SECONDS = {
    "identity": lambda out, d1: np.zeros_like(out),
    "tanh": lambda out, d1: -2.0 * out * d1,
}


def _activation(name: str):
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise DimensionError(f"unknown activation {name!r}; expected one of {sorted(ACTIVATIONS)}") from None


class GssModel:
    """Shared plumbing for model families: dims, flat adapters, parameters."""

    noise_mode = "additive"
    # families that expose batched filter jacobians can train on
    # observation-anchored windows (see training module)
    supports_filtered_windows = False

    def __init__(self, topology: GraphTopology, d_x: int, d_h: int, d_y: int):
        self.topology = topology
        self.d_x = d_x
        self.d_h = d_h
        self.d_y = d_y

    @property
    def n_nodes(self) -> int:
        return self.topology.n_nodes

    @property
    def state_dim(self) -> int:
        return self.n_nodes * self.d_h

    @property
    def out_dim(self) -> int:
        return self.n_nodes * self.d_y

    @property
    def noise_dim(self) -> int:
        if self.noise_mode == "additive":
            return self.state_dim
        return self.n_nodes * self.n_nodes

    # -- pure forwards (batched over leading axes) --------------------------

    def encode(self, x):
        out, _ = self.encode_fwd(np.asarray(x, dtype=np.float64))
        return out

    def transition(self, s, x_enc):
        out, _ = self.transition_fwd(np.asarray(s, dtype=np.float64), np.asarray(x_enc, dtype=np.float64))
        return out

    def readout(self, s):
        out, _ = self.readout_fwd(np.asarray(s, dtype=np.float64))
        return out

    # -- flat adapters for the filters --------------------------------------

    def _nodes(self, flat, d):
        return np.asarray(flat, dtype=np.float64).reshape(self.n_nodes, d)

    def encode_step(self, x):
        """Encode one step's input (n, d_x) -> flat (n*d_h,)."""
        return self.encode(np.asarray(x, dtype=np.float64).reshape(self.n_nodes, self.d_x)).ravel()

    def transition_flat(self, s_flat, x_enc_flat):
        return self.transition(self._nodes(s_flat, self.d_h), self._nodes(x_enc_flat, self.d_h)).ravel()

    def readout_flat(self, s_flat):
        return self.readout(self._nodes(s_flat, self.d_h)).ravel()

    def readout_noise_jacobian(self, s_flat):
        """Jacobian of the readout w.r.t. its additive noise: identity."""
        return None  # None means identity; all families use additive readout noise

    def noise_jacobian(self, s_flat, x_enc_flat):
        """Flat state-noise Jacobian (state_dim, noise_dim); None means identity."""
        if self.noise_mode == "additive":
            return None
        raise NotImplementedError

    # -- parameter plumbing --------------------------------------------------

    def get_param_vector(self) -> np.ndarray:
        raise NotImplementedError

    def set_param_vector(self, vec) -> None:
        raise NotImplementedError

    @property
    def n_params(self) -> int:
        return self.get_param_vector().size

    def zero_grads(self) -> dict:
        raise NotImplementedError

    def flatten_grads(self, grads: dict) -> np.ndarray:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# Replica family


@dataclass
class ReplicaParams:
    """Four-parameter mirror of the synthetic generator.

    ``time_weight`` scales a node's own previous signal, ``space_weight``
    the symmetric-normalized neighborhood average; the readout is the
    affine map ``readout_bias + readout_scale * s`` passed through its
    activation.
    """

    time_weight: float
    space_weight: float
    readout_bias: float
    readout_scale: float
    state_activation: str = "identity"
    readout_activation: str = "identity"


class ReplicaModel(GssModel):
    """Structural replica of the synthetic process, with exactly 4 trainables.

    Transition: ``s' = act_st((time_weight I + space_weight A_sym)(s + x))``
    with ``A_sym`` the symmetric self-loop normalization of the topology.
    The encoder is the identity (d_x = d_h = 1).
    """

    noise_mode = "additive"

    def __init__(self, topology: GraphTopology, params: ReplicaParams):
        super().__init__(topology, d_x=1, d_h=1, d_y=1)
        # own copy: set_param_vector mutates in place and must not reach
        # a params object the caller shares with other models
        self.params = ReplicaParams(**vars(params))
        self._act_st, self._dact_st = _activation(params.state_activation)
        self._act_ro, self._dact_ro = _activation(params.readout_activation)
        self._d2act_st = ACTIVATION_SECONDS[params.state_activation]
        self._d2act_ro = ACTIVATION_SECONDS[params.readout_activation]

    @classmethod
    def random_init(
        cls, topology: GraphTopology, seed: int, state_activation="identity", readout_activation="identity", scale=0.5
    ) -> "ReplicaModel":
        """Fresh model with the 4 parameters drawn U(-scale, scale).

        The readout scale is folded to positive. Its sign only fixes the
        orientation of the latent state, and gradient training cannot cross
        the zero-gain ridge between the two orientations (the output carries
        no state information there), so a draw on the wrong side would lock
        the run into a mirrored local minimum.
        """
        rng = stream_rng(seed, STREAM_PARAMS)
        tw, sw, rb, rs = rng.uniform(-scale, scale, size=4)
        return cls(topology, ReplicaParams(tw, sw, rb, abs(rs), state_activation, readout_activation))

    def copy(self) -> "ReplicaModel":
        return ReplicaModel(self.topology, ReplicaParams(**vars(self.params)))

    def _mix(self) -> np.ndarray:
        p = self.params
        return p.time_weight * np.eye(self.n_nodes) + p.space_weight * self.topology.normalized_sym

    # forward/backward primitives ------------------------------------------

    def encode_fwd(self, x):
        return x, None

    def encode_bwd(self, cache, d_x_enc, grads):
        pass  # identity encoder, no parameters

    def transition_fwd(self, s, x_enc):
        u = s + x_enc
        z = np.einsum("ij,...jd->...id", self._mix(), u)
        out = self._act_st(z)
        return out, (u, self._dact_st(out))

    def transition_bwd(self, cache, d_out, grads):
        u, dact = cache
        dz = d_out * dact
        grads["transition.time_weight"] += np.sum(dz * u)
        a_u = np.einsum("ij,...jd->...id", self.topology.normalized_sym, u)
        grads["transition.space_weight"] += np.sum(dz * a_u)
        du = np.einsum("ji,...jd->...id", self._mix(), dz)
        return du, du

    def readout_fwd(self, s):
        w = self.params.readout_bias + self.params.readout_scale * s
        out = self._act_ro(w)
        return out, (s, self._dact_ro(out))

    def readout_bwd(self, cache, d_out, grads):
        s, dact = cache
        dw = d_out * dact
        grads["readout.bias"] += np.sum(dw)
        grads["readout.scale"] += np.sum(dw * s)
        return dw * self.params.readout_scale

    # filter-time jacobians ---------------------------------------------------

    def transition_jacobian(self, s_flat, x_enc_flat):
        u = np.asarray(s_flat, dtype=np.float64) + np.asarray(x_enc_flat, dtype=np.float64)
        mix = self._mix()
        out = self._act_st(mix @ u)
        return self._dact_st(out)[:, None] * mix

    def readout_jacobian(self, s_flat):
        s = np.asarray(s_flat, dtype=np.float64)
        out = self._act_ro(self.params.readout_bias + self.params.readout_scale * s)
        return np.diag(self._dact_ro(out) * self.params.readout_scale)

    supports_filtered_windows = True

    def transition_jacobian_batch(self, cache):
        """State jacobians for a batched transition_fwd cache: (B, n, n)."""
        _, dact = cache
        return dact[..., 0][:, :, None] * self._mix()[None]

    def readout_jacobian_diag_batch(self, cache):
        """Diagonal readout jacobian entries for a batched readout_fwd cache: (B, n)."""
        _, dact = cache
        return dact[..., 0] * self.params.readout_scale

    # parameters --------------------------------------------------------------

    _PARAM_KEYS = ("transition.time_weight", "transition.space_weight", "readout.bias", "readout.scale")

    def get_param_vector(self):
        p = self.params
        return np.array([p.time_weight, p.space_weight, p.readout_bias, p.readout_scale])

    def set_param_vector(self, vec):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (4,):
            raise DimensionError(f"ReplicaModel expects 4 parameters, got shape {vec.shape}")
        p = self.params
        p.time_weight, p.space_weight, p.readout_bias, p.readout_scale = (float(v) for v in vec)

    def zero_grads(self):
        return {k: 0.0 for k in self._PARAM_KEYS}

    def flatten_grads(self, grads):
        return np.array([grads[k] for k in self._PARAM_KEYS])


# ---------------------------------------------------------------------------
# Message-passing family


class _Mlp:
    """Node-wise two-layer dense block: ``relu(x W1 + b1) W2 + b2``."""

    def __init__(self, d_in, d_hidden, d_out, rng):
        self.W1 = _uniform_fan_in(rng, d_in, (d_in, d_hidden))
        self.b1 = _uniform_fan_in(rng, d_in, d_hidden)
        self.W2 = _uniform_fan_in(rng, d_hidden, (d_hidden, d_out))
        self.b2 = _uniform_fan_in(rng, d_hidden, d_out)

    def fwd(self, x):
        pre = x @ self.W1 + self.b1
        hidden = np.maximum(pre, 0.0)
        return hidden @ self.W2 + self.b2, (x, pre > 0, hidden)

    def bwd(self, cache, d_out, grads, prefix):
        x, mask, hidden = cache
        d_flat = d_out.reshape(-1, d_out.shape[-1])
        grads[prefix + ".W2"] += hidden.reshape(-1, hidden.shape[-1]).T @ d_flat
        grads[prefix + ".b2"] += d_flat.sum(axis=0)
        d_hidden = (d_out @ self.W2.T) * mask
        dh_flat = d_hidden.reshape(-1, d_hidden.shape[-1])
        grads[prefix + ".W1"] += x.reshape(-1, x.shape[-1]).T @ dh_flat
        grads[prefix + ".b1"] += dh_flat.sum(axis=0)
        return d_hidden @ self.W1.T

    def jacobian_nodes(self, x):
        """Per-node (d_out, d_in) Jacobians for a (n, d_in) input."""
        mask = (x @ self.W1 + self.b1) > 0
        return np.einsum("kf,vk,gk->vfg", self.W2, mask.astype(np.float64), self.W1)

    def param_arrays(self, prefix):
        return [
            (prefix + ".W1", self.W1),
            (prefix + ".b1", self.b1),
            (prefix + ".W2", self.W2),
            (prefix + ".b2", self.b2),
        ]


def _uniform_fan_in(rng, fan_in, shape):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class StgnnModel(GssModel):
    """Spatio-temporal message-passing model with dense node-wise blocks.

    Transition::

        u  = s + encode(x)
        z  = gamma(u)                       # node-wise 2-layer dense
        s' = u + tanh(z W_self + A_row z W_neigh)

    ``A_row`` is the row-normalized adjacency, so the neighbor term is an
    average of neighbor messages. Encoder and readout are node-wise
    two-layer dense blocks; all hidden widths default to 7.
    """

    noise_mode = "additive"

    def __init__(self, topology: GraphTopology, seed: int = 0, d_x: int = 1, d_h: int = 7, d_y: int = 1, hidden: int = 7):
        super().__init__(topology, d_x=d_x, d_h=d_h, d_y=d_y)
        self.hidden = hidden
        self._init_seed = seed
        rng = stream_rng(seed, STREAM_PARAMS)
        self.encoder = _Mlp(d_x, hidden, d_h, rng)
        self.gamma = _Mlp(d_h, hidden, d_h, rng)
        self.W_self = _uniform_fan_in(rng, d_h, (d_h, d_h))
        self.W_neigh = _uniform_fan_in(rng, d_h, (d_h, d_h))
        self.readout_mlp = _Mlp(d_h, hidden, d_y, rng)

    def copy(self) -> "StgnnModel":
        clone = StgnnModel(self.topology, self._init_seed, self.d_x, self.d_h, self.d_y, self.hidden)
        clone.set_param_vector(self.get_param_vector())
        return clone

    # forward/backward primitives ------------------------------------------

    def encode_fwd(self, x):
        return self.encoder.fwd(x)

    def encode_bwd(self, cache, d_x_enc, grads):
        self.encoder.bwd(cache, d_x_enc, grads, "encoder")

    def transition_fwd(self, s, x_enc):
        a_row = self.topology.normalized_row
        u = s + x_enc
        z, cache_g = self.gamma.fwd(u)
        az = np.einsum("ij,...jd->...id", a_row, z)
        msg = np.tanh(z @ self.W_self + az @ self.W_neigh)
        return u + msg, (cache_g, z, az, msg)

    def transition_bwd(self, cache, d_out, grads):
        a_row = self.topology.normalized_row
        cache_g, z, az, msg = cache
        d_msg = d_out * (1.0 - msg * msg)
        dm_flat = d_msg.reshape(-1, self.d_h)
        grads["mix.W_self"] += z.reshape(-1, self.d_h).T @ dm_flat
        grads["mix.W_neigh"] += az.reshape(-1, self.d_h).T @ dm_flat
        dz = d_msg @ self.W_self.T + np.einsum("ji,...jd->...id", a_row, d_msg @ self.W_neigh.T)
        du = d_out + self.gamma.bwd(cache_g, dz, grads, "gamma")
        return du, du

    def readout_fwd(self, s):
        return self.readout_mlp.fwd(s)

    def readout_bwd(self, cache, d_out, grads):
        return self.readout_mlp.bwd(cache, d_out, grads, "readout")

    # filter-time jacobians ---------------------------------------------------

    def transition_jacobian(self, s_flat, x_enc_flat):
        n, d = self.n_nodes, self.d_h
        u = self._nodes(s_flat, d) + self._nodes(x_enc_flat, d)
        z, _ = self.gamma.fwd(u)
        az = self.topology.normalized_row @ z
        msg = np.tanh(z @ self.W_self + az @ self.W_neigh)

        j_gamma = self.gamma.jacobian_nodes(u)  # (n, d, d)
        block = np.zeros((n * d, n * d))
        for v in range(n):
            block[v * d : (v + 1) * d, v * d : (v + 1) * d] = j_gamma[v]
        j_msg = np.kron(np.eye(n), self.W_self.T) + np.kron(self.topology.normalized_row, self.W_neigh.T)
        d_tanh = (1.0 - msg * msg).ravel()
        return np.eye(n * d) + (d_tanh[:, None] * j_msg) @ block

    def readout_jacobian(self, s_flat):
        n, d, dy = self.n_nodes, self.d_h, self.d_y
        jac_nodes = self.readout_mlp.jacobian_nodes(self._nodes(s_flat, d))
        out = np.zeros((n * dy, n * d))
        for v in range(n):
            out[v * dy : (v + 1) * dy, v * d : (v + 1) * d] = jac_nodes[v]
        return out

    # parameters --------------------------------------------------------------

    def _param_arrays(self):
        return (
            self.encoder.param_arrays("encoder")
            + self.gamma.param_arrays("gamma")
            + [("mix.W_self", self.W_self), ("mix.W_neigh", self.W_neigh)]
            + self.readout_mlp.param_arrays("readout")
        )

    def get_param_vector(self):
        return np.concatenate([arr.ravel() for _, arr in self._param_arrays()])

    def set_param_vector(self, vec):
        vec = np.asarray(vec, dtype=np.float64)
        arrays = self._param_arrays()
        total = sum(arr.size for _, arr in arrays)
        if vec.shape != (total,):
            raise DimensionError(f"StgnnModel expects {total} parameters, got shape {vec.shape}")
        offset = 0
        for _, arr in arrays:
            arr[...] = vec[offset : offset + arr.size].reshape(arr.shape)
            offset += arr.size

    def zero_grads(self):
        return {name: np.zeros_like(arr) for name, arr in self._param_arrays()}

    def flatten_grads(self, grads):
        return np.concatenate([grads[name].ravel() for name, _ in self._param_arrays()])


# ---------------------------------------------------------------------------
# Adjacency-noise test model


class AdjacencyNoiseModel(GssModel):
    """Linear model whose state noise perturbs the (raw) adjacency matrix.

    Transition with noise: ``f(s, x, alpha) = (tw I + sw (A + alpha))(s + x)``.
    Exists to exercise the matrix-noise route of the graph filter: its noise
    Jacobian is the true 3-tensor ``L[v, i, j] = sw * delta_{vi} (s + x)_j``.
    """

    noise_mode = "adjacency"

    def __init__(self, topology: GraphTopology, time_weight: float, space_weight: float,
                 readout_bias: float = 0.0, readout_scale: float = 1.0):
        super().__init__(topology, d_x=1, d_h=1, d_y=1)
        self.time_weight = float(time_weight)
        self.space_weight = float(space_weight)
        self.readout_bias = float(readout_bias)
        self.readout_scale = float(readout_scale)

    def _mix(self):
        return self.time_weight * np.eye(self.n_nodes) + self.space_weight * self.topology.adjacency

    def encode_fwd(self, x):
        return x, None

    def transition_fwd(self, s, x_enc):
        u = s + x_enc
        return np.einsum("ij,...jd->...id", self._mix(), u), u

    def readout_fwd(self, s):
        return self.readout_bias + self.readout_scale * s, s

    def transition_with_noise(self, s_flat, x_enc_flat, alpha):
        """Evaluate the transition at a concrete noise matrix ``alpha``."""
        u = np.asarray(s_flat, dtype=np.float64) + np.asarray(x_enc_flat, dtype=np.float64)
        mix = self._mix() + self.space_weight * np.asarray(alpha, dtype=np.float64)
        return mix @ u

    def transition_jacobian(self, s_flat, x_enc_flat):
        return self._mix()

    def readout_jacobian(self, s_flat):
        return self.readout_scale * np.eye(self.n_nodes)

    def alpha_jacobian_tensor(self, s_flat, x_enc_flat):
        n = self.n_nodes
        u = np.asarray(s_flat, dtype=np.float64) + np.asarray(x_enc_flat, dtype=np.float64)
        tensor = np.zeros((n, n, n))
        for v in range(n):
            tensor[v, v, :] = self.space_weight * u
        return tensor

    def noise_jacobian(self, s_flat, x_enc_flat):
        return self.alpha_jacobian_tensor(s_flat, x_enc_flat).reshape(self.n_nodes, -1)


def alpha_jacobian(model: GssModel, s_flat, x_enc_flat) -> np.ndarray:
    """State-noise Jacobian as a (state_dim, n, n) tensor over the matrix noise space.

    For adjacency-noise models this is the analytic tensor. For additive
    scalar-state models (d_h = 1) the additive noise vector embeds on the
    diagonal of the matrix space: ``L[v, i, j] = delta_{vi} delta_{ij}``.
    Multi-feature additive states have no n-by-n matrix embedding; asking
    for one is an error.
    """
    if model.noise_mode == "adjacency":
        return model.alpha_jacobian_tensor(s_flat, x_enc_flat)
    if model.noise_mode == "additive" and model.d_h == 1:
        n = model.n_nodes
        tensor = np.zeros((n, n, n))
        idx = np.arange(n)
        tensor[idx, idx, idx] = 1.0
        return tensor
    raise UnsupportedNoiseModeError(
        f"no matrix-noise view for noise_mode={model.noise_mode!r} with d_h={model.d_h}"
    )


def as_transition_difffn(model: GssModel):
    """Wrap a model's flat transition as a DiffFn of (state, encoded input)."""
    from .diffable import DiffFn

    return DiffFn(
        fn=lambda s, xe: model.transition_flat(s, xe),
        jacobians=(lambda s, xe: model.transition_jacobian(s, xe), None),
    )


def as_readout_difffn(model: GssModel):
    """Wrap a model's flat readout as a DiffFn of the state."""
    from .diffable import DiffFn

    return DiffFn(
        fn=lambda s: model.readout_flat(s),
        jacobians=(lambda s: model.readout_jacobian(s),),
    )
