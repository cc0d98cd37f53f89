import numpy as np
import pytest

from graphkf.diffable import fd_jacobian
from graphkf.errors import DimensionError, UnsupportedNoiseModeError
from graphkf.graphs import GraphTopology
from graphkf.models import (
    ACTIVATION_SECONDS,
    ACTIVATIONS,
    AdjacencyNoiseModel,
    ReplicaModel,
    ReplicaParams,
    StgnnModel,
    alpha_jacobian,
    as_transition_difffn,
)

TOP5 = GraphTopology.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)])

LIN = ReplicaParams(0.6, 0.3, -0.5, 2.0)
NONLIN = ReplicaParams(0.6, -0.3, -2.0, 5.0, "tanh", "tanh")


def test_activation_pairs_consistent():
    for name, (act, dact) in ACTIVATIONS.items():
        x = np.linspace(-2, 2, 9)
        out = act(x)
        # derivative-from-output convention checked against FD of act
        fd = fd_jacobian(lambda v: act(v), 0, [x])
        assert np.allclose(dact(out), np.diag(fd), atol=1e-8), name


def test_activation_second_derivatives():
    x = np.linspace(-1.5, 1.5, 7)
    for name in ACTIVATIONS:
        act, dact = ACTIVATIONS[name]
        d2 = ACTIVATION_SECONDS[name]
        # FD of the first derivative, which is itself a function of x
        fd = fd_jacobian(lambda v: dact(act(v)), 0, [x])
        out = act(x)
        assert np.allclose(d2(out, dact(out)), np.diag(fd), atol=1e-7), name


@pytest.mark.parametrize("params", [LIN, NONLIN], ids=["identity", "tanh"])
def test_replica_jacobians_match_fd(params):
    model = ReplicaModel(TOP5, params)
    rng = np.random.default_rng(2)
    s = rng.normal(size=5)
    x = rng.normal(size=5)
    jac = model.transition_jacobian(s, x)
    fd = fd_jacobian(lambda v: model.transition_flat(v, x), 0, [s])
    assert np.allclose(jac, fd, atol=1e-6)
    jac_ro = model.readout_jacobian(s)
    fd_ro = fd_jacobian(lambda v: model.readout_flat(v), 0, [s])
    assert np.allclose(jac_ro, fd_ro, atol=1e-6)


@pytest.mark.parametrize("params", [LIN, NONLIN], ids=["identity", "tanh"])
def test_replica_batch_jacobians_match_flat(params):
    model = ReplicaModel(TOP5, params)
    rng = np.random.default_rng(4)
    s = rng.normal(size=(3, 5, 1))
    x = rng.normal(size=(3, 5, 1))
    _, c_tr = model.transition_fwd(s, x)
    batch = model.transition_jacobian_batch(c_tr)
    for b in range(3):
        assert np.allclose(batch[b], model.transition_jacobian(s[b, :, 0], x[b, :, 0]), atol=1e-12)
    s_pre, _ = model.transition_fwd(s, x)
    _, c_ro = model.readout_fwd(s_pre)
    diag = model.readout_jacobian_diag_batch(c_ro)
    for b in range(3):
        assert np.allclose(np.diag(diag[b]), model.readout_jacobian(s_pre[b, :, 0]), atol=1e-12)


def test_replica_backward_is_jacobian_transpose():
    model = ReplicaModel(TOP5, NONLIN)
    rng = np.random.default_rng(9)
    s = rng.normal(size=(1, 5, 1))
    x = rng.normal(size=(1, 5, 1))
    _, cache = model.transition_fwd(s, x)
    d_out = rng.normal(size=(1, 5, 1))
    grads = model.zero_grads()
    ds, dx = model.transition_bwd(cache, d_out, grads)
    jac = model.transition_jacobian(s[0, :, 0], x[0, :, 0])
    assert np.allclose(ds[0, :, 0], jac.T @ d_out[0, :, 0], atol=1e-12)
    assert np.array_equal(ds, dx)  # transition sees s and x only through s + x


def test_replica_param_vector_round_trip_and_validation():
    model = ReplicaModel(TOP5, LIN)
    vec = model.get_param_vector()
    assert np.allclose(vec, [0.6, 0.3, -0.5, 2.0])
    model.set_param_vector([1.0, 2.0, 3.0, 4.0])
    assert np.allclose(model.get_param_vector(), [1, 2, 3, 4])
    with pytest.raises(DimensionError):
        model.set_param_vector(np.zeros(5))
    assert model.n_params == 4


def test_replica_random_init_reproducible_and_scale_positive():
    a = ReplicaModel.random_init(TOP5, seed=3)
    b = ReplicaModel.random_init(TOP5, seed=3)
    assert np.array_equal(a.get_param_vector(), b.get_param_vector())
    for seed in range(20):
        m = ReplicaModel.random_init(TOP5, seed=seed)
        assert m.params.readout_scale > 0
    assert not np.allclose(
        ReplicaModel.random_init(TOP5, seed=0).get_param_vector(),
        ReplicaModel.random_init(TOP5, seed=1).get_param_vector(),
    )


def test_replica_copy_is_independent():
    model = ReplicaModel(TOP5, LIN)
    clone = model.copy()
    clone.set_param_vector([9, 9, 9, 9])
    assert np.allclose(model.get_param_vector(), [0.6, 0.3, -0.5, 2.0])


def test_replica_permutation_equivariance():
    rng = np.random.default_rng(12)
    perm = rng.permutation(5)
    p_mat = np.eye(5)[perm]
    adj_p = p_mat @ TOP5.adjacency @ p_mat.T
    model = ReplicaModel(TOP5, NONLIN)
    model_p = ReplicaModel(GraphTopology(adj_p), NONLIN)
    s = rng.normal(size=5)
    x = rng.normal(size=5)
    out = model.transition_flat(s, x)
    out_p = model_p.transition_flat(s[perm], x[perm])
    assert np.allclose(out_p, out[perm], atol=1e-12)


def test_stgnn_jacobians_match_fd():
    model = StgnnModel(TOP5, seed=1, d_h=3, hidden=4)
    rng = np.random.default_rng(6)
    s = rng.normal(size=15) * 0.5
    x_enc = rng.normal(size=15) * 0.5
    jac = model.transition_jacobian(s, x_enc)
    fd = fd_jacobian(lambda v: model.transition_flat(v, x_enc), 0, [s])
    assert np.abs(jac - fd).max() < 1e-4
    jac_ro = model.readout_jacobian(s)
    fd_ro = fd_jacobian(lambda v: model.readout_flat(v), 0, [s])
    assert np.abs(jac_ro - fd_ro).max() < 1e-4


def test_stgnn_param_vector_round_trip():
    model = StgnnModel(TOP5, seed=0)
    vec = model.get_param_vector()
    clone = model.copy()
    assert np.array_equal(clone.get_param_vector(), vec)
    bumped = vec + 0.01
    model.set_param_vector(bumped)
    assert np.allclose(model.get_param_vector(), bumped)
    with pytest.raises(DimensionError):
        model.set_param_vector(vec[:-1])


def test_stgnn_shapes_and_dims():
    model = StgnnModel(TOP5, seed=0)
    assert (model.d_x, model.d_h, model.d_y) == (1, 7, 1)
    assert model.state_dim == 35 and model.out_dim == 5
    x = np.zeros((2, 5, 1))
    enc, _ = model.encode_fwd(x)
    assert enc.shape == (2, 5, 7)
    s, _ = model.transition_fwd(np.zeros((2, 5, 7)), enc)
    assert s.shape == (2, 5, 7)
    y, _ = model.readout_fwd(s)
    assert y.shape == (2, 5, 1)


def test_adjacency_noise_jacobian_matches_fd():
    model = AdjacencyNoiseModel(TOP5, 0.5, 0.2)
    rng = np.random.default_rng(8)
    s = rng.normal(size=5)
    x = rng.normal(size=5)
    tensor = model.alpha_jacobian_tensor(s, x)
    flat = model.noise_jacobian(s, x)
    assert np.array_equal(tensor.reshape(5, 25), flat)
    fd = fd_jacobian(lambda a: model.transition_with_noise(s, x, a.reshape(5, 5)), 0, [np.zeros(25)])
    assert np.allclose(flat, fd, atol=1e-7)


def test_alpha_jacobian_additive_embedding_and_refusal():
    model = ReplicaModel(TOP5, LIN)
    tensor = alpha_jacobian(model, np.zeros(5), np.zeros(5))
    # additive noise lands on the diagonal of the matrix-noise space
    want = np.zeros((5, 5, 5))
    for v in range(5):
        want[v, v, v] = 1.0
    assert np.array_equal(tensor, want)
    with pytest.raises(UnsupportedNoiseModeError):
        alpha_jacobian(StgnnModel(TOP5), np.zeros(35), np.zeros(35))


def test_as_transition_difffn():
    model = ReplicaModel(TOP5, NONLIN)
    fn = as_transition_difffn(model)
    s = np.linspace(-1, 1, 5)
    x = np.zeros(5)
    assert np.allclose(fn(s, x), model.transition_flat(s, x))
    assert np.allclose(fn.jacobian(0, s, x), model.transition_jacobian(s, x))
