"""Filter a model whose state noise lives on the adjacency matrix.

Additive noise makes the transition-noise Jacobian the identity, so the
covariance update never sees anything but q*I. The matrix-noise route is
the general case: noise perturbs the (raw) adjacency, the Jacobian is a
3-index tensor, and its contraction with the noise covariance flows into
P-. The payoff is structured uncertainty. With a covariance that puts
noise only on real edges, a node's transition variance grows with how
many of its neighbors are currently active, which no additive q*I can
express.
"""

import numpy as np

from graphkf.gkf import GkfConfig, gkf_step, initial_belief
from graphkf.graphs import GraphTopology
from graphkf.models import AdjacencyNoiseModel, alpha_jacobian

top = GraphTopology.from_edges(5, [(0, 1), (0, 2), (0, 3), (3, 4)])
model = AdjacencyNoiseModel(top, time_weight=0.5, space_weight=0.4)

x = np.array([1.0, 1.0, 0.0, 1.0, 0.0])  # nodes 0, 1, 3 active
l_tensor = alpha_jacobian(model, np.zeros(5), x)
print("noise Jacobian tensor, slice for node 0 (it feels row 0 of the perturbation):")
print(l_tensor[0])
print()

# i.i.d. noise on every matrix entry: scalar q, and every node picks up
# the same variance because each feels the full input vector through its
# own row of the perturbation
q_iid = 0.05
l_flat = l_tensor.reshape(5, -1)
print("per-node variance, i.i.d. entries:", np.round(q_iid * np.diag(l_flat @ l_flat.T), 4))

# noise restricted to actual edges: full covariance matrix over the
# 25-dimensional matrix space, diagonal with mass only on (i, j) in E
mask = (top.adjacency > 0).astype(float).ravel()
q_edges = np.diag(0.05 * mask)
per_node = np.diag(l_flat @ q_edges @ l_flat.T)
print("per-node variance, edge-only noise: ", np.round(per_node, 4))
for v in range(5):
    active = int(top.adjacency[v] @ (x > 0))
    print(f"  node {v}: {per_node[v]:.4f}   active neighbors {active}")

# the filter consumes either form directly
cfg = GkfConfig(state_noise=q_edges, readout_noise=0.01, prior_cov=0.1)
belief = initial_belief(model, cfg)
belief, rec = gkf_step(model, cfg, belief, x, np.zeros(5))
print()
print("diag(P-) after one filter step:", np.round(np.diag(rec["cov_pre"]), 4))
