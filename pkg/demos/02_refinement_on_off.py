import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from graphkf.experiment import true_replica
from graphkf.gkf import GkfConfig, gkf_run
from graphkf.simulate import generate_episode, lingss_config

# same model, same data, refinement on vs off
ep = generate_episode(lingss_config(seed=0))
model = true_replica(ep)
cfg = GkfConfig.for_generator(ep.config)

seg = ep.slice(4000, 5000)  # held-out tail
open_loop = gkf_run(model, cfg, seg.inputs, seg.outputs, refine=False)
refined = gkf_run(model, cfg, seg.inputs, seg.outputs, compute_health=True)

print(f"open-loop MSE  {open_loop.mse:.4f}")
print(f"refined   MSE  {refined.mse:.4f}   (one-step-ahead, before each update)")
print(f"post-update    {refined.mse_refined:.4f}")
print(f"gain norm      {refined.gain_fro.mean():.3f} mean, {refined.gain_fro[-1]:.3f} final")
print(f"min eigenvalue of P over the run: {refined.min_eig_post.min():.2e}")

# the covariance settles to a steady state within a few dozen steps
tr = refined.tr_p_post
print(f"trace(P+) first/last: {tr[0]:.4f} -> {tr[-1]:.4f}")

fig, ax = plt.subplots(1, 2, figsize=(10, 3.5))
window = 25
kernel = np.ones(window) / window
ax[0].plot(np.convolve(open_loop.mse_pre, kernel, mode="valid"), label="open loop")
ax[0].plot(np.convolve(refined.mse_pre, kernel, mode="valid"), label="refined")
ax[0].set_xlabel("step")
ax[0].set_ylabel(f"MSE ({window}-step moving avg)")
ax[0].legend()
ax[1].plot(refined.tr_p_pre, label="trace P-")
ax[1].plot(refined.tr_p_post, label="trace P+")
ax[1].set_xlabel("step")
ax[1].legend()
fig.tight_layout()
fig.savefig("/tmp/graphkf_demo_refinement.png", dpi=120)
print("wrote /tmp/graphkf_demo_refinement.png")
