import numpy as np

from graphkf.experiment import evaluate
from graphkf.models import StgnnModel
from graphkf.simulate import generate_episode, nonlingss_config
from graphkf.training import TrainConfig, train

# a generic message-passing forecaster, trained the conventional way:
# shuffled 12-step windows, open loop, truncated backprop
ep = generate_episode(nonlingss_config(seed=0))
model = StgnnModel(ep.topology, seed=0)
print(f"parameters: {model.n_params}")

fitted, report = train(model, ep, TrainConfig(epochs=8, seed=0))
print(f"val MSE {report.initial_val_mse:.3f} -> {report.val_mse[-1]:.3f} after {report.epochs_run} epochs")

row = evaluate(fitted, ep, kfr="both", model_name="stgnn")
print(f"test MSE open loop: {row.mse_wo_kfr:.2f}")
print(f"test MSE refined:   {row.mse_w_kfr:.3f}")
print(f"RPI: {100 * row.rpi_mean:.1f}% over {row.rpi_blocks} blocks")

# the gap is the point: a net trained on short windows drifts when rolled
# forward for a thousand steps, but the filter keeps it anchored to the
# observed outputs, no retraining needed
assert row.mse_w_kfr < row.mse_wo_kfr
