"""Evaluation harness: test-segment scoring, reference baselines, report rows.

Scoring convention: the filter is started at the first index of the
evaluated segment with the model's default prior, so a segment of length
L yields L - 1 scored predictions (indices 1..L-1). ``warmup`` extends
the segment backwards; those extra predictions are run but not scored.

Reference baselines need the recorded true states: ``gt`` applies the
generator's readout to the true state at the target step, ``exp`` applies
the generator's full noiseless transition + readout to the true state at
the step before. Their MSEs have closed forms for the linear benchmark
(readout-noise variance alone, resp. plus the propagated state noise),
which the tests pin.
"""

import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DataFormatError, DimensionError
from .gkf import GkfConfig, gkf_run
from .models import ACTIVATIONS, ReplicaModel, ReplicaParams
from .simulate import Episode
from .training import TrainConfig, split_bounds, train

__all__ = [
    "EvalResult",
    "true_replica",
    "identify_replica",
    "rpi_over_blocks",
    "evaluate",
    "oracle_predictions",
    "evaluate_oracle",
    "format_report",
    "report_csv",
]

RPI_BLOCK = 384  # predictions per relative-improvement block: 32 windows x 12 steps


@dataclass
class EvalResult:
    """One report row: a model (or baseline) scored on one episode's test segment.

    ``runtime_s`` is informational and excluded from :meth:`to_dict` by
    default so that persisted rows are byte-identical across reruns.
    """

    model: str
    dataset: str
    n_predictions: int
    mse_wo_kfr: float = None
    mse_w_kfr: float = None
    rpi_mean: float = None
    rpi_std: float = None
    rpi_blocks: int = 0
    runtime_s: float = None

    def to_dict(self, include_runtime: bool = False) -> dict:
        data = asdict(self)
        if not include_runtime:
            del data["runtime_s"]
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "EvalResult":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise DataFormatError(f"unknown report row keys: {sorted(unknown)}")
        return cls(**data)


def true_replica(episode: Episode) -> ReplicaModel:
    """Replica with the generator's own parameters (the identified optimum)."""
    cfg = episode.config
    return ReplicaModel(
        episode.topology,
        ReplicaParams(
            time_weight=cfg.time_weight,
            space_weight=cfg.space_weight,
            readout_bias=cfg.readout_bias,
            readout_scale=cfg.readout_scale,
            state_activation=cfg.state_activation,
            readout_activation=cfg.readout_activation,
        ),
    )


def identify_replica(
    episode: Episode,
    seed: int = 0,
    coarse: tuple = (400, 0.05),
    fine: tuple = (600, 0.005),
    batch_size: int = 8,
) -> tuple:
    """Recover generator parameters with a randomly initialized replica.

    Two filtered-protocol phases, each (epochs, lr): a coarse phase that
    lands the sharp directions, then a warm-started fine phase with fresh
    optimizer moments for the readout bias, whose loss valley is orders of
    magnitude flatter; at coarse lr the other coordinates' oscillation
    scrambles its tiny gradient and it never settles. Returns
    ``(model, [coarse report, fine report])``.
    """
    cfg = episode.config
    model = ReplicaModel.random_init(
        episode.topology, seed, state_activation=cfg.state_activation, readout_activation=cfg.readout_activation
    )
    reports = []
    for epochs, lr in (coarse, fine):
        tc = TrainConfig(
            epochs=epochs, lr=lr, batch_size=batch_size, patience=max(60, epochs // 4), seed=seed, refine="on"
        )
        model, report = train(model, episode, tc)
        reports.append(report)
    return model, reports


def rpi_over_blocks(err_pre: np.ndarray, err_post: np.ndarray, block: int = RPI_BLOCK) -> tuple:
    """Relative prediction improvement per block of consecutive predictions.

    RPI of a block is (sum err_post - sum err_pre) / sum err_pre over its
    squared prediction errors; improvement is negative. A trailing partial
    block is kept when it holds at least 12 predictions. Returns
    (mean, std, n_blocks) with the sample std (ddof=1), 0.0 for a single
    block.
    """
    err_pre = np.asarray(err_pre, dtype=np.float64)
    err_post = np.asarray(err_post, dtype=np.float64)
    values = []
    for lo in range(0, len(err_pre), block):
        pre = err_pre[lo : lo + block]
        if len(pre) < 12 and lo > 0:
            break
        post = err_post[lo : lo + len(pre)]
        denom = float(np.sum(pre))
        if denom == 0.0:
            raise DimensionError("zero open-loop error in an RPI block")
        values.append((float(np.sum(post)) - denom) / denom)
    mean = float(np.mean(values))
    std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return mean, std, len(values)


def _segment(episode: Episode, split, warmup: int) -> tuple:
    _, b = split_bounds(episode.length, split)
    lo = max(0, b - warmup)
    return episode.slice(lo, episode.length), b - lo


def evaluate(
    model,
    episode: Episode,
    kfr: str = "both",
    gkf_config: GkfConfig = None,
    split=(0.7, 0.1, 0.2),
    warmup: int = 0,
    model_name: str = None,
    rpi_block: int = RPI_BLOCK,
) -> EvalResult:
    """Score a model on the episode's test segment.

    ``kfr`` selects which passes run: ``"off"`` (open loop), ``"on"``
    (refined), or ``"both"``. The refined pass also yields the RPI, since
    its trace carries both the pre- and post-update prediction errors.
    """
    if kfr not in ("on", "off", "both"):
        raise DimensionError(f"kfr must be on/off/both, got {kfr!r}")
    started = time.perf_counter()
    seg, skip = _segment(episode, split, warmup)
    cfg = gkf_config or GkfConfig.for_generator(episode.config)
    result = EvalResult(
        model=model_name or type(model).__name__,
        dataset=episode.config.name,
        n_predictions=seg.length - 1 - skip,
    )
    if kfr in ("off", "both"):
        trace = gkf_run(model, cfg, seg.inputs, seg.outputs, refine=False, compute_health=False)
        result.mse_wo_kfr = float(np.mean(trace.mse_pre[skip:]))
    if kfr in ("on", "both"):
        trace = gkf_run(model, cfg, seg.inputs, seg.outputs, refine=True, compute_health=False)
        result.mse_w_kfr = float(np.mean(trace.mse_pre[skip:]))
        mean, std, blocks = rpi_over_blocks(
            trace.mse_pre[skip:] * model.out_dim, trace.mse_post[skip:] * model.out_dim, rpi_block
        )
        result.rpi_mean, result.rpi_std, result.rpi_blocks = mean, std, blocks
    result.runtime_s = time.perf_counter() - started
    return result


def oracle_predictions(episode: Episode, which: str, steps: np.ndarray) -> np.ndarray:
    """Reference predictions of outputs[steps] from the recorded true states."""
    if episode.states is None:
        raise DataFormatError("reference baselines need recorded true states (states.csv)")
    cfg = episode.config
    act_st = ACTIVATIONS[cfg.state_activation][0]
    act_ro = ACTIVATIONS[cfg.readout_activation][0]
    if which == "gt":
        base = episode.states[steps]
    elif which == "exp":
        mix = cfg.time_weight * np.eye(episode.n_nodes) + cfg.space_weight * episode.topology.normalized_sym
        prev = episode.states[steps - 1] + episode.inputs[steps - 1]
        base = act_st(prev @ mix.T)
    else:
        raise DimensionError(f"unknown reference baseline {which!r}")
    return act_ro(cfg.readout_bias + cfg.readout_scale * base)


def evaluate_oracle(episode: Episode, which: str, split=(0.7, 0.1, 0.2)) -> EvalResult:
    """Score a reference baseline on the same prediction steps as :func:`evaluate`."""
    _, b = split_bounds(episode.length, split)
    steps = np.arange(b + 1, episode.length)
    preds = oracle_predictions(episode, which, steps)
    mse = float(np.mean((preds - episode.outputs[steps]) ** 2))
    return EvalResult(
        model=which, dataset=episode.config.name, n_predictions=len(steps), mse_wo_kfr=mse, mse_w_kfr=mse
    )


# ---------------------------------------------------------------------------
# Report formatting


def _fmt(x, pattern="{:.4f}") -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "-"
    return pattern.format(x)


def _fmt_rpi(row: dict) -> str:
    if row.get("rpi_mean") is None:
        return "-"
    return f"{100 * row['rpi_mean']:.1f} +- {100 * (row.get('rpi_std') or 0.0):.1f}"


def format_report(rows: list) -> str:
    """Aligned text table, one column group (w/o, w/, RPI%) per dataset."""
    rows = [r.to_dict() if isinstance(r, EvalResult) else dict(r) for r in rows]
    datasets, models = [], []
    for r in rows:
        if r["dataset"] not in datasets:
            datasets.append(r["dataset"])
        if r["model"] not in models:
            models.append(r["model"])
    by_key = {(r["model"], r["dataset"]): r for r in rows}

    header1 = ["model"]
    header2 = [""]
    for ds in datasets:
        header1 += [ds, "", ""]
        header2 += ["mse w/o", "mse w/", "rpi %"]
    table = [header1, header2]
    for m in models:
        line = [m]
        for ds in datasets:
            r = by_key.get((m, ds))
            if r is None:
                line += ["-", "-", "-"]
            else:
                line += [_fmt(r.get("mse_wo_kfr")), _fmt(r.get("mse_w_kfr")), _fmt_rpi(r)]
        table.append(line)

    widths = [max(len(row[c]) for row in table) for c in range(len(table[0]))]
    out = []
    for i, row in enumerate(table):
        out.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 1:
            out.append("-" * len(out[-1]))
    return "\n".join(out) + "\n"


def report_csv(rows: list) -> str:
    """Flat CSV of report rows (one line per model x dataset)."""
    rows = [r.to_dict() if isinstance(r, EvalResult) else dict(r) for r in rows]
    cols = ["model", "dataset", "n_predictions", "mse_wo_kfr", "mse_w_kfr", "rpi_mean", "rpi_std", "rpi_blocks"]
    lines = [",".join(cols)]
    for r in rows:
        cells = []
        for c in cols:
            v = r.get(c)
            if v is None:
                cells.append("")
            elif isinstance(v, float):
                cells.append(f"{v:.17g}")
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
