"""Train-and-evaluate harness.

The trainer is task-free; this module is the only place that reads the
stream's group metadata, to decide when to take accuracy checkpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datagen import StreamSchedule, TestSet
from .encoder import EncoderConfig
from .metrics import EvalRecord, evaluate_group_checkpoint, key_and_ub_metrics, summarize
from .trainer import BatchLog, ModelState, TrainConfig, train_stream


@dataclass
class ExperimentResult:
    state: ModelState
    logs: list[BatchLog]
    records: dict[str, EvalRecord]  # keyed "standard@K", "no-prompt"
    group_times: dict[int, float] = field(default_factory=dict)
    curve: list[tuple[int, float]] = field(default_factory=list)  # (batch, accuracy on group 0)

    def record(self, k: int = 1) -> EvalRecord:
        return self.records[f"standard@{k}"]


def run_experiment(
    stream: StreamSchedule,
    test: TestSet,
    train_config: TrainConfig,
    encoder_config: EncoderConfig,
    ks=(1,),
    ablation: bool = True,
    key_metrics: bool = True,
    per_batch_curve: bool = False,
) -> ExperimentResult:
    """Train on ``stream`` once, evaluating at every group boundary."""
    ends = dict(stream.group_end_indices())
    n_groups = len(ends)
    names = [f"standard@{k}" for k in ks] + (["no-prompt"] if ablation else [])
    rows = {name: np.full((n_groups, n_groups), np.nan) for name in names}
    curve = []
    checkpoint = {"n": 0}

    def on_batch(t, state):
        if per_batch_curve:
            curve.append((t, float(evaluate_group_checkpoint(state, test, 1)[0])))
        if t in ends:
            n = checkpoint["n"]
            for k in ks:
                rows[f"standard@{k}"][n, :n + 1] = evaluate_group_checkpoint(state, test, n + 1, k)
            if ablation:
                rows["no-prompt"][n, :n + 1] = evaluate_group_checkpoint(state, test, n + 1, 1, "no-prompt")
            checkpoint["n"] = n + 1

    state, logs = train_stream(stream, train_config, encoder_config, on_batch=on_batch)
    records = {name: summarize(T) for name, T in rows.items()} if n_groups else {}
    if key_metrics and n_groups:
        for k in ks:
            rec = records[f"standard@{k}"]
            rec.A_k, rec.UB = key_and_ub_metrics(state, test, k)

    group_times: dict[int, float] = {}
    for t, lg in enumerate(logs):
        g = stream.batches[t].group
        if g is not None:
            group_times[g] = group_times.get(g, 0.0) + lg.wall_time
    return ExperimentResult(state, logs, records, group_times, curve)
