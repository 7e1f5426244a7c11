"""One-pass training over a stream of batches.

Per batch:

1. every class seen for the first time gets a prompt-pool entry and a
   placeholder prototype computed with its fresh prompt;
2. ``passes`` times: embed every sample with its own class prompt, take one
   Adam step per prompt on the batch-mean contrastive loss, then move each
   batch class's key by one gradient step toward the batch queries;
3. embed again with the final prompts and fold the batch into the running
   prototype means.

Nothing derived from individual samples outlives ``process_batch``. The
trainer never looks at group metadata.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .contrastive import BatchView, batch_loss_and_embedding_grads, class_weights
from .datagen import Batch, StreamSchedule
from .encoder import EncoderConfig, EncoderState, build_encoder, encode_query, encode_with_prompt_vjp
from .errors import ConfigurationError, InputError, NumericError
from .ncm import PrototypeStore, create_prototype, update_prototype
from .optim import AdamSlot, adam_step
from .prompt_pool import PromptPool, insert_class, update_key

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 10
    passes: int = 5
    learning_rate: float = 0.1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    key_lr: float = 0.1
    temperature: float = 0.2
    prompt_length: int = 20
    seed: int = 0

    def validate(self) -> None:
        if self.batch_size < 1 or self.passes < 1 or self.prompt_length < 1:
            raise ConfigurationError("batch_size, passes and prompt_length must be positive")
        if min(self.learning_rate, self.key_lr, self.temperature, self.adam_eps) <= 0:
            raise ConfigurationError("learning rates, temperature and adam_eps must be positive")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ConfigurationError("Adam betas must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ModelState:
    encoder_config: EncoderConfig
    train_config: TrainConfig
    pool: PromptPool
    store: PrototypeStore
    plain_store: PrototypeStore  # prompt-free prototypes for the no-prompt ablation
    slots: dict[int, AdamSlot] = field(default_factory=dict)
    encoder: EncoderState | None = field(default=None, repr=False, compare=False)

    @classmethod
    def new(cls, encoder_config: EncoderConfig, train_config: TrainConfig) -> "ModelState":
        train_config.validate()
        enc = build_encoder(encoder_config)
        return cls(
            encoder_config,
            train_config,
            PromptPool(encoder_config.token_dim, train_config.prompt_length),
            PrototypeStore(),
            PrototypeStore(),
            encoder=enc,
        )

    def __post_init__(self):
        if self.encoder is None:
            self.encoder = build_encoder(self.encoder_config)

    @property
    def classes(self) -> list[int]:
        return self.pool.class_ids

    @property
    def counts(self) -> dict[int, int]:
        """Historical sample count per class."""
        return {p.class_id: p.count for p in self.store}


@dataclass(frozen=True)
class BatchLog:
    batch_index: int
    loss: float  # mean anchor loss of the final pass
    first_pass_loss: float
    new_classes: int
    wall_time: float


def process_batch(state: ModelState, batch: Batch, batch_index: int = 0) -> BatchLog:
    """Run the full per-batch update in place on ``state``."""
    t0 = time.perf_counter()
    cfg = state.train_config
    enc = state.encoder
    x = np.asarray(batch.features, dtype=np.float64)
    labels = np.asarray(batch.labels, dtype=np.int64)
    if x.ndim != 2 or x.shape[1] != state.encoder_config.input_dim:
        raise InputError(f"batch {batch_index}: features have shape {x.shape}, expected (n, {state.encoder_config.input_dim})")
    if len(labels) != len(x):
        raise InputError(f"batch {batch_index}: {len(x)} feature rows but {len(labels)} labels")
    if len(labels) == 0:
        return BatchLog(batch_index, 0.0, 0.0, 0, time.perf_counter() - t0)

    classes, first_idx, counts = np.unique(labels, return_index=True, return_counts=True)
    queries = encode_query(enc, x)

    new = [c for c in classes if c not in state.pool]
    for c in new:
        entry = insert_class(state.pool, c, cfg.seed)
        i = first_idx[np.searchsorted(classes, c)]
        z0 = encode_with_prompt_vjp(enc, x[i:i + 1], entry.prompt)[0][0]
        create_prototype(state.store, c, z0)
        create_prototype(state.plain_store, c, queries[i])
        state.slots[int(c)] = AdamSlot.zeros_like(entry.prompt)

    weights = {int(c): class_weights(state.store[c].count, int(n)) for c, n in zip(classes, counts)}
    members = {int(c): np.flatnonzero(labels == c) for c in classes}

    losses = []
    for _ in range(cfg.passes):
        prompts = np.stack([state.pool[c].prompt for c in labels])
        z, vjp = encode_with_prompt_vjp(enc, x, prompts)
        protos = {c: state.store[c].mu for c in state.store.class_ids}
        loss, dz = batch_loss_and_embedding_grads(BatchView(z, labels), protos, weights, cfg.temperature)
        if not np.isfinite(loss):
            raise NumericError(f"batch {batch_index}: non-finite loss")
        losses.append(loss)
        dp = vjp(dz)
        for c, idx in members.items():
            entry = state.pool[c]
            entry.prompt, state.slots[c] = adam_step(
                entry.prompt, dp[idx].sum(0), state.slots[c],
                cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps,
            )
        for c, idx in members.items():
            entry = state.pool[c]
            entry.key = update_key(entry, queries[idx], weights[c].alpha, weights[c].beta, cfg.key_lr)

    prompts = np.stack([state.pool[c].prompt for c in labels])
    z_final = encode_with_prompt_vjp(enc, x, prompts)[0]
    for c, idx in members.items():
        state.store[c] = update_prototype(state.store[c], z_final[idx])
        state.plain_store[c] = update_prototype(state.plain_store[c], queries[idx])

    return BatchLog(batch_index, losses[-1], losses[0], len(new), time.perf_counter() - t0)


def train_stream(
    stream: StreamSchedule,
    train_config: TrainConfig,
    encoder_config: EncoderConfig,
    on_batch=None,
    state: ModelState | None = None,
) -> tuple[ModelState, list[BatchLog]]:
    """Fold ``process_batch`` over the stream, visiting every batch once.

    ``on_batch(index, state)`` is called after each batch; evaluation
    harnesses use it to take checkpoints.
    """
    state = state or ModelState.new(encoder_config, train_config)
    logs = []
    for t, batch in enumerate(stream.batches):
        logs.append(process_batch(state, batch, t))
        if on_batch is not None:
            on_batch(t, state)
        if t % 100 == 0:
            log.debug("batch %d loss %.4f classes %d", t, logs[-1].loss, len(state.pool))
    return state, logs
