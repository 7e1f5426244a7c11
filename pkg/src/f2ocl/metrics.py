"""Inference and continual-learning metrics.

``T[n-1, tau-1]`` holds the accuracy on test classes of group ``tau`` after
training through group ``n`` (groups are 1-indexed in the formulas, 0-indexed
in arrays). Entries above the diagonal are NaN.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .datagen import TestSet
from .encoder import encode_query, encode_with_prompt_vjp
from .errors import ConfigurationError, InputError, StateError
from .ncm import predict_many
from .prompt_pool import top_k_indices

MODES = ("standard", "oracle", "no-prompt")
_CHUNK = 512


@dataclass(frozen=True)
class Inference:
    predictions: np.ndarray
    retrieved: np.ndarray  # top-1 key class per sample (-1 in no-prompt mode)
    queries: np.ndarray
    embeddings: np.ndarray


def infer(state, x, k: int = 1, mode: str = "standard", labels=None) -> Inference:
    """Classify feature rows.

    Modes:
        standard: top-``k`` keys by cosine to ``q = f(x)``, their prompts
            concatenated in descending similarity, nearest prototype to ``f(x, p)``.
        oracle: the true class's prompt (needs ``labels``), for the UB metric.
        no-prompt: ``q`` against prompt-free prototypes.
    """
    if mode not in MODES:
        raise ConfigurationError(f"unknown inference mode {mode!r}")
    if k < 1:
        raise ConfigurationError("K must be at least 1")
    if len(state.pool) == 0:
        raise StateError("model has no classes yet")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    enc = state.encoder
    ids = np.asarray(state.pool.class_ids)
    q = encode_query(enc, x) if len(x) else np.zeros((0, enc.config.token_dim))
    if mode == "no-prompt":
        preds = predict_many(state.plain_store, q) if len(x) else np.zeros(0, dtype=int)
        return Inference(preds, np.full(len(x), -1), q, q)

    prompt_stack = np.stack([e.prompt for e in state.pool.entries])  # (C, L_p, d)
    if mode == "oracle":
        if labels is None:
            raise InputError("oracle mode needs the true labels")
        labels = np.asarray(labels)
        pos = np.searchsorted(ids, labels)
        if np.any(pos >= len(ids)) or np.any(ids[np.minimum(pos, len(ids) - 1)] != labels):
            raise InputError("oracle mode got a label with no prompt")
        top = pos[:, None]
        retrieved = labels.copy()
    else:
        top = top_k_indices(state.pool.keys(), q, min(k, len(ids))) if len(x) else np.zeros((0, 1), dtype=int)
        retrieved = ids[top[:, 0]]

    z = np.zeros((len(x), enc.config.token_dim))
    for s in range(0, len(x), _CHUNK):
        sel = top[s:s + _CHUNK]
        prompts = prompt_stack[sel].reshape(len(sel), -1, enc.config.token_dim)
        z[s:s + _CHUNK] = encode_with_prompt_vjp(enc, x[s:s + _CHUNK], prompts)[0]
    preds = predict_many(state.store, z) if len(x) else np.zeros(0, dtype=int)
    return Inference(preds, retrieved, q, z)


def _known(state, test: TestSet) -> np.ndarray:
    return np.isin(test.labels, state.pool.class_ids)


def evaluate_group_checkpoint(state, test: TestSet, through_group: int, k: int = 1, mode: str = "standard") -> np.ndarray:
    """Accuracy per group ``0..through_group-1`` on that group's test samples."""
    groups = test.groups
    row = np.full(through_group, np.nan)
    sel = groups < through_group
    sel &= groups >= 0
    if mode == "oracle":
        sel &= _known(state, test)
    out = infer(state, test.features[sel], k, mode, test.labels[sel]) if sel.any() else None
    for tau in range(through_group):
        mask = groups[sel] == tau
        if not mask.any():
            warnings.warn(f"no test samples for group {tau}; skipped", stacklevel=2)
            continue
        row[tau] = np.mean(out.predictions[mask] == test.labels[sel][mask])
    return row


def average_accuracy(T, n: int) -> float:
    """``A_n = mean_{tau <= n} T[n, tau]`` (``n`` 1-indexed)."""
    if n < 1:
        raise InputError("A_n needs n >= 1")
    T = np.asarray(T, dtype=np.float64)
    total = 0.0
    for tau in range(n):  # left-to-right, so results do not depend on numpy's summation strategy
        total += T[n - 1, tau]
    return float(total / n)


def average_forgetting(T, n: int) -> float:
    """``F_n = mean_{tau < n} (max_{tau' < n} T[tau', tau] - T[n, tau])``.

    The max runs over checkpoints where group ``tau`` had been trained
    (``tau' >= tau``). Terms are not clamped, so improvement counts negative.
    """
    if n < 2:
        raise InputError("F_n needs n >= 2")
    T = np.asarray(T, dtype=np.float64)
    total = 0.0
    for tau in range(n - 1):
        total += np.max(T[tau:n - 1, tau]) - T[n - 1, tau]
    return float(total / (n - 1))


def key_and_ub_metrics(state, test: TestSet, k: int = 1) -> tuple[float, float]:
    """(A_k, UB) on the test samples of classes the state knows.

    A_k is the fraction whose top-1 key belongs to the true class; UB is the
    oracle-prompt accuracy averaged over groups (over samples when groups are unknown).
    """
    sel = _known(state, test)
    if not sel.any():
        raise StateError("no test samples for the trained classes")
    x, y = test.features[sel], test.labels[sel]
    a_k = float(np.mean(infer(state, x, 1, "standard").retrieved == y))
    hit = infer(state, x, k, "oracle", y).predictions == y
    groups = test.groups[sel]
    if np.all(groups >= 0):
        ub = float(np.mean([hit[groups == g].mean() for g in np.unique(groups)]))
    else:
        ub = float(hit.mean())
    return a_k, ub


@dataclass
class EvalRecord:
    matrix: np.ndarray
    A: list[float]
    F: list[float | None]
    A_k: float | None = None
    UB: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def final_A(self) -> float:
        return self.A[-1]

    @property
    def final_F(self) -> float | None:
        return self.F[-1]

    def to_dict(self) -> dict:
        return {
            "A_n": self.final_A,
            "F_n": self.final_F,
            "A": self.A,
            "F": self.F,
            "A_k": self.A_k,
            "UB": self.UB,
            **self.extra,
        }


def summarize(T) -> EvalRecord:
    """A_n for every complete row and F_n for every row from n = 2."""
    T = np.asarray(T, dtype=np.float64)
    n_rows = T.shape[0]
    A = [average_accuracy(T, n) for n in range(1, n_rows + 1)]
    F = [None] + [average_forgetting(T, n) for n in range(2, n_rows + 1)]
    return EvalRecord(T, A, F)
