"""Class-level (class, key, prompt) triplets with key retrieval and key updates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import InputError, StateError
from .similarity import cosine_matrix, normalize

PROMPT_INIT_STD = 0.02


@dataclass
class PromptEntry:
    class_id: int
    key: np.ndarray  # (d,), unit norm
    prompt: np.ndarray  # (L_p, d)


class PromptPool:
    """Prompt entries kept sorted by class id; one entry per class."""

    def __init__(self, token_dim: int, prompt_length: int):
        self.token_dim = token_dim
        self.prompt_length = prompt_length
        self._entries: dict[int, PromptEntry] = {}

    def __len__(self):
        return len(self._entries)

    def __contains__(self, class_id):
        return int(class_id) in self._entries

    def __getitem__(self, class_id) -> PromptEntry:
        return self._entries[int(class_id)]

    def __iter__(self):
        return iter(self.entries)

    @property
    def class_ids(self) -> list[int]:
        return sorted(self._entries)

    @property
    def entries(self) -> list[PromptEntry]:
        return [self._entries[c] for c in self.class_ids]

    def keys(self) -> np.ndarray:
        """(C, d) key matrix in class-id order."""
        return np.stack([e.key for e in self.entries]) if self._entries else np.zeros((0, self.token_dim))

    def add(self, entry: PromptEntry) -> PromptEntry:
        if entry.class_id in self._entries:
            raise StateError(f"class {entry.class_id} already has a prompt")
        self._entries[entry.class_id] = entry
        return entry


def insert_class(pool: PromptPool, class_id: int, seed: int) -> PromptEntry:
    """Create a random unit key and a small Gaussian prompt for a new class."""
    class_id = int(class_id)
    if class_id in pool:
        raise StateError(f"class {class_id} already has a prompt")
    key_gen = rng.generator(seed, rng.KEY, class_id)
    prompt_gen = rng.generator(seed, rng.PROMPT, class_id)
    key = normalize(key_gen.standard_normal(pool.token_dim))
    prompt = prompt_gen.normal(0.0, PROMPT_INIT_STD, size=(pool.prompt_length, pool.token_dim))
    return pool.add(PromptEntry(class_id, key, prompt))


def top_k_indices(keys: np.ndarray, queries: np.ndarray, k: int) -> np.ndarray:
    """Column indices of the ``k`` most cosine-similar keys for each query row.

    Keys must be in class-id order so the stable sort sends ties to the smaller id.
    """
    sims = cosine_matrix(queries, keys)
    return np.argsort(-sims, axis=1, kind="stable")[:, :k]


def retrieve_top_k(pool: PromptPool, q, k: int = 1) -> list[PromptEntry]:
    if len(pool) == 0:
        raise StateError("cannot retrieve from an empty prompt pool")
    if k < 1:
        raise InputError("K must be at least 1")
    entries = pool.entries
    idx = top_k_indices(pool.keys(), np.atleast_2d(q), min(k, len(entries)))[0]
    return [entries[i] for i in idx]


def key_loss(k_new, k_old, queries, alpha: float, beta: float) -> float:
    """``-(alpha cos(k', k) + beta sum_x cos(k', q_x))``; lower means closer."""
    kn = normalize(k_new)
    return -(alpha * kn @ normalize(k_old) + beta * np.sum(normalize(queries) @ kn))


def update_key(entry: PromptEntry, queries, alpha: float, beta: float, lr: float) -> np.ndarray:
    """One gradient-descent step on ``key_loss`` from the current key, then renormalize.

    Returns the new key; ``entry`` is left untouched.
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if queries.shape[0] == 0:
        raise InputError("update_key needs at least one query")
    k = entry.key
    kn = np.linalg.norm(k)
    khat = k / kn
    targets = np.vstack([normalize(k)[None], normalize(queries)])
    weights = np.concatenate([[alpha], np.full(len(queries), beta)])
    # d cos(k, a)/dk = (a_hat - cos * k_hat) / |k|
    cos = targets @ khat
    grad = -(weights[:, None] * (targets - cos[:, None] * khat)).sum(0) / kn
    return normalize(k - lr * grad)
