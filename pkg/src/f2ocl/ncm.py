"""Nearest-class-mean classifier over running-mean prototypes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericError, StateError
from .similarity import cosine_matrix


@dataclass(frozen=True)
class Prototype:
    class_id: int
    mu: np.ndarray
    count: int = 0


class PrototypeStore:
    def __init__(self):
        self._protos: dict[int, Prototype] = {}

    def __len__(self):
        return len(self._protos)

    def __contains__(self, class_id):
        return int(class_id) in self._protos

    def __getitem__(self, class_id) -> Prototype:
        return self._protos[int(class_id)]

    def __setitem__(self, class_id, proto: Prototype):
        self._protos[int(class_id)] = proto

    def __iter__(self):
        return iter(self.prototypes)

    @property
    def class_ids(self) -> list[int]:
        return sorted(self._protos)

    @property
    def prototypes(self) -> list[Prototype]:
        return [self._protos[c] for c in self.class_ids]

    def means(self) -> np.ndarray:
        return np.stack([p.mu for p in self.prototypes])


def create_prototype(store: PrototypeStore, class_id: int, z) -> Prototype:
    """Register a placeholder prototype ``mu = z`` with zero weight (count 0)."""
    if class_id in store:
        raise StateError(f"class {class_id} already has a prototype")
    proto = Prototype(int(class_id), np.array(z, dtype=np.float64), 0)
    store[class_id] = proto
    return proto


def update_prototype(proto: Prototype, new_embeddings) -> Prototype:
    """``mu' = (n mu + sum z') / (n + n*)``."""
    z = np.atleast_2d(np.asarray(new_embeddings, dtype=np.float64))
    if z.shape[0] == 0:
        raise InputError("update_prototype needs at least one embedding")
    n = proto.count
    mu = (n * proto.mu + z.sum(0)) / (n + z.shape[0])
    if not np.all(np.isfinite(mu)):
        raise NumericError(f"prototype of class {proto.class_id} became non-finite")
    return Prototype(proto.class_id, mu, n + z.shape[0])


def predict_many(store: PrototypeStore, z) -> np.ndarray:
    """Vectorized ``predict`` over the rows of ``z``."""
    if len(store) == 0:
        raise StateError("cannot predict with an empty prototype store")
    ids = np.asarray(store.class_ids)
    sims = cosine_matrix(z, store.means())
    # argmax returns the first maximum and columns are in class-id order
    return ids[np.argmax(sims, axis=1)]


def predict(store: PrototypeStore, z) -> int:
    """Class whose prototype has the highest cosine similarity to ``z``."""
    return int(predict_many(store, np.asarray(z)[None])[0])
