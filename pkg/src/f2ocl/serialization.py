"""Versioned JSON state file.

Floats are written with ``repr`` (shortest round-tripping form), so
``load_state(save_state(s))`` reproduces every array bit for bit. The
encoder itself is never stored; it is rebuilt from its config and checked
against the stored digest.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .encoder import EncoderConfig
from .errors import ParseError
from .ncm import Prototype, PrototypeStore
from .optim import AdamSlot
from .prompt_pool import PromptEntry, PromptPool
from .trainer import ModelState, TrainConfig

MAGIC = "F2OCL-STATE"
VERSION = 1


def _arr(a) -> list:
    return np.asarray(a, dtype=np.float64).tolist()


def _protos(store: PrototypeStore) -> list[dict]:
    return [{"class_id": p.class_id, "mu": _arr(p.mu), "count": p.count} for p in store]


def state_to_dict(state: ModelState) -> dict:
    return {
        "magic": MAGIC,
        "version": VERSION,
        "encoder": state.encoder_config.to_dict(),
        "encoder_digest": state.encoder.digest(),
        "train": state.train_config.to_dict(),
        "prompts": [
            {
                "class_id": e.class_id,
                "key": _arr(e.key),
                "prompt": _arr(e.prompt),
                "adam": {"m": _arr(state.slots[e.class_id].m), "v": _arr(state.slots[e.class_id].v), "t": state.slots[e.class_id].t},
            }
            for e in state.pool
        ],
        "prototypes": _protos(state.store),
        "plain_prototypes": _protos(state.plain_store),
    }


def state_from_dict(data: dict) -> ModelState:
    if not isinstance(data, dict) or data.get("magic") != MAGIC:
        raise ParseError("not an F2OCL state file")
    if data.get("version") != VERSION:
        raise ParseError(f"unsupported state file version {data.get('version')!r}")
    try:
        state = ModelState.new(EncoderConfig(**data["encoder"]), TrainConfig(**data["train"]))
        if state.encoder.digest() != data["encoder_digest"]:
            raise ParseError("rebuilt encoder does not match the stored digest")
        for rec in data["prompts"]:
            c = int(rec["class_id"])
            state.pool.add(PromptEntry(c, np.array(rec["key"], dtype=np.float64), np.array(rec["prompt"], dtype=np.float64)))
            adam = rec["adam"]
            state.slots[c] = AdamSlot(np.array(adam["m"], dtype=np.float64), np.array(adam["v"], dtype=np.float64), int(adam["t"]))
        for field, store in (("prototypes", state.store), ("plain_prototypes", state.plain_store)):
            for rec in data[field]:
                store[rec["class_id"]] = Prototype(int(rec["class_id"]), np.array(rec["mu"], dtype=np.float64), int(rec["count"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"malformed state file: {exc!r}") from None
    if state.pool.class_ids != state.store.class_ids:
        raise ParseError("prompt pool and prototype store disagree on classes")
    return state


def dumps_state(state: ModelState) -> str:
    return json.dumps(state_to_dict(state), separators=(",", ":")) + "\n"


def save_state(state: ModelState, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_state(state))


def load_state(path) -> ModelState:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from None
    return state_from_dict(data)
