"""Synthetic class-incremental streams and the stream file format.

A stream is a sequence of groups; each group holds a disjoint set of
classes whose training samples are shuffled together and cut into batches
of ``batch_size`` (the last batch of a group may be short). Group indices
travel with the stream as metadata for evaluation only.

File layout for a stream at ``<dir>/<stem>.csv``::

    <stem>.csv           header "class_id,f_0,...,f_{D-1}", one training sample per line
    <stem>.groups.json   {"<class_id>": <group index>, ...}   (optional)
    <stem>.test.csv      held-out samples, same columns        (optional)
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import rng
from .errors import ConfigurationError, ParseError


@dataclass(frozen=True)
class StreamConfig:
    num_groups: int = 10
    classes_per_group: int = 5
    samples_per_class: int = 100
    input_dim: int = 32
    batch_size: int = 10
    cluster_spread: float = 0.3
    cluster_separation: float = 3.0
    test_fraction: float = 0.2
    seed: int = 0

    def validate(self) -> None:
        for name in ("num_groups", "classes_per_group", "samples_per_class", "input_dim", "batch_size"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be a positive integer")
        if self.cluster_spread < 0 or self.cluster_separation <= 0:
            raise ConfigurationError("cluster_spread must be >= 0 and cluster_separation > 0")
        if not 0 <= self.test_fraction < 1:
            raise ConfigurationError("test_fraction must lie in [0, 1)")
        if self.samples_per_class - self.num_test_per_class < 1:
            raise ConfigurationError("no training samples left per class after the test split")

    @property
    def num_test_per_class(self) -> int:
        return int(round(self.samples_per_class * self.test_fraction))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Batch:
    features: np.ndarray  # (n, D_in)
    labels: np.ndarray  # (n,)
    group: int | None = None

    def __len__(self):
        return len(self.labels)


@dataclass(frozen=True)
class StreamSchedule:
    batches: list[Batch]
    class_groups: dict[int, int] = field(default_factory=dict)

    def __len__(self):
        return len(self.batches)

    @property
    def num_samples(self) -> int:
        return sum(len(b) for b in self.batches)

    @property
    def classes(self) -> list[int]:
        return sorted({int(c) for b in self.batches for c in b.labels})

    def intervals(self) -> dict[int, tuple[int, int]]:
        """First and last batch index in which each class occurs."""
        out: dict[int, tuple[int, int]] = {}
        for t, b in enumerate(self.batches):
            for c in map(int, np.unique(b.labels)):
                out[c] = (out[c][0], t) if c in out else (t, t)
        return dict(sorted(out.items()))

    def group_end_indices(self) -> list[tuple[int, int]]:
        """(batch index, group) for the last batch of every contiguous group run."""
        ends = []
        for t, b in enumerate(self.batches):
            nxt = self.batches[t + 1].group if t + 1 < len(self.batches) else object()
            if b.group is not None and nxt != b.group:
                ends.append((t, b.group))
        return ends

    def without_groups(self) -> "StreamSchedule":
        return StreamSchedule([replace(b, group=None) for b in self.batches], {})


@dataclass(frozen=True)
class TestSet:
    __test__ = False  # not a pytest class

    features: np.ndarray
    labels: np.ndarray
    class_groups: dict[int, int] = field(default_factory=dict)

    def __len__(self):
        return len(self.labels)

    @property
    def groups(self) -> np.ndarray:
        """Group index of every test sample (-1 when unknown)."""
        return np.array([self.class_groups.get(int(c), -1) for c in self.labels], dtype=int)


def generate_synthetic_stream(cfg: StreamConfig) -> tuple[StreamSchedule, TestSet]:
    """Gaussian clusters with means on a sphere of radius ``cluster_separation``."""
    cfg.validate()
    gen = rng.generator(cfg.seed, rng.DATA)
    n_classes = cfg.num_groups * cfg.classes_per_group
    order = gen.permutation(n_classes)
    class_groups = {int(c): int(i // cfg.classes_per_group) for i, c in enumerate(order)}

    directions = gen.standard_normal((n_classes, cfg.input_dim))
    means = cfg.cluster_separation * directions / np.linalg.norm(directions, axis=1, keepdims=True)
    noise = gen.standard_normal((n_classes, cfg.samples_per_class, cfg.input_dim))
    samples = means[:, None, :] + cfg.cluster_spread * noise

    n_test = cfg.num_test_per_class
    n_train = cfg.samples_per_class - n_test
    test_x = samples[:, n_train:].reshape(-1, cfg.input_dim)
    test_y = np.repeat(np.arange(n_classes), n_test)

    batches = []
    for g in range(cfg.num_groups):
        classes = order[g * cfg.classes_per_group:(g + 1) * cfg.classes_per_group]
        x = samples[classes, :n_train].reshape(-1, cfg.input_dim)
        y = np.repeat(classes, n_train)
        perm = gen.permutation(len(y))
        x, y = x[perm], y[perm]
        for s in range(0, len(y), cfg.batch_size):
            batches.append(Batch(x[s:s + cfg.batch_size], y[s:s + cfg.batch_size], g))
    return StreamSchedule(batches, class_groups), TestSet(test_x, test_y, class_groups)


# ---------------------------------------------------------------------------
# files


def sidecar_paths(path) -> tuple[Path, Path, Path]:
    path = Path(path)
    stem = path.with_suffix("")
    return path, stem.with_name(stem.name + ".groups.json"), stem.with_name(stem.name + ".test.csv")


def _write_samples(path: Path, x: np.ndarray, y: np.ndarray, input_dim: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["class_id", *(f"f_{i}" for i in range(input_dim))])
        for xi, yi in zip(x, y):
            w.writerow([int(yi), *(repr(float(v)) for v in xi)])


def _read_samples(path: Path) -> tuple[np.ndarray, np.ndarray]:
    rows_x, rows_y = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "class_id":
            raise ParseError(f"{path}: line 1: expected header starting with 'class_id'")
        width = len(header) - 1
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width + 1:
                raise ParseError(f"{path}: line {lineno}: expected {width + 1} fields, got {len(row)}")
            try:
                y = int(row[0])
                x = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
            if y < 0 or not np.all(np.isfinite(x)):
                raise ParseError(f"{path}: line {lineno}: negative class id or non-finite feature")
            rows_y.append(y)
            rows_x.append(x)
    return np.array(rows_x, dtype=np.float64).reshape(len(rows_y), width), np.array(rows_y, dtype=np.int64)


def save_stream(path, schedule: StreamSchedule, test: TestSet | None = None) -> None:
    stream_path, manifest_path, test_path = sidecar_paths(path)
    stream_path.parent.mkdir(parents=True, exist_ok=True)
    dim = schedule.batches[0].features.shape[1] if schedule.batches else (test.features.shape[1] if test else 0)
    if schedule.batches:
        x = np.concatenate([b.features for b in schedule.batches])
        y = np.concatenate([b.labels for b in schedule.batches])
    else:
        x, y = np.zeros((0, dim)), np.zeros(0, dtype=np.int64)
    _write_samples(stream_path, x, y, dim)
    groups = dict(schedule.class_groups)
    if test is not None:
        groups.update(test.class_groups)
        _write_samples(test_path, test.features, test.labels, dim)
    if groups:
        manifest_path.write_text(json.dumps({str(k): v for k, v in sorted(groups.items())}, indent=1) + "\n")


def _read_manifest(path: Path) -> dict[int, int]:
    try:
        raw = json.loads(path.read_text())
        return {int(k): int(v) for k, v in raw.items()}
    except (ValueError, AttributeError) as exc:
        raise ParseError(f"{path}: malformed group manifest: {exc}") from None


def load_stream(path, batch_size: int = 10) -> tuple[StreamSchedule, TestSet]:
    """Read a stream file and its optional sidecars.

    Batches are cut every ``batch_size`` samples in file order, and also
    wherever the group (from the manifest) changes.
    """
    if batch_size < 1:
        raise ConfigurationError("batch_size must be positive")
    stream_path, manifest_path, test_path = sidecar_paths(path)
    x, y = _read_samples(stream_path)
    class_groups = _read_manifest(manifest_path) if manifest_path.exists() else {}

    batches: list[Batch] = []
    start = 0
    for i in range(1, len(y) + 1):
        boundary = i == len(y) or i - start == batch_size or class_groups.get(int(y[i])) != class_groups.get(int(y[start]))
        if boundary:
            batches.append(Batch(x[start:i], y[start:i], class_groups.get(int(y[start]))))
            start = i
    schedule = StreamSchedule(batches, class_groups)
    _warn_noncontiguous(schedule)

    if test_path.exists():
        tx, ty = _read_samples(test_path)
        test = TestSet(tx, ty, class_groups)
    else:
        test = TestSet(np.zeros((0, x.shape[1])), np.zeros(0, dtype=np.int64), class_groups)
    return schedule, test


def _warn_noncontiguous(schedule: StreamSchedule) -> None:
    """Warn when another group's batches sit inside a class's appearance interval."""
    if not schedule.class_groups:
        return
    groups = [b.group for b in schedule.batches]
    for c, (start, end) in schedule.intervals().items():
        own = schedule.class_groups.get(c)
        if any(g != own for g in groups[start:end + 1]):
            warnings.warn(f"class {c} appears in batches {start}..{end} interleaved with other groups", stacklevel=3)


def load_test(path) -> TestSet:
    """Test CSV plus its group manifest (``X.test.csv`` pairs with ``X.groups.json``)."""
    path = Path(path)
    base = path.name[: -len(".test.csv")] if path.name.endswith(".test.csv") else path.stem
    manifest = path.with_name(base + ".groups.json")
    x, y = _read_samples(path)
    return TestSet(x, y, _read_manifest(manifest) if manifest.exists() else {})
