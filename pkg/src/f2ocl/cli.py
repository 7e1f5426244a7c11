"""Command-line entry point.

Subcommands: generate, train, eval, sweep, dump-embeddings.
Exit codes: 0 success, 1 usage/config, 2 I/O/parse, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .datagen import TestSet, generate_synthetic_stream, load_stream, load_test, save_stream
from .errors import ConfigurationError, F2OCLError
from .metrics import EvalRecord, evaluate_group_checkpoint, infer, key_and_ub_metrics, summarize
from .pipeline import run_experiment
from .serialization import load_state, save_state
from .trainer import train_stream

log = logging.getLogger("f2ocl")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config(args) -> RunConfig:
    return load_config(args.config, args.set or ())


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"expected a comma-separated list of integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise ConfigurationError(f"values must be positive integers: {text!r}")
    return values


def _write_matrix(path: Path, T: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", *(f"group_{t + 1}" for t in range(T.shape[1]))])
        for n, row in enumerate(T, start=1):
            w.writerow([n, *("" if np.isnan(v) else repr(float(v)) for v in row)])


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    cfg = _config(args)
    out = Path(args.out or Path(cfg.output_dir) / "stream.csv")
    schedule, test = generate_synthetic_stream(cfg.stream)
    save_stream(out, schedule, test)
    print(
        f"wrote {out}: {schedule.num_samples} training samples in {len(schedule)} batches, "
        f"{len(test)} test samples, {len(schedule.classes)} classes in {cfg.stream.num_groups} groups"
    )
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    out = Path(args.out or cfg.output_dir)
    schedule, _ = load_stream(args.stream, cfg.train.batch_size)
    ends = dict(schedule.group_end_indices())
    ckpt_dir = out / "checkpoints"

    def on_batch(t, state):
        if t in ends:
            save_state(state, ckpt_dir / f"group_{ends[t] + 1:03d}.json")

    state, logs = train_stream(schedule, cfg.train, cfg.encoder, on_batch=on_batch)
    save_state(state, out / "state.json")
    with open(out / "train_log.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["batch_index", "loss", "first_pass_loss", "new_classes", "wall_time"])
        for lg in logs:
            w.writerow([lg.batch_index, repr(lg.loss), repr(lg.first_pass_loss), lg.new_classes, f"{lg.wall_time:.6f}"])
    print(f"trained on {schedule.num_samples} samples, {len(state.pool)} classes; state in {out / 'state.json'}")
    return EXIT_OK


def evaluate_state_file(state_path, test: TestSet, k: int = 1, oracle_keys: bool = False, no_prompt: bool = False) -> EvalRecord:
    """Accuracy matrix from the group checkpoints saved next to ``state_path``."""
    state_path = Path(state_path)
    mode = "no-prompt" if no_prompt else "standard"
    ckpts = sorted((state_path.parent / "checkpoints").glob("group_*.json"))
    states = [load_state(p) for p in ckpts] or [load_state(state_path)]
    if len(ckpts) == 0:
        n = len({test.class_groups[c] for c in states[0].classes if c in test.class_groups}) or 1
        T = evaluate_group_checkpoint(states[0], test, n, k, mode)[None, :]
        T = np.vstack([np.full((n - 1, n), np.nan), T]) if n > 1 else T
        rec = EvalRecord(T, [float(np.mean(T[-1]))], [None])
    else:
        n = len(states)
        T = np.full((n, n), np.nan)
        for i, st in enumerate(states):
            T[i, :i + 1] = evaluate_group_checkpoint(st, test, i + 1, k, mode)
        rec = summarize(T)
    final = load_state(state_path)
    if not no_prompt:
        a_k, ub = key_and_ub_metrics(final, test, k)
        rec.A_k = a_k
        rec.UB = ub if oracle_keys else None
    return rec


def cmd_eval(args) -> int:
    if args.k < 1:
        raise ConfigurationError("K must be at least 1")
    test = load_test(args.test)
    rec = evaluate_state_file(args.state, test, args.k, args.oracle_keys, args.ablation_no_prompt)
    state = load_state(args.state)
    out = Path(args.out or Path(args.state).parent)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        **rec.to_dict(),
        "mode": "no-prompt" if args.ablation_no_prompt else "standard",
        "K": args.k,
        "config": {"encoder": state.encoder_config.to_dict(), "train": state.train_config.to_dict()},
        "seed": state.train_config.seed,
    }
    _write_json(out / "metrics.json", payload)
    _write_matrix(out / "matrix.csv", rec.matrix)
    ub = f" UB={rec.UB:.4f}" if rec.UB is not None else ""
    f_n = f"{rec.final_F:.4f}" if rec.final_F is not None else "n/a"
    print(f"A_n={rec.final_A:.4f} F_n={f_n}{ub}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    passes, keys = _int_list(args.passes), _int_list(args.keys)
    schedule, test = load_stream(args.stream, cfg.train.batch_size)
    out = Path(args.out or Path(cfg.output_dir) / "grid.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for p in passes:
        train_cfg = type(cfg.train)(**{**cfg.train.to_dict(), "passes": p})
        res = run_experiment(schedule, test, train_cfg, cfg.encoder, ks=tuple(keys), ablation=False, key_metrics=False)
        for k in keys:
            rec = res.record(k)
            rows.append((p, k, rec.final_A, rec.final_F))
            log.info("passes=%d K=%d A_n=%.4f", p, k, rec.final_A)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["passes", "K", "A_n", "F_n"])
        for p, k, a, f in rows:
            w.writerow([p, k, repr(a), "" if f is None else repr(f)])
    print(f"wrote {len(rows)} cells to {out}")
    return EXIT_OK


def cmd_dump_embeddings(args) -> int:
    state = load_state(args.state)
    test = load_test(args.test)
    res = infer(state, test.features, args.k)
    out = Path(args.out or Path(args.state).parent / "embeddings.csv")
    d = state.encoder_config.token_dim
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", *(f"q_{i}" for i in range(d)), *(f"z_{i}" for i in range(d))])
        for y, q, z in zip(test.labels, res.queries, res.embeddings):
            w.writerow([int(y), *(repr(float(v)) for v in q), *(repr(float(v)) for v in z)])
    print(f"wrote {len(test)} rows to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="f2ocl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_config(p):
        p.add_argument("--config", help="run-config JSON file")
        p.add_argument("--set", action="append", metavar="SECTION.FIELD=VALUE", help="override a config field")

    p = sub.add_parser("generate", help="write a synthetic stream")
    with_config(p)
    p.add_argument("--out", help="stream CSV path (default <output_dir>/stream.csv)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train on a stream file")
    with_config(p)
    p.add_argument("--stream", required=True)
    p.add_argument("--out", help="output directory (default output_dir)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained state")
    p.add_argument("--state", required=True)
    p.add_argument("--test", required=True, help="test CSV")
    p.add_argument("-k", "--k", type=int, default=1, help="number of prompts concatenated at inference")
    p.add_argument("--oracle-keys", action="store_true", help="also report the oracle-key upper bound UB")
    p.add_argument("--ablation-no-prompt", action="store_true", help="classify with prompt-free prototypes")
    p.add_argument("--out", help="output directory (default: next to the state file)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="grid over passes and K")
    with_config(p)
    p.add_argument("--stream", required=True)
    p.add_argument("--passes", default="1,5,10")
    p.add_argument("--keys", default="1,2")
    p.add_argument("--out", help="grid CSV path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("dump-embeddings", help="write q and z embeddings of the test set")
    p.add_argument("--state", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("-k", "--k", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_dump_embeddings)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except F2OCLError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
