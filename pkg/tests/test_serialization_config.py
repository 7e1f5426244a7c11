import json

import numpy as np
import pytest

from f2ocl.config import config_from_dict, load_config
from f2ocl.datagen import StreamConfig, generate_synthetic_stream
from f2ocl.encoder import EncoderConfig
from f2ocl.errors import ConfigurationError, ParseError
from f2ocl.serialization import dumps_state, load_state, save_state, state_from_dict, state_to_dict
from f2ocl.trainer import TrainConfig, train_stream

ENC = EncoderConfig(input_dim=8, token_dim=8, num_content_tokens=4, num_heads=2, num_blocks=1)


@pytest.fixture(scope="module")
def trained():
    stream, _ = generate_synthetic_stream(StreamConfig(num_groups=2, classes_per_group=2, samples_per_class=10, input_dim=8, batch_size=4))
    state, _ = train_stream(stream, TrainConfig(prompt_length=3, passes=2), ENC)
    return state


def test_round_trip_is_bit_exact(trained, tmp_path):
    path = tmp_path / "state.json"
    save_state(trained, path)
    back = load_state(path)
    assert back.pool.class_ids == trained.pool.class_ids
    for a, b in zip(trained.pool, back.pool):
        assert a.key.tobytes() == b.key.tobytes() and a.prompt.tobytes() == b.prompt.tobytes()
        sa, sb = trained.slots[a.class_id], back.slots[a.class_id]
        assert sa.m.tobytes() == sb.m.tobytes() and sa.v.tobytes() == sb.v.tobytes() and sa.t == sb.t
    for store in ("store", "plain_store"):
        for a, b in zip(getattr(trained, store), getattr(back, store)):
            assert a.mu.tobytes() == b.mu.tobytes() and a.count == b.count
    assert dumps_state(back) == path.read_text()


def test_version_and_magic_are_checked(trained):
    data = state_to_dict(trained)
    with pytest.raises(ParseError, match="version"):
        state_from_dict({**data, "version": 99})
    with pytest.raises(ParseError):
        state_from_dict({**data, "magic": "nope"})
    with pytest.raises(ParseError, match="digest"):
        state_from_dict({**data, "encoder_digest": "0" * 64})
    with pytest.raises(ParseError):
        state_from_dict({k: v for k, v in data.items() if k != "prototypes"})


def test_invalid_json(tmp_path):
    path = tmp_path / "s.json"
    path.write_text("{not json")
    with pytest.raises(ParseError):
        load_state(path)


def test_config_defaults_and_seed_propagation():
    cfg = config_from_dict({"seed": 5}, env={})
    assert cfg.encoder.seed == cfg.train.seed == cfg.stream.seed == 5
    assert cfg.train.passes == 5 and cfg.train.prompt_length == 20 and cfg.stream.batch_size == 10


def test_env_seed_overrides():
    assert config_from_dict({"seed": 5}, env={"F2OCL_SEED": "9"}).train.seed == 9
    with pytest.raises(ConfigurationError):
        config_from_dict({}, env={"F2OCL_SEED": "x"})


@pytest.mark.parametrize(
    "raw",
    [
        {"bogus": 1},
        {"train": {"passes": 0}},
        {"train": {"lr": 0.1}},
        {"train": {"passes": "five"}},
        {"train": {"passes": 1.5}},
        {"stream": {"classes_per_group": 0}},
        {"encoder": {"input_dim": 16}},
        {"eval": {"k": 0}},
        {"seed": -1},
    ],
)
def test_bad_configs(raw):
    with pytest.raises(ConfigurationError):
        config_from_dict(raw, env={})


def test_overrides_and_echo(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"train": {"passes": 2}, "output_dir": "x"}))
    cfg = load_config(path, ["train.learning_rate=0.05", "stream.num_groups=3"], env={})
    assert cfg.train.passes == 2 and cfg.train.learning_rate == 0.05 and cfg.stream.num_groups == 3
    echo = cfg.echo()
    assert "output_dir" not in echo and echo["train"]["passes"] == 2
    with pytest.raises(ConfigurationError):
        load_config(None, ["train.passes"], env={})


def test_numbers_are_coerced():
    cfg = config_from_dict({"train": {"learning_rate": 1, "passes": 3.0}}, env={})
    assert isinstance(cfg.train.learning_rate, float) and cfg.train.passes == 3 and isinstance(cfg.train.passes, int)
    np.testing.assert_equal(cfg.train.learning_rate, 1.0)
