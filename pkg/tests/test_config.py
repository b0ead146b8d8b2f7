import json
from pathlib import Path

import pytest

from neural_ac import config
from neural_ac.experiments import BENCHMARKS, benchmark_config, benchmark_text


def test_defaults_and_round_trip():
    cfg = config.parse_config('{"schema_version": 1}')
    assert cfg == config.RunConfig()
    again = config.parse_config(json.dumps(cfg.to_dict()))
    assert again == cfg


def test_int_accepted_as_float():
    cfg = config.parse_config('{"schema_version": 1, "problem": {"gamma": 0, "reward_scale": 1}}'
                              .replace('"gamma": 0', '"gamma": 0.5'))
    assert isinstance(cfg.problem.reward_scale, float)


@pytest.mark.parametrize("text, line, fragment", [
    ('{\n  "schema_version": 2\n}', 2, "unsupported schema_version"),
    ('{\n  "problem": {}\n}', 1, "missing schema_version"),
    ('{\n  "schema_version": 1,\n  "bogus": 3\n}', 3, "unknown top-level key"),
    ('{\n  "schema_version": 1,\n  "critic": {\n    "J": 2,\n    "Jj": 3\n  }\n}', 5, "unknown key 'Jj'"),
    ('{\n  "schema_version": 1,\n  "critic": {\n    "L": "many"\n  }\n}', 4, "wrong type"),
    ('{\n  "schema_version": 1,\n  "train": {\n    "K": true\n  }\n}', 4, "wrong type"),
    ('{\n  "schema_version": 1,\n  "problem": {\n    "gamma": 1.5\n  }\n}', 3, "gamma"),
    ('{\n  "schema_version": 1,\n  "sweep": {"seeds": []}\n}', 3, "seeds"),
    ('{\n  "schema_version": 1,\n  ]', 3, "invalid JSON"),
])
def test_errors_name_the_line(text, line, fragment):
    with pytest.raises(config.ConfigError) as info:
        config.parse_config(text, "run.json")
    assert info.value.line == line
    assert fragment in str(info.value)
    assert str(info.value).startswith(f"run.json:{line}:")


def test_required_sections_and_missing_file(tmp_path):
    with pytest.raises(config.ConfigError, match="missing section 'train'"):
        config.parse_config('{"schema_version": 1}', required=("train",))
    with pytest.raises(config.ConfigError, match="not found"):
        config.load_config(tmp_path / "nope.json")


def test_every_benchmark_parses():
    for name in BENCHMARKS:
        assert benchmark_config(name) == config.parse_config(benchmark_text(name))
    cfg = benchmark_config("two_state", train={"K": 3})
    assert cfg.train.K == 3 and BENCHMARKS["two_state"]["train"]["K"] == 200


def test_hash_is_content_hash(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(benchmark_text("mixing"))
    _, text = config.load_config(p)
    assert config.config_hash(text) == config.config_hash(p.read_text())
    assert config.config_hash(text) != config.config_hash(text + " ")


def test_shipped_config_files_match_benchmarks():
    root = Path(__file__).resolve().parents[1] / "configs"
    for name in BENCHMARKS:
        assert (root / f"{name}.json").read_text() == benchmark_text(name)
