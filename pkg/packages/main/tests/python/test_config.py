import json
import math
import os
from pathlib import Path

import mock
import pytest

from QFP.Config import (
    DEFAULT_CONFIG,
    ENV_CONFIG,
    Config,
    RunConfig,
    SchemaError,
    apply_overrides,
    load_config,
    parse_value,
    resolve_config_path,
)
from QFP.Resonator import gaussian_envelope


@pytest.fixture(autouse=True)
def no_env_config(monkeypatch):
    monkeypatch.delenv(ENV_CONFIG, raising=False)


@pytest.fixture
def write_config(tmp_path):
    def write(doc, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return str(path)

    return write


def test_bundled_default():
    config = load_config()
    assert config.seed == 2021
    assert config.gate.alpha == pytest.approx(math.pi)
    assert len(config.resonator.transmission) == 5
    assert config.network.pairs == 17


def test_default_path_resolution():
    assert resolve_config_path() == DEFAULT_CONFIG
    assert resolve_config_path("other.json") == Path("other.json")


def test_path_from_environment(write_config):
    path = write_config({"seed": 11})
    with mock.patch.dict(os.environ, {ENV_CONFIG: path}):
        assert load_config().seed == 11


def test_explicit_path_wins(write_config):
    env_path = write_config({"seed": 11}, "env.json")
    path = write_config({"seed": 12}, "explicit.json")
    with mock.patch.dict(os.environ, {ENV_CONFIG: env_path}):
        assert load_config(path).seed == 12


def test_missing_sections_take_defaults():
    assert RunConfig.from_dict({}) == RunConfig()


def test_hash_is_stable():
    assert load_config().hash == load_config().hash
    assert len(load_config().hash) == 12


def test_hash_follows_content():
    assert load_config().hash != load_config(overrides=["gate.alpha=0"]).hash


@pytest.mark.parametrize(
    "override, attribute, expected",
    [
        ("gate.alpha=0", ("gate", "alpha"), 0.0),
        ("tomography.anchor=flux", ("tomography", "anchor"), "flux"),
        ("$.seed=7", ("seed",), 7),
        ("detector.accidentals=false", ("detector", "accidentals"), False),
    ],
)
def test_overrides(override, attribute, expected):
    value = load_config(overrides=[override])
    for name in attribute:
        value = getattr(value, name)
    assert value == expected


def test_override_creates_unknown_key():
    with pytest.raises(SchemaError):
        load_config(overrides=["gate.beta=1"])


@pytest.mark.parametrize("override", ["gate.alpha", "=3"])
def test_malformed_override(override):
    with pytest.raises(SchemaError):
        apply_overrides({}, [override])


def test_parse_value():
    assert parse_value("1.5") == 1.5
    assert parse_value("true") is True
    assert parse_value("flux") == "flux"


@pytest.mark.parametrize(
    "doc",
    [
        {"unknown": 1},
        {"gate": 3},
        {"gate": {"beta": 1.0}},
        {"gate": {"alpha": "pi"}},
        {"gate": {"mu1": True}},
        {"network": {"users": 2.5}},
        {"resonator": {"envelope": {"model": "gaussian", "sigma": 3}}},
        {"resonator": {"envelope": {"model": "lorentzian"}}},
        {"resonator": {"transmission": [{"n": 40}]}},
        {"tomography": {"anchor": "maximum-likelihood"}},
        {"qkd": {"threshold": 0.6}},
        {"network": {"policy": "random"}},
        {"seed": "2021"},
        [],
    ],
)
def test_schema_errors(doc):
    with pytest.raises(SchemaError):
        RunConfig.from_dict(doc)


def test_integer_accepted_for_float():
    config = RunConfig.from_dict({"gate": {"alpha": 3}})
    assert config.gate.alpha == 3.0
    assert isinstance(config.gate.alpha, float)


def test_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{")
    with pytest.raises(SchemaError):
        load_config(str(path))


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(str(tmp_path / "missing.json"))


def test_resonator_model_applies_dips():
    config = load_config()
    model = config.resonator.model()
    envelope = gaussian_envelope(model.grid, 90.0)
    assert model.transmission(50) == pytest.approx(0.05 * envelope[50])
    assert model.transmission(49) == pytest.approx(envelope[49])


def test_gate_kwargs():
    kwargs = load_config().gate.gate_kwargs()
    assert kwargs["mu1"] == 0.81
    assert kwargs["dispersion_ps_per_nm"] == 0.0
    assert "alpha" not in kwargs


def test_detector_from_losses():
    detector = load_config().detector.detector()
    assert detector.path_transmission[0] == pytest.approx(10 ** -1.88)
    assert detector.accidentals


def test_keywords():
    library = Config()
    config = library.load_run_config(None, "seed=3")
    assert config.seed == 3
    assert library.get_config_hash(config) == config.hash
