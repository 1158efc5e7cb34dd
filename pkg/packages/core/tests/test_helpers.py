import mock
import pytest

from QFP.core.helpers import clamp, config_hash, required_env, to_label


def test_required_env_present():
    with mock.patch.dict("os.environ", {"QFP_CONFIG": "/tmp/run.json"}):
        assert required_env("QFP_CONFIG") == "/tmp/run.json"


def test_required_env_default():
    with mock.patch.dict("os.environ", {}, clear=True):
        assert required_env("QFP_CONFIG", None) is None


def test_required_env_missing():
    with mock.patch.dict("os.environ", {}, clear=True):
        with pytest.raises(KeyError):
            required_env("QFP_CONFIG")


def test_clamp():
    assert clamp(0.0, -0.2, 1.0) == 0.0
    assert clamp(0.0, 0.5, 1.0) == 0.5
    assert clamp(0.0, 1.2, 1.0) == 1.0


class TestConfigHash:
    def test_key_order_ignored(self):
        first = {"gate": {"mu1": 0.81, "alpha": 3.14}, "seed": 1}
        second = {"seed": 1, "gate": {"alpha": 3.14, "mu1": 0.81}}
        assert config_hash(first) == config_hash(second)

    def test_content_changes_hash(self):
        assert config_hash({"seed": 1}) != config_hash({"seed": 2})

    def test_length(self):
        assert len(config_hash({"seed": 1})) == 12
        assert len(config_hash({"seed": 1}, length=8)) == 8


@pytest.mark.parametrize(
    "position,label",
    [(0, "A"), (1, "B"), (25, "Z"), (26, "AA"), (27, "AB"), (52, "BA")],
)
def test_to_label(position, label):
    assert to_label(position) == label
