import json

import pytest

from careprofiles.core.errors import ConfigError
from careprofiles.models.config import AppConfig, MappingConfig
from careprofiles.utils.config_loader import (
    load_config,
    load_generator_spec,
    load_mapping,
    merge_dicts,
    save_config,
    substitute_env_vars,
)
from tests.conftest import PROJECT_ROOT, TEMPLATES


ACTIVE_CONFIG = str(PROJECT_ROOT / "configs" / "active" / "config.yaml")


def test_defaults():
    config = AppConfig()
    assert config.seed == 42
    assert config.model.alpha == 0.5
    assert config.model.epsilon == 1e-9
    assert config.model.lambda_max == 1e4
    assert config.clustering.n_thresholds == 50
    assert config.clustering.resolve_min_leaf(1_000) == 50
    assert config.clustering.resolve_min_leaf(20_000) == 200
    assert config.network.coverage == 0.9
    assert config.study.labels == ["CL", "ER", "HO", "NP", "PO", "RX"]


def test_active_config_matches_defaults(monkeypatch):
    monkeypatch.delenv("CP_SEED", raising=False)
    config = load_config(ACTIVE_CONFIG, base_config_path=None)
    assert config == AppConfig()


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv("CP_SEED", "7")
    assert load_config(ACTIVE_CONFIG, base_config_path=None).seed == 7


def test_substitute_env_vars(monkeypatch):
    monkeypatch.setenv("CP_TEST_VALUE", "abc")
    monkeypatch.delenv("CP_MISSING", raising=False)
    assert substitute_env_vars("x: ${CP_TEST_VALUE}") == "x: abc"
    assert substitute_env_vars("x: ${CP_MISSING:3}") == "x: 3"
    assert substitute_env_vars("x: ${CP_MISSING}") == "x: ${CP_MISSING}"


def test_overrides_win(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("clustering:\n  n_thresholds: 10\n  max_profiles: 5\n")
    config = load_config(str(path), overrides={"clustering": {"max_profiles": 3}}, base_config_path=None)
    assert config.clustering.n_thresholds == 10
    assert config.clustering.max_profiles == 3


def test_merge_dicts_is_recursive():
    merged = merge_dicts({"a": {"b": 1, "c": 2}, "d": 1}, {"a": {"c": 3}})
    assert merged == {"a": {"b": 1, "c": 3}, "d": 1}


def test_save_and_reload(tmp_path):
    path = tmp_path / "saved.yaml"
    config = AppConfig.model_validate({"seed": 5, "network": {"coverage": 0.8}})
    save_config(config, str(path))
    assert load_config(str(path), base_config_path=None) == config


def test_invalid_yaml(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("clustering: [unclosed\n")
    with pytest.raises(ConfigError, match="Invalid YAML"):
        load_config(str(path), base_config_path=None)


def test_missing_file():
    with pytest.raises(ConfigError, match="not found"):
        load_config("does/not/exist.yaml", base_config_path=None)


@pytest.mark.parametrize(
    "section, values",
    [
        ("network", {"coverage": 0.0}),
        ("network", {"tier_low": 0.7, "tier_high": 0.6}),
        ("clustering", {"n_thresholds": 0}),
        ("model", {"alpha": -1.0}),
        ("bench", {"sizes": [10, 5]}),
        ("study", {"start": "2010-01-01", "end": "2009-01-01"}),
    ],
)
def test_out_of_range_values(section, values):
    with pytest.raises(ConfigError):
        load_config(overrides={section: values}, base_config_path=None)


def test_mapping_template_loads():
    mapping = load_mapping(str(TEMPLATES / "mapping.json"))
    assert mapping.diagnosis_allowlist == ["493"]
    assert mapping.label_for("OT", "23", "") == "ER"
    assert mapping.label_for("IP", "", "01") == "HO"
    assert mapping.label_for("OT", "11", "08") == "PO"
    assert mapping.label_for("OT", "11", "12") == "NP"
    assert mapping.label_for("OT", "50", "") == "CL"
    assert mapping.label_for("OT", "99", "") is None


def _mapping_payload():
    return json.loads((TEMPLATES / "mapping.json").read_text())


def test_overlapping_rules_are_rejected(tmp_path):
    payload = _mapping_payload()
    payload["event_map"].append({"record_kind": "OT", "place_codes": ["23"], "label": "CL"})
    path = tmp_path / "mapping.json"
    path.write_text(json.dumps(payload))
    with pytest.raises(ConfigError, match="overlap"):
        load_mapping(str(path))


def test_mapping_schema_is_checked(tmp_path):
    payload = _mapping_payload()
    payload["schema"] = "careprofiles/mapping/v9"
    path = tmp_path / "mapping.json"
    path.write_text(json.dumps(payload))
    with pytest.raises(ConfigError, match="schema"):
        load_mapping(str(path))


def test_mapping_labels_must_exist():
    payload = _mapping_payload()
    payload["rx_label"] = "PHARMACY"
    with pytest.raises(ValueError):
        MappingConfig.model_validate(payload)


def test_generator_weights_must_sum_to_one(tmp_path):
    payload = json.loads((TEMPLATES / "generator_two_profiles.json").read_text())
    payload["profiles"][0]["weight"] = 0.5
    path = tmp_path / "generator.json"
    path.write_text(json.dumps(payload))
    with pytest.raises(ConfigError, match="sum to 1"):
        load_generator_spec(str(path))
