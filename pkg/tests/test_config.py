import json

import pytest

from bevtrack.config import (
    LifecycleParams,
    TrackerConfig,
    config_from_dict,
    config_to_dict,
    default_config_text,
    load_config,
    loads_config,
)
from bevtrack.errors import MalformedDocument, SchemaViolation


def test_shipped_defaults_equal_dataclass_defaults():
    assert load_config() == TrackerConfig()


def test_defaults_per_category():
    cfg = load_config()
    assert cfg.lifecycle_for("car") == LifecycleParams(confirm_hits=2, max_misses=3)
    assert cfg.lifecycle_for("pedestrian").max_misses == 2
    assert cfg.lifecycle_for("cyclist").max_misses == 2
    assert cfg.lifecycle_for("traffic_cone").max_misses == 3
    assert cfg.association.alpha == 0.5 and cfg.association.cost_kind == "ro_gdiou"
    assert cfg.rv_enabled is True and cfg.emit_coasted is False


def test_every_default_documented_inline():
    doc = json.loads(default_config_text())
    for section in ("lifecycle", "association", "runtime"):
        keys = {k for k in doc[section] if not k.startswith("_")}
        fields = keys if section != "lifecycle" else set(doc[section]["default"])
        for k in fields:
            assert f"_{k}" in doc[section], f"{section}.{k} lacks a comment"


def test_dict_round_trip():
    cfg = TrackerConfig(rv_enabled=False).with_overrides(cost_kind="giou", alpha=0.7)
    assert config_from_dict(json.loads(json.dumps(config_to_dict(cfg)))) == cfg


def test_partial_document_keeps_other_defaults():
    cfg = loads_config('{"runtime": {"rv_enabled": false}}')
    assert cfg == TrackerConfig(rv_enabled=False)


def test_group_and_category_keys():
    cfg = config_from_dict({"lifecycle": {"truck": {"max_misses": 7}, "default": {}}})
    assert cfg.lifecycle_for("truck").max_misses == 7
    assert cfg.lifecycle_for("car").max_misses == 3


def test_with_overrides_routes_association_fields():
    cfg = TrackerConfig().with_overrides(cost_kind="diou", rv_enabled=False)
    assert cfg.association.cost_kind == "diou" and cfg.rv_enabled is False


@pytest.mark.parametrize(
    "doc",
    [
        {"colour": {}},
        {"lifecycle": {"car": {"confirm_hits": 2}}},
        {"lifecycle": {"default": {"confirm_hits": 0}}},
        {"lifecycle": {"default": {"max_misses": -1}}},
        {"lifecycle": {"default": {"score_threshold": 0.5, "spawn_threshold": 0.2}}},
        {"lifecycle": {"default": {"nms_iou_threshold": 1.5}}},
        {"lifecycle": {"default": {"bogus": 1}}},
        {"association": {"cost_kind": "iou3d"}},
        {"association": {"weights": {"omega1": 1.0, "omega2": 0.5}}},
        {"association": {"threshold_bev": {"car": -0.5}}},
        {"association": {"alpha": 1.5}},
        {"noise": {"default": {"position_meas_var": -1.0}}},
        {"noise": {"car": {}}},
        {"runtime": {"rv_enabled": "yes"}},
        {"runtime": {"threads": 4}},
        [],
    ],
)
def test_invalid_documents(doc):
    with pytest.raises(SchemaViolation):
        config_from_dict(doc)


def test_malformed_json():
    with pytest.raises(MalformedDocument):
        loads_config("{")


def test_load_from_path(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text('{"association": {"cost_kind": "giou"}, "_note": "ignored"}')
    assert load_config(path).association.cost_kind == "giou"
