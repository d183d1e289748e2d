import dataclasses
import json

import numpy as np
import pytest

from nomasec import (NetworkConfig, SchemaError, db_to_watts,
                     gain_from_geometry, generate, load, save, serialize)
from helpers import unit_config


def test_determinism_same_seed():
    cfg = unit_config(seed=42, epsilon=0.2)
    a, b = generate(cfg), generate(cfg)
    assert a == b
    assert serialize(a) == serialize(b)


def test_different_seed_differs():
    a = generate(unit_config(seed=1))
    b = generate(unit_config(seed=2))
    assert not np.array_equal(a.g_user, b.g_user)


def test_zero_epsilon_estimates_exact():
    inst = generate(unit_config(seed=3, epsilon=0.0))
    assert np.array_equal(inst.g_eave_est, inst.g_eave_true)


def test_gain_rule_direct_evaluation():
    # d = 2 m, alpha = 4, unit fading: 2^-4
    assert gain_from_geometry(2.0, 4.0, 1.0) == pytest.approx(0.0625)


def test_error_bound_respected():
    cfg = unit_config(seed=5, epsilon=0.3, E=4)
    inst = generate(cfg)
    err = np.abs(inst.g_eave_true - inst.g_eave_est)
    assert err.max() <= 0.3 + 1e-12
    assert np.all(inst.g_eave_est > 0)


def test_geometry_users_inside_coverage():
    cfg = unit_config(seed=7, F=3, M_f=(2, 2, 2), p_max=(10.0, 5.0, 5.0))
    inst = generate(cfg)
    for f, members in enumerate(inst.users_of):
        radius = cfg.r_mbs if f == 0 else cfg.r_sbs
        d = np.linalg.norm(inst.pos_user[members] - inst.pos_bs[f], axis=1)
        assert np.all(d <= radius + 1e-9)


def test_instances_nest_across_sweeps():
    # growing E or N extends the draw without disturbing what exists
    small = generate(unit_config(seed=9, E=2, N=2))
    more_e = generate(unit_config(seed=9, E=4, N=2))
    more_n = generate(unit_config(seed=9, E=2, N=4))
    assert np.array_equal(small.g_eave_true, more_e.g_eave_true[:, :2, :])
    assert np.array_equal(small.g_user, more_n.g_user[:, :, :2])


def test_roundtrip_exact(tmp_path):
    inst = generate(unit_config(seed=11, epsilon=0.1))
    path = tmp_path / "inst.json"
    save(inst, path)
    again = load(path)
    assert again == inst
    save(again, tmp_path / "inst2.json")
    assert (tmp_path / "inst.json").read_bytes() == \
        (tmp_path / "inst2.json").read_bytes()


def test_load_rejects_negative_gain(tmp_path):
    inst = generate(unit_config(seed=13))
    doc = json.loads(serialize(inst))
    doc["g_user"][0][0][0] = -1.0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(SchemaError) as err:
        load(path)
    assert "g_user" in str(err.value)


def test_load_rejects_missing_field(tmp_path):
    inst = generate(unit_config(seed=13))
    doc = json.loads(serialize(inst))
    del doc["g_eave_est"]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(SchemaError) as err:
        load(path)
    assert err.value.field_name == "g_eave_est"


def test_load_rejects_error_bound_violation(tmp_path):
    inst = generate(unit_config(seed=13, epsilon=0.05))
    doc = json.loads(serialize(inst))
    doc["g_eave_est"][0][0][0] = doc["g_eave_true"][0][0][0] + 1.0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(SchemaError):
        load(path)


@pytest.mark.parametrize("field,value", [
    ("F", 0),
    ("N", 0),
    ("ell", 0),
    ("ell", 5),
    ("sigma2", 0.0),
    ("alpha", -1.0),
    ("epsilon", -0.1),
])
def test_config_validation(field, value):
    with pytest.raises(ValueError):
        dataclasses.replace(unit_config(), **{field: value})


def test_default_budgets_follow_db_helper():
    cfg = NetworkConfig(F=2, M_f=(2, 2))
    assert cfg.p_max[0] == pytest.approx(db_to_watts(16.0))
    assert cfg.p_max[1] == pytest.approx(db_to_watts(6.0))
