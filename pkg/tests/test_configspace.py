import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mohpi.configspace import (
    INACTIVE,
    decode,
    default_config,
    encode,
    load_space,
    parse_space,
)
from mohpi.errors import (
    ConditionError,
    DomainError,
    InactiveValueError,
    OutOfDomainError,
    OutOfRangeError,
    SchemaError,
)


def _space(*hps):
    return parse_space(json.dumps({"hyperparameters": list(hps)}))


COND_SPACE = [
    {"name": "optimizer", "type": "categorical", "categories": ["sgd", "adam"], "default": "sgd"},
    {"name": "momentum", "type": "float", "lower": 0.0, "upper": 0.99, "default": 0.9,
     "condition": {"parent": "optimizer", "value": "sgd"}},
    {"name": "lr", "type": "float", "lower": 1e-4, "upper": 1e-1, "log": True, "default": 1e-2},
]


@pytest.fixture(scope="module")
def mlp():
    return load_space("mlp_mnist")


def test_mlp_space_bounds_and_defaults(mlp):
    expected = {
        "n_layer": ("int", 1, 5, False, 3),
        "n_neurons": ("int", 8, 256, True, 132),
        "initial_lr": ("float", 1e-4, 1e-1, True, 1e-2),
        "alpha": ("float", 1e-4, 1.0, True, 0.1),
        "beta_1": ("float", 0.1, 1.0, True, 0.5),
        "beta_2": ("float", 0.1, 1.0, True, 0.5),
        "epsilon": ("float", 1e-10, 1e-6, True, 1e-8),
    }
    assert len(mlp) == 8
    for name, (kind, lo, hi, log, default) in expected.items():
        spec = mlp[name]
        assert (spec.kind, spec.lower, spec.upper, spec.log_scale, spec.default) == (kind, lo, hi, log, default)
    assert mlp["activation"].categories == ("logistic", "tanh", "relu")
    assert mlp["activation"].default == "tanh"


def test_resnet_space_loads():
    space = load_space("resnet_cifar10")
    assert len(space) == 7
    assert "learning_rate" in space


def test_single_hp_space():
    space = _space({"name": "x", "type": "float", "lower": 0.0, "upper": 1.0, "default": 0.5})
    assert space.names == ["x"]
    assert default_config(space) == {"x": 0.5}


def test_default_outside_domain():
    with pytest.raises(DomainError):
        _space({"name": "k", "type": "int", "lower": 1, "upper": 5, "default": 7})


@pytest.mark.parametrize("hp,err", [
    ({"name": "k", "type": "int", "lower": 1, "default": 2}, SchemaError),
    ({"name": "k", "type": "complex", "default": 2}, SchemaError),
    ({"name": "k", "type": "int", "lower": 1, "upper": 5, "default": 2, "step": 1}, SchemaError),
    ({"name": "k", "type": "int", "lower": 5, "upper": 5, "default": 5}, DomainError),
    ({"name": "k", "type": "float", "lower": 0.0, "upper": 1.0, "log": True, "default": 0.5}, DomainError),
    ({"name": "c", "type": "categorical", "categories": ["a"], "default": "a"}, DomainError),
    ({"name": "c", "type": "categorical", "categories": ["a", "b"], "default": "z"}, DomainError),
])
def test_invalid_hyperparameters(hp, err):
    with pytest.raises(err):
        _space(hp)


def test_invalid_json():
    with pytest.raises(SchemaError):
        parse_space("{not json")


def test_unknown_parent():
    with pytest.raises(ConditionError):
        _space({"name": "m", "type": "float", "lower": 0.0, "upper": 1.0, "default": 0.5,
                "condition": {"parent": "nope", "value": "sgd"}})


def test_conditional_cycle():
    a = {"name": "a", "type": "boolean", "default": True, "condition": {"parent": "b", "value": True}}
    b = {"name": "b", "type": "boolean", "default": True, "condition": {"parent": "a", "value": True}}
    with pytest.raises(ConditionError, match="cycle"):
        _space(a, b)


def test_nested_conditionals_rejected():
    a = {"name": "a", "type": "boolean", "default": True}
    b = {"name": "b", "type": "boolean", "default": True, "condition": {"parent": "a", "value": True}}
    c = {"name": "c", "type": "boolean", "default": True, "condition": {"parent": "b", "value": True}}
    with pytest.raises(ConditionError):
        _space(a, b, c)


def test_encode_examples(mlp):
    cfg = default_config(mlp)
    i = mlp.index("n_neurons")
    assert encode(mlp, dict(cfg, n_neurons=8))[i] == 0.0
    assert encode(mlp, dict(cfg, n_neurons=256))[i] == 1.0
    assert encode(mlp, dict(cfg, activation="tanh"))[mlp.index("activation")] == 0.5
    assert encode(mlp, dict(cfg, activation="relu"))[mlp.index("activation")] == 1.0


def test_encode_inactive_is_sentinel():
    space = _space(*COND_SPACE)
    x = encode(space, {"optimizer": "adam", "lr": 0.01})
    assert x[1] == INACTIVE
    assert x[0] == 1.0


def test_encode_rejects_inactive_value():
    space = _space(*COND_SPACE)
    with pytest.raises(InactiveValueError):
        encode(space, {"optimizer": "adam", "momentum": 0.5, "lr": 0.01})
    assert encode(space, {"optimizer": "adam", "momentum": 0.5, "lr": 0.01}, strict=False)[1] == INACTIVE


def test_encode_out_of_domain(mlp):
    with pytest.raises(OutOfDomainError):
        encode(mlp, dict(default_config(mlp), n_layer=9))


def test_decode_zeros_gives_lower_bounds(mlp):
    cfg = decode(mlp, np.zeros(len(mlp)))
    assert cfg["n_layer"] == 1
    assert cfg["n_neurons"] == 8
    assert cfg["activation"] == "logistic"
    assert cfg["initial_lr"] == pytest.approx(1e-4, rel=1e-12)
    assert cfg["epsilon"] == pytest.approx(1e-10, rel=1e-12)


def test_decode_default_round_trip(mlp):
    cfg = default_config(mlp)
    assert decode(mlp, encode(mlp, cfg)) == pytest.approx(cfg, rel=1e-12)


def test_decode_out_of_range(mlp):
    v = np.zeros(len(mlp))
    v[0] = 1.7
    with pytest.raises(OutOfRangeError):
        decode(mlp, v)


def test_default_config_table(mlp):
    assert default_config(mlp) == {
        "n_layer": 3, "n_neurons": 132, "activation": "tanh", "initial_lr": 0.01,
        "alpha": 0.1, "beta_1": 0.5, "beta_2": 0.5, "epsilon": 1e-8,
    }


def test_default_config_skips_inactive_child():
    space = _space(*COND_SPACE[:1], dict(COND_SPACE[1], condition={"parent": "optimizer", "value": "adam"}),
                   COND_SPACE[2])
    assert "momentum" not in default_config(space)


def test_conditional_domain():
    space = _space(*COND_SPACE)
    assert space.domain().tolist() == [[0.0, 1.0], [-1.0, 1.0], [0.0, 1.0]]


def test_space_dict_round_trip(mlp):
    assert parse_space(json.dumps(mlp.to_dict())) == mlp


# properties

unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.lists(unit, min_size=8, max_size=8))
def test_decode_encode_decode_is_stable(mlp, us):
    # decode snaps onto the grid of representable values; after that the
    # round trip is a fixed point
    cfg = decode(mlp, np.array(us))
    again = decode(mlp, encode(mlp, cfg))
    assert again == pytest.approx(cfg, rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=1e-4, max_value=1e-1), st.floats(min_value=1e-4, max_value=1e-1))
def test_log_encoding_monotone(mlp, a, b):
    spec = mlp["initial_lr"]
    if a < b:
        assert spec.to_unit(a) <= spec.to_unit(b)
    assert spec.from_unit(spec.to_unit(a)) == pytest.approx(a, rel=1e-9)


@given(st.floats(min_value=1e-6, max_value=1e3), st.floats(min_value=1.01, max_value=1e4))
def test_geometric_mean_maps_to_half(lo, ratio):
    hi = lo * ratio
    space = _space({"name": "x", "type": "float", "lower": lo, "upper": hi, "log": True, "default": hi})
    assert space["x"].to_unit(math.sqrt(lo * hi)) == pytest.approx(0.5, abs=1e-9)


@given(st.sampled_from(["sgd", "adam"]), st.floats(min_value=0.0, max_value=0.99))
def test_sentinel_iff_inactive(opt, momentum):
    space = _space(*COND_SPACE)
    cfg = {"optimizer": opt, "lr": 0.01}
    if opt == "sgd":
        cfg["momentum"] = momentum
    x = encode(space, cfg)
    assert (x[1] == INACTIVE) == (opt != "sgd")
    assert np.all(x[[0, 2]] >= 0.0)
