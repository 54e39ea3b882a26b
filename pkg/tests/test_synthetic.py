import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mohpi.configspace import encode
from mohpi.errors import EmptyGroupError, SchemaError, ShapeMismatchError, UnsupportedBasisError
from mohpi.pareto import WeightVector
from mohpi.synthetic import analytic_importance, dp_loss, load_problem, make_problem, sample_runs


def _problem(objectives, dims=("x1", "x2")):
    return make_problem({"dims": list(dims), "objectives": objectives})


def test_make_problem_and_evaluate():
    p = _problem([
        {"name": "f1", "terms": [{"dim": "x1", "basis": "linear", "coef": 3.0}, {"dim": "x2"}]},
        {"name": "f2", "terms": [{"dim": "x2", "basis": "quadratic"}],
         "interactions": [{"dims": ["x1", "x2"], "coef": 2.0}]},
    ])
    assert p.space.names == ["x1", "x2"]
    assert p.evaluate([[0.5, 0.5]]).tolist() == [[2.0, 0.75]]
    assert p.has_interactions


def test_step_and_sin_bases():
    p = _problem([{"name": "f", "terms": [{"dim": "x1", "basis": "step"}, {"dim": "x2", "basis": "sin"}]}])
    assert p.evaluate([[0.5, 0.25], [0.51, 0.0]])[:, 0] == pytest.approx([1.0, 1.0], abs=1e-12)


@pytest.mark.parametrize("spec", [
    {"dims": ["x1"], "objectives": [{"name": "f", "terms": [{"dim": "x9"}]}]},
    {"dims": ["x1"], "objectives": [{"name": "f", "terms": [{"dim": "x1", "basis": "cubic"}]}]},
    {"dims": ["x1"], "objectives": []},
    {"dims": ["x1"], "objectives": [{"name": "f", "noise_sigma": -1}]},
    {"dims": ["x1"], "objectives": [{"name": "f"}], "extra": 1},
    {"dims": ["x1", "x2"], "objectives": [{"name": "f", "interactions": [{"dims": ["x1", "x1"]}]}]},
])
def test_invalid_problems(spec):
    with pytest.raises(SchemaError):
        make_problem(spec)


def test_bundled_problems_load():
    assert load_problem("additive").space.names == ["x1", "x2"]
    assert len(load_problem("mlp_tradeoff").space) == 8


def test_sample_runs_deterministic():
    p = load_problem("mlp_tradeoff")
    a, b = sample_runs(p, 100, seed=9), sample_runs(p, 100, seed=9)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.raw(), b.raw())
    assert not np.array_equal(a.X, sample_runs(p, 100, seed=10).X)
    assert a.n == 100
    for cfg, x in zip(a.configs, a.X):
        assert np.array_equal(encode(p.space, cfg), x)


def test_noise_free_is_deterministic_per_config():
    p = load_problem("additive")
    ds = sample_runs(p, 20, seed=1)
    assert np.array_equal(p.evaluate(ds.X), ds.raw())


def test_noise_is_seeded():
    p = _problem([{"name": "f1", "terms": [{"dim": "x1"}], "noise_sigma": 0.1}, {"name": "f2"}])
    a, b = sample_runs(p, 50, seed=3), sample_runs(p, 50, seed=3)
    assert np.array_equal(a.raw(), b.raw())
    assert not np.array_equal(a.raw()[:, 0], p.evaluate(a.X)[:, 0])


def test_analytic_separable():
    p = load_problem("separable")
    assert analytic_importance(p, WeightVector(1, 0)) == pytest.approx([1.0, 0.0], abs=1e-12)
    assert analytic_importance(p, WeightVector(0.5, 0.5)) == pytest.approx([0.5, 0.5], abs=1e-12)


def test_analytic_additive():
    assert analytic_importance(load_problem("additive"), WeightVector(1, 0)) == pytest.approx([0.9, 0.1], abs=1e-12)


def test_analytic_quadrature_bases():
    # Var(sin(2 pi u)) = 1/2 and Var(1[u > 1/2]) = 1/4 for u ~ U(0, 1)
    p = _problem([{"name": "f1", "terms": [{"dim": "x1", "basis": "sin"}, {"dim": "x2", "basis": "step"}]},
                  {"name": "f2", "terms": [{"dim": "x1"}]}])
    assert analytic_importance(p, WeightVector(1, 0)) == pytest.approx([2 / 3, 1 / 3], abs=1e-6)


def test_analytic_interaction_matches_grid():
    p = _problem([{"name": "f1", "terms": [{"dim": "x1"}, {"dim": "x2", "basis": "quadratic", "coef": 0.5}],
                   "interactions": [{"dims": ["x1", "x2"], "coef": 2.0}]},
                  {"name": "f2", "terms": [{"dim": "x2"}]}])
    ds = sample_runs(p, 200, seed=0)
    w = WeightVector(0.7, 0.3)
    got = analytic_importance(p, w, dataset=ds)
    g = (np.arange(2000) + 0.5) / 2000
    U1, U2 = np.meshgrid(g, g, indexing="ij")
    F = p.evaluate(np.column_stack([U1.ravel(), U2.ravel()]))
    r = ds.raw()
    y = w.w1 * F[:, 0] / np.ptp(r[:, 0]) + w.w2 * F[:, 1] / np.ptp(r[:, 1])
    Y = y.reshape(U1.shape)
    var = Y.var()
    oracle = [Y.mean(axis=1).var() / var, Y.mean(axis=0).var() / var]
    assert got == pytest.approx(oracle, abs=1e-6)
    assert got.sum() < 1.0


def test_analytic_needs_dataset_with_interactions():
    p = _problem([{"name": "f1", "interactions": [{"dims": ["x1", "x2"]}]}, {"name": "f2"}])
    with pytest.raises(UnsupportedBasisError):
        analytic_importance(p, WeightVector(1, 0))


def test_analytic_rejects_conditional_space():
    space = {"hyperparameters": [
        {"name": "a", "type": "boolean", "default": True},
        {"name": "b", "type": "float", "lower": 0.0, "upper": 1.0, "default": 0.5,
         "condition": {"parent": "a", "value": True}}]}
    p = make_problem({"space": space, "objectives": [{"name": "f1", "terms": [{"dim": "b"}]}, {"name": "f2"}]})
    with pytest.raises(UnsupportedBasisError):
        analytic_importance(p, WeightVector(1, 0))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.1, 5.0), min_size=3, max_size=3), st.floats(0.0, 1.0))
def test_analytic_additive_fractions_sum_to_one(coefs, w1):
    bases = ["linear", "quadratic", "linear"]
    terms = [{"dim": f"x{i + 1}", "basis": b, "coef": c} for i, (b, c) in enumerate(zip(bases, coefs))]
    p = _problem([{"name": "f1", "terms": terms[:2]}, {"name": "f2", "terms": terms[1:]}], dims=("x1", "x2", "x3"))
    assert analytic_importance(p, WeightVector(w1, 1 - w1)).sum() == pytest.approx(1.0, abs=1e-9)


def test_dp_loss_examples():
    assert dp_loss([1, 1, 1, 1], [0, 0, 1, 1]) == 0.0
    assert dp_loss([1, 0, 1, 1], [0, 0, 1, 1]) == 0.5
    assert dp_loss([1, 1, 0, 0], [0, 0, 1, 1]) == 1.0


def test_dp_loss_shared_n():
    # group sums 2 and 0 over a total of 4
    assert dp_loss([1, 1, 0, 0], [0, 0, 1, 1], shared_n=True) == 0.5
    assert dp_loss([1, 1, 0, 0, 0, 0], [0, 0, 1, 1, 1, 1], shared_n=True) == pytest.approx(1 / 3)


def test_dp_loss_errors():
    with pytest.raises(EmptyGroupError):
        dp_loss([1, 0], [1, 1])
    with pytest.raises(ShapeMismatchError):
        dp_loss([1, 0, 1], [0, 1])


binary = st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=2, max_size=50).filter(
    lambda rows: len({s for _, s in rows}) == 2)


@given(binary)
def test_dp_loss_properties(rows):
    y = np.array([r[0] for r in rows])
    s = np.array([r[1] for r in rows])
    loss = dp_loss(y, s)
    assert 0.0 <= loss <= 1.0
    assert dp_loss(y, 1 - s) == loss
    assert dp_loss(1 - y, s) == pytest.approx(loss, abs=1e-12)
