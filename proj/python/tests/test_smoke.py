import math

import pytest

import ebnf


@pytest.fixture(scope="module")
def sample():
    data, theta, sigma2 = ebnf.draw_scenario("S1", eta=4.0, n=200, k=10, seed=3)
    return data, theta, sigma2


def test_dataset_roundtrip():
    d = ebnf.make_dataset(["a", "b"], [1.0, -2.0], [0.5, 1.5], [10.0, 10.0])
    assert len(d) == 2
    assert d.homogeneous_k
    assert d.observations[0].id == "a"
    with pytest.raises(ValueError):
        ebnf.make_dataset(["a", "a"], [1.0, 2.0], [1.0, 1.0], [10.0, 10.0])


def test_fit_and_estimate(sample):
    data, theta, sigma2 = sample
    model = ebnf.DensityModel.fit(data)
    assert model.eval_f(0.0, 1.0, 10.0) > 0.0
    res = ebnf.estimate(model, data)
    assert len(res) == len(data)
    loss_nf = sum((r.theta_hat - t) ** 2 / s for r, t, s in zip(res, theta, sigma2))
    loss_ml = sum((o.x - t) ** 2 / s for o, t, s in zip(data.observations, theta, sigma2))
    assert loss_nf < loss_ml


def test_model_serialization(tmp_path, sample):
    data, _, _ = sample
    model = ebnf.DensityModel.fit(data)
    path = str(tmp_path / "model.json")
    model.save(path)
    back = ebnf.DensityModel.load(path)
    assert back.eval_f(0.3, 1.1, 10.0) == pytest.approx(model.eval_f(0.3, 1.1, 10.0))


def test_intervals(sample):
    data, _, _ = sample
    model = ebnf.DensityModel.fit(data)
    small = ebnf.make_dataset(
        [o.id for o in data.observations[:10]],
        [o.x for o in data.observations[:10]],
        [o.s2 for o in data.observations[:10]],
        [o.k for o in data.observations[:10]],
    )
    ivs = ebnf.interval(model, small, alpha=0.05, threads=2)
    for _, lo, hi in ivs:
        assert lo < hi
        assert math.isfinite(lo) and math.isfinite(hi)


def test_testing(sample):
    data, _, _ = sample
    model = ebnf.DensityModel.fit(data)
    res = ebnf.test(model, data, alpha=0.1, delta=1.0, threads=2)
    assert len(res) == len(data)
    assert all(0.0 <= r.pn <= 1.0 for r in res)
    assert any(r.rejected_nf for r in res)


def test_t_distribution():
    assert ebnf.t_cdf(0.0, 7.0) == pytest.approx(0.5)
    assert ebnf.t_cdf(2.228, 10.0) == pytest.approx(0.975, abs=1e-4)
    assert ebnf.t_quantile(0.975, 10.0) == pytest.approx(2.228139, abs=1e-4)


def test_stepup_rules():
    assert ebnf.fdr_reject([0.05, 0.01, 0.15], 0.05) == {0, 1}
    assert ebnf.bh_reject([0.02, 0.9, 0.01], 0.05) == {0, 2}


def test_estimation_study():
    ml, nf = ebnf.run_estimation_study("S1", eta=4.0, n=150, k=10, seed=5, reps=3, threads=2)
    assert abs(ml - 1.0) < 0.2
    assert nf < ml
