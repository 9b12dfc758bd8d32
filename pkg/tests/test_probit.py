import math

import numpy as np
import pytest
from scipy import stats

from rbmh import probit
from rbmh.bench.experiment import default_probit_data_path
from rbmh.core import run_chain


@pytest.fixture(scope="module")
def synthetic():
    return probit.synthetic_probit_data((0.3, 0.8), 2000, np.random.default_rng(17))


def test_log_posterior_matches_direct_formula(synthetic):
    b = np.array([0.1, -0.4])
    eta = synthetic.covariates @ b
    y = synthetic.outcomes
    direct = np.sum(y * stats.norm.logcdf(eta) + (1 - y) * stats.norm.logcdf(-eta))
    assert float(probit.log_posterior(b, synthetic)) == pytest.approx(direct, rel=1e-12)


def test_log_posterior_vectorised(synthetic):
    bs = np.array([[0.0, 0.0], [0.3, 0.8], [-1.0, 2.0]])
    out = probit.log_posterior(bs, synthetic)
    assert out.shape == (3,)
    for i in range(3):
        assert out[i] == pytest.approx(float(probit.log_posterior(bs[i], synthetic)), rel=1e-14)


def test_log_posterior_extreme_values_are_finite(synthetic):
    v = float(probit.log_posterior(np.array([40.0, -40.0]), synthetic))
    assert np.isfinite(v) and v < 0
    with pytest.raises(ValueError):
        probit.log_posterior(np.array([np.nan, 0.0]), synthetic)


def test_gradient_matches_finite_differences(synthetic):
    rng = np.random.default_rng(2)
    eps = 1e-6
    for b in rng.normal(0, 1, size=(20, 2)):
        g = probit.grad_log_posterior(b, synthetic)
        fd = np.array([(probit.log_posterior(b + eps * e, synthetic)
                        - probit.log_posterior(b - eps * e, synthetic)) / (2 * eps) for e in np.eye(2)])
        assert np.max(np.abs(g - fd) / np.maximum(np.abs(g), 1.0)) < 1e-5


def test_hessian_matches_finite_differences(synthetic):
    b = np.array([0.2, 0.5])
    eps = 1e-5
    H = probit.hess_log_posterior(b, synthetic)
    fd = np.column_stack([(probit.grad_log_posterior(b + eps * e, synthetic)
                           - probit.grad_log_posterior(b - eps * e, synthetic)) / (2 * eps) for e in np.eye(2)])
    np.testing.assert_allclose(H, fd, rtol=1e-5)
    assert np.all(np.linalg.eigvalsh(H) < 0)


def test_mle_recovers_generating_beta():
    data = probit.synthetic_probit_data((0.3, 0.8), 10_000, np.random.default_rng(1))
    b = probit.fit_mle(data)
    se = np.sqrt(np.diag(np.linalg.inv(-probit.hess_log_posterior(b, data))))
    assert np.all(np.abs(b - [0.3, 0.8]) <= 3 * se)
    assert np.linalg.norm(probit.grad_log_posterior(b, data)) < 1e-6


def test_mle_nonconvergence_reports_trace():
    data = probit.synthetic_probit_data((0.3, 0.8), 500, np.random.default_rng(1))
    with pytest.raises(probit.ConvergenceError) as info:
        probit.fit_mle(data, max_iter=1)
    assert len(info.value.trace) == 1


def test_data_validation():
    with pytest.raises(ValueError, match="single-class"):
        probit.make_probit_data([1.0, 2.0, 3.0], [1, 1, 1])
    with pytest.raises(ValueError):
        probit.make_probit_data([1.0, np.nan], [0, 1])
    with pytest.raises(ValueError):
        probit.make_probit_data([1.0, 2.0], [0, 2])


def test_load_pima_formats(tmp_path):
    csv_file = tmp_path / "a.csv"
    csv_file.write_text("npreg,bmi,type\n1,30.5,Yes\n2,22.1,No\n0,35.0,Yes\n")
    d = probit.load_pima(csv_file)
    assert d.outcomes.tolist() == [1, 0, 1]
    assert d.covariates[:, 1].mean() == pytest.approx(0.0, abs=1e-12)
    # R-style whitespace table whose header lacks the row-name column
    ws = tmp_path / "b.txt"
    ws.write_text('"npreg" "bmi" "type"\n"1" 1 30.5 "Yes"\n"2" 2 22.1 "No"\n')
    d = probit.load_pima(ws)
    assert d.outcomes.tolist() == [1, 0]
    bad = tmp_path / "c.csv"
    bad.write_text("npreg,bmi,type\n1,,Yes\n")
    with pytest.raises(ValueError, match="row 2"):
        probit.load_pima(bad)
    with pytest.raises(ValueError, match="columns"):
        probit.load_pima(csv_file, predictor="glu")


def test_bundled_data_loads():
    d = probit.load_pima(default_probit_data_path())
    assert d.n_obs == 200
    assert 0 < d.outcomes.mean() < 1
    b = probit.fit_mle(d)
    assert np.all(np.isfinite(b))


def test_probit_chain_runs_near_mle(synthetic):
    t, q = probit.make_probit_rw(synthetic, 0.05)
    b = probit.fit_mle(synthetic)
    ch = run_chain(t, q, b, 3000, 8)
    assert 0.2 < ch.acceptance_rate < 0.9
    post_sd = np.sqrt(np.diag(np.linalg.inv(-probit.hess_log_posterior(b, synthetic))))
    assert np.all(np.abs(ch.path.mean(axis=0) - b) < 5 * post_sd)


def test_log_posterior_reference_values(synthetic):
    assert float(probit.log_posterior(np.zeros(2), synthetic)) == pytest.approx(
        synthetic.n_obs * math.log(0.5), rel=1e-14)
    one = probit.ProbitData(np.array([[1.0, 0.0], [1.0, 1.0]]), np.array([1, 0]))
    # subtract the second row's term to isolate log Phi(1.2816)
    b = np.array([1.2816, 0.0])
    v = float(probit.log_posterior(b, one)) - float(stats.norm.logcdf(-1.2816))
    assert v == pytest.approx(math.log(0.9), abs=1e-4)
    assert v == pytest.approx(float(stats.norm.logcdf(1.2816)), abs=1e-14)


def test_log_posterior_concave_along_segments(synthetic):
    rng = np.random.default_rng(9)
    for _ in range(50):
        a, b = rng.normal(0, 3, size=(2, 2))
        mid = float(probit.log_posterior((a + b) / 2, synthetic))
        avg = 0.5 * (float(probit.log_posterior(a, synthetic)) + float(probit.log_posterior(b, synthetic)))
        assert mid >= avg - 1e-9


def test_intercept_only_mle():
    # a predictor unrelated to the balanced outcome: slope 0, intercept Phi^-1(mean y)
    x = np.array([-1.0, 1.0, -1.0, 1.0, -2.0, 2.0, -2.0, 2.0])
    y = np.array([0, 0, 1, 1, 0, 0, 1, 1])
    b = probit.fit_mle(probit.make_probit_data(x, y))
    assert b[1] == pytest.approx(0.0, abs=1e-9)
    assert b[0] == pytest.approx(stats.norm.ppf(y.mean()), abs=1e-9)
    d = probit.make_probit_data(x, y)
    assert probit.log_posterior(b, d) >= probit.log_posterior(np.zeros(2), d)


def test_posterior_mean_of_slope_is_positive_and_stable():
    d = probit.load_pima(default_probit_data_path())
    t, q = probit.make_probit_rw(d, 0.1)
    b = probit.fit_mle(d)
    means, ses = [], []
    for seed in (1, 2):
        x = run_chain(t, q, b, 20_000, seed).path[:, 1]
        means.append(x.mean())
        bm = x.reshape(40, -1).mean(axis=1)  # batch means
        ses.append(bm.std(ddof=1) / math.sqrt(bm.size))
    assert min(means) > 0
    assert abs(means[0] - means[1]) <= 3 * math.hypot(*ses)
