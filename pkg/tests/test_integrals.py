import csv
import io
import json
import math

import numpy as np
import pytest

import bruteforce
from nctrunc import integrals
from nctrunc.errors import InvalidArgument

# ---------------------------------------------------------------- Weyl


def test_weyl_fit_circle(circle):
    fit = integrals.weyl_fit(circle, [250, 500, 1000, 2000])
    assert abs(fit.dimension - 1) < 0.01
    assert abs(fit.constant - 2) / 2 < 0.02
    assert fit.counts[-1] == 2 * 2000 + 1
    assert fit.residual >= 0


def test_weyl_fit_torus(torus):
    fit = integrals.weyl_fit(torus, [25, 50, 100, 200])
    assert fit.counts[-1] == 2 * bruteforce.gauss_count(200)
    assert abs(fit.dimension - 2) < 0.04
    assert abs(fit.constant - 2 * math.pi) / (2 * math.pi) < 0.03


def test_weyl_fit_toeplitz(toeplitz):
    fit = integrals.weyl_fit(toeplitz, [100, 400, 1600])
    assert abs(fit.dimension - 1) < 0.01 and abs(fit.constant - 1) < 0.01


@pytest.mark.parametrize("ladder", [[10, 20], [10, 20, 30], [10, 5, 80], []])
def test_weyl_fit_degenerate(circle, ladder):
    with pytest.raises(InvalidArgument):
        integrals.weyl_fit(circle, ladder)


# ---------------------------------------------------------------- truncated


def test_truncated_examples(nctorus, circle):
    u = nctorus.u(2, -1)
    assert integrals.truncated_integral(nctorus, u, [4, 8, 16]).value == 0
    r = integrals.truncated_integral(nctorus, u.adjoint() * u, [4, 8, 16])
    # partner modes escape the truncation near the edge, so only the limit is 1
    assert abs(r.value - 1) < 0.2 and r.values[-1] == pytest.approx(r.value)
    inner = nctorus.counting(16 - math.sqrt(5))
    assert np.all(np.abs((u.adjoint() * u).diagonal(inner) - 1) < 1e-15)
    for lam in (5, 50, 500):
        val = integrals.truncated_integral(circle, circle.proj_pos(), [lam]).value
        n = circle.counting(lam)
        assert abs(val - 0.5) <= 1.0 / n
        assert val == pytest.approx((lam + 1) / n, abs=1e-15)


# ---------------------------------------------------------------- log mean


def test_log_mean_examples(circle, toeplitz):
    cos = circle.mult([1, 0, 1])
    lm = integrals.log_mean_diagonal(circle, cos, [1000, 10_000])
    tr = integrals.truncated_integral(circle, cos, [1000, 5000])
    assert abs(lm.value - tr.value) < 1e-3
    assert abs(integrals.log_mean_diagonal(circle, circle.identity()).value - 1) < 1e-2
    phi = toeplitz.toeplitz([0.25, -1.5, 0.25])
    assert abs(integrals.log_mean_diagonal(toeplitz, phi).value + 1.5) < 1e-12


# ---------------------------------------------------------------- Dixmier


def test_dixmier_circle(circle):
    r = integrals.dixmier_diagonal(circle, circle.identity())
    assert abs(r.value - 2) / 2 < 0.05
    assert integrals.dixmier_diagonal(circle, 0 * circle.identity()).value == 0


def test_dixmier_circle_bruteforce(circle):
    # plain normalisation, horizon 2000 = modes n in [-1000, 1000]
    r = integrals.dixmier_diagonal(circle, circle.identity(), horizons=[2000], window="none")
    brute = bruteforce.bracket_sum(1000, -1) / math.log(2002)
    assert r.value.real == pytest.approx(brute, rel=1e-12)


def test_dixmier_torus(torus):
    r = integrals.dixmier_diagonal(torus, torus.identity())
    assert abs(r.value - 2 * math.pi) / (2 * math.pi) < 0.05


def test_dixmier_over_weyl_constant(circle, torus):
    for model, ladder in ((circle, [250, 500, 1000, 2000]), (torus, [25, 50, 100, 200])):
        fit = integrals.weyl_fit(model, ladder)
        dix = integrals.dixmier_diagonal(model, model.identity())
        assert abs(dix.value.real / fit.constant - 1) < 0.10


def test_dixmier_override_and_errors(circle):
    with pytest.raises(InvalidArgument):
        integrals.dixmier_diagonal(circle, circle.identity(), d=0)
    r = integrals.dixmier_diagonal(circle, circle.identity(), d=2, horizons=[1000, 10_000])
    assert r.extras["d"] == 2.0 and abs(r.value) < 0.05


# ---------------------------------------------------------------- weighted


def test_weighted_s_one(circle):
    r = integrals.weighted_dixmier(circle, circle.bracket(1.0), 1.0, [250, 500, 1000, 2000])
    assert abs(r.value - 0.5) / 0.5 < 0.05
    assert r.extras["branch"] == "s>-d" and r.extras["bounded_heuristic"]
    assert len(r.extras["raw"]) == 4


def test_weighted_s_minus_d(circle):
    r = integrals.weighted_dixmier(circle, circle.bracket(-1.0), -1.0, [1e3, 1e4, 1e5])
    assert abs(r.value - 2) / 2 < 0.05
    assert r.extras["branch"] == "s=-d"
    # brute-force value at the top cutoff
    brute = bruteforce.bracket_sum(1e5, -1) / math.log(2 * 100_000 + 1)
    assert r.value.real == pytest.approx(brute, rel=1e-12)


def test_weighted_zero_and_errors(circle):
    assert integrals.weighted_dixmier(circle, 0 * circle.identity(), 0.5, [10, 20]).value == 0
    with pytest.raises(InvalidArgument):
        integrals.weighted_dixmier(circle, circle.identity(), -1.5, [10, 20])


def test_weighted_flags_unbounded(circle):
    r = integrals.weighted_dixmier(circle, circle.bracket(2.0), 1.0, [100, 200])
    assert not r.extras["bounded_heuristic"]


# ---------------------------------------------------------------- heat


def test_heat_circle(circle):
    r = integrals.heat_integral(circle, circle.identity())
    c1 = r.extras["C_1"][-1].real
    assert abs(c1 - math.sqrt(math.pi)) / math.sqrt(math.pi) < 5e-3
    assert r.extras["trace_omega"].real == pytest.approx(2.0, rel=5e-3)
    assert r.value == 1
    assert abs(integrals.heat_integral(circle, circle.proj_pos()).value - 0.5) < 1e-2
    assert integrals.heat_integral(circle, circle.mult([0, 0, 1])).value == 0


def test_heat_ladder_must_decrease(circle):
    with pytest.raises(InvalidArgument):
        integrals.heat_integral(circle, circle.identity(), [1e-3, 1e-2])


# ---------------------------------------------------------------- Frohlich


def test_frohlich_examples(circle):
    r = integrals.frohlich(circle, circle.proj_pos(), 0.0, [1e-1, 1e-2, 1e-3])
    assert abs(r.value - 0.5) < 1e-2
    q = math.exp(-1e-3)
    assert r.value.real == pytest.approx(1.0 / (1.0 + q), rel=1e-12)
    assert r.extras["partition_grows"]
    assert r.extras["difference"] < 1e-2
    assert integrals.frohlich(circle, circle.identity(), 0.0, [1e-2, 1e-3]).value == 1
    cos = integrals.frohlich(circle, circle.mult([1, 0, 1]), 0.0, [1e-2, 1e-3])
    assert cos.value == 0 and cos.extras["truncated_integral"] == 0


def test_frohlich_errors(circle):
    with pytest.raises(InvalidArgument):
        integrals.frohlich(circle, circle.identity(), -1.0)
    with pytest.raises(InvalidArgument):
        integrals.frohlich(circle, circle.identity(), 0.1, [1.0, 0.05])


# ---------------------------------------------------------------- invariants


def _estimators(model):
    lam = integrals.default_lambda_ladder(model)[-3:]
    return {
        "truncated": lambda A: integrals.truncated_integral(model, A, lam).value,
        "log_mean": lambda A: integrals.log_mean_diagonal(model, A, [1000, 10_000]).value,
        "heat": lambda A: integrals.heat_integral(model, A, [1e-2, 1e-3]).value,
        "dixmier": lambda A: integrals.dixmier_diagonal(model, A, horizons=[1000, 10_000]).value,
    }


def test_positivity(nctorus, x1, x2):
    B = nctorus.u(1, 0) + nctorus.angular(x1) * nctorus.u(0, 1) - 0.7 * nctorus.angular(x2)
    P = B.adjoint() * B
    for name, est in _estimators(nctorus).items():
        assert est(P).real >= -1e-10, name


def test_normalization(torus):
    for name, est in _estimators(torus).items():
        if name != "dixmier":
            assert abs(est(torus.identity()) - 1) < 1e-2, name


def test_linearity(nctorus, x1, x2):
    A = nctorus.angular(x1 * x1)
    B = nctorus.u(1, 1).adjoint() * nctorus.u(1, 1) + nctorus.angular(x2)
    alpha, beta = 0.3 - 2j, -1.7
    for name, est in _estimators(nctorus).items():
        lhs = est(alpha * A + beta * B)
        rhs = alpha * est(A) + beta * est(B)
        assert abs(lhs - rhs) <= 1e-10, name


# ---------------------------------------------------------------- reports


def test_report_serialisation(circle):
    r = integrals.truncated_integral(circle, circle.proj_pos(), [8, 16, 32])
    data = json.loads(r.to_json())
    assert data["estimator"] == "truncated_integral"
    assert data["value"] == [r.value.real, 0.0]
    assert data["drift"] >= 0
    assert data["measurable"] == (r.drift < r.tolerance)
    rows = list(csv.reader(io.StringIO(r.to_csv())))
    assert tuple(rows[0]) == integrals.CSV_COLUMNS
    assert len(rows) == 4
    assert [float(x[3]) for x in rows[1:]] == [8.0, 16.0, 32.0]
    assert float(rows[-1][4]) == r.values[-1].real


def test_default_ladders_respect_budget(torus, circle):
    assert integrals.default_lambda_ladder(circle) == integrals.DEFAULT_LAMBDA_LADDER
    for lam in integrals.default_lambda_ladder(torus):
        assert torus.weyl_estimate(lam) <= integrals.DEFAULT_MODE_BUDGET
    assert integrals.default_horizons(circle) == integrals.DEFAULT_HORIZONS
