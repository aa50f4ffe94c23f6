import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from qthermo.bvfunc import GridFunction, grid_function, indicator
from qthermo.driving import iid_process
from qthermo.examples import example_process
from qthermo.transfer import (PositivityError, apply_cocycle, apply_transfer, duality_defect,
                              estimate_cocycle, fully_normalized_apply, inf_sup_cocycle_one,
                              invariant_density, lambda_estimate, pull_out_sides, transfer_matrix)

from _models import beta_const, doubling, iid23

N = 4096

SHIPPED = {
    "beta_ii": example_process("beta_ii", {"betas": [3.5, 4.7], "delta": 0.4}),
    "shifted_beta": example_process("shifted_beta", {"betas": [2.6, 3.3], "alphas": [0.2, 0.7]}),
    "pm": example_process("pm", {"beta": 5.0, "a": 1.0, "t": 1.0, "p": 0.3}, seed=2),
    "contracting": example_process("contracting", {"beta": 5.0, "a": 0.3, "t": 1.0, "p": 0.3}, seed=2),
    "gauss_renyi": example_process("gauss_renyi", {"t": 0.613}),
    "lasota_yorke": iid_process([("lasota_yorke", {"beta": 3.0, "alpha": 0.1, "eps": 0.6}, None),
                                 ("lasota_yorke", {"beta": 2.0, "alpha": 0.0, "eps": 0.3}, None)],
                                [0.5, 0.5], seed=1),
}


def test_apply_examples():
    fs = doubling().fiber_at(0)
    assert np.all(apply_transfer(fs, grid_function(1.0, N)).values == 1.0)
    Lx = apply_transfer(fs, grid_function(lambda x: x, N)).values
    x = (np.arange(N) + 0.5) / N
    assert np.max(np.abs(Lx - (x / 2 + 0.25))) <= 1 / N
    assert abs(Lx[0] - 0.25) <= 1 / N
    three = beta_const(3.0, t=0.0).fiber_at(0)
    assert np.all(apply_transfer(three, grid_function(1.0, N)).values == 3.0)


def test_cocycle_examples(mix23):
    f = indicator(0, 0.5, 256)
    assert apply_cocycle(mix23, 0, 0, f) is f
    assert np.array_equal(apply_cocycle(mix23, 4, 1, f).values, apply_transfer(mix23.fiber_at(4), f).values)
    g = grid_function(lambda x: np.sin(7 * x) + 2, 256)
    a = apply_cocycle(mix23, 0, 5, g).values
    b = apply_cocycle(mix23, 2, 3, apply_cocycle(mix23, 0, 2, g)).values
    assert np.max(np.abs(a - b)) <= 1e-12
    with pytest.raises(ValueError):
        apply_cocycle(mix23, 0, -1, g)


def test_lambda_examples():
    assert lambda_estimate(doubling(), 0, 30, 1024) == 1.0
    assert lambda_estimate(beta_const(3.0, t=0.0), 0, 30, 1024) == pytest.approx(3.0, rel=1e-15)
    P = iid23()
    for k in range(-5, 5):
        assert lambda_estimate(P, k, 30, 1024) == pytest.approx(1.0, abs=1e-12)


def test_density_examples():
    for h in (1, 5, 30):
        q, r = invariant_density(doubling(), 0, h, 1024)
        assert np.all(q.values == 1.0) and r == 0.0
    q, _ = invariant_density(iid23(), 7, 30, N)
    assert np.max(np.abs(q.values - 1.0)) <= 1e-10


def test_density_residual_improves_with_horizon():
    P = beta_const(2.5)
    _, r15 = invariant_density(P, 0, 15, N)
    _, r30 = invariant_density(P, 0, 30, N)
    assert np.all(invariant_density(P, 0, 30, N)[0].values > 0)
    assert r30 < r15 and r30 < 10 * r15


def test_fully_normalized_doubling():
    P = doubling()
    est = estimate_cocycle(P, 0, 30, 1, 1024)
    f = grid_function(lambda x: x * x, 1024)
    assert np.array_equal(fully_normalized_apply(P, 0, est, f).values, apply_transfer(P.fiber_at(0), f).values)


@pytest.mark.parametrize("name", sorted(SHIPPED))
def test_normalized_fixes_one(name):
    P = SHIPPED[name]
    est = estimate_cocycle(P, 0, 30, 1, N)
    L1 = fully_normalized_apply(P, 0, est, grid_function(1.0, N))
    assert np.max(np.abs(L1.values - 1.0)) <= 1e-6


@pytest.mark.parametrize("name", sorted(SHIPPED))
def test_pull_out_identity(name):
    P = SHIPPED[name]
    est = estimate_cocycle(P, 0, 30, 1, N, residuals=False)
    lhs, rhs = pull_out_sides(P, 0, est, indicator(0, 0.5, N), grid_function(1.0, N))
    assert np.max(np.abs(lhs - rhs)) <= 1e-6


@pytest.mark.parametrize("name", sorted(SHIPPED))
def test_lambda_between_inf_and_sup(name):
    P = SHIPPED[name]
    n = 3
    est = estimate_cocycle(P, 0, 30, n, 1024, residuals=False)
    lam_n = np.exp(est.log_lambda_n(0, n))
    lo, hi = inf_sup_cocycle_one(P, 0, n, 1024)
    assert lo * (1 - 1e-12) <= lam_n <= hi * (1 + 1e-12)


@pytest.mark.parametrize("name", sorted(SHIPPED))
def test_q_hat_positive(name):
    est = estimate_cocycle(SHIPPED[name], 3, 30, 2, 1024, residuals=False)
    for j in (3, 4, 5):
        assert est.q(j).values.min() > 0
        assert est.lam(j if j < 5 else 4) > 0


def test_positivity_error_on_collapse():
    # a q_hat that has collapsed to zero must be refused, not divided by
    P = doubling()
    est = estimate_cocycle(P, 0, 5, 1, 64)
    bad = type(est)(est.k, est.n_used, est.n_cells, est.lambda_hats,
                    {0: GridFunction(np.zeros(64)), 1: est.q(1)}, est.lebesgue_ratio)
    with pytest.raises(PositivityError):
        fully_normalized_apply(P, 0, bad, grid_function(1.0, 64))


# properties

CELLS = 64
MATS = {name: transfer_matrix(P.fiber_at(0), CELLS).toarray() for name, P in SHIPPED.items()}
vec = arrays(float, CELLS, elements=st.floats(-10, 10, allow_nan=False))
pos = arrays(float, CELLS, elements=st.floats(0, 10, allow_nan=False))


@given(st.sampled_from(sorted(SHIPPED)), pos, pos)
def test_positive_and_monotone(name, f, d):
    M = MATS[name]
    assert np.all(M @ f >= 0)
    assert np.all(M @ (f + d) >= M @ f)


@given(st.sampled_from(sorted(SHIPPED)), vec, vec, st.floats(-5, 5), st.floats(-5, 5))
def test_linear(name, f, h, a, b):
    P = SHIPPED[name]
    fs = P.fiber_at(0)
    F, H = GridFunction(f), GridFunction(h)
    lhs = apply_transfer(fs, a * F + b * H).values
    rhs = a * apply_transfer(fs, F).values + b * apply_transfer(fs, H).values
    scale = 1 + np.max(np.abs(MATS[name]).sum(axis=1)) * 10 * (abs(a) + abs(b))
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale


@pytest.mark.parametrize("name", sorted(SHIPPED))
def test_duality_against_lebesgue(name):
    fs = SHIPPED[name].fiber_at(0)
    for n in (256, 1024, 4096):
        for src in (1.0, lambda x: x, lambda x: (x < 0.3).astype(float)):
            f = grid_function(src, n)
            assert duality_defect(fs, f) <= 1.0 / n


@given(st.integers(-100, 100), st.integers(0, 3), st.integers(0, 3))
def test_cocycle_split(k, n, m):
    P = SHIPPED["lasota_yorke"]
    f = grid_function(lambda x: 1 + x * (1 - x), CELLS)
    a = apply_cocycle(P, k, n + m, f).values
    b = apply_cocycle(P, k + n, m, apply_cocycle(P, k, n, f)).values
    assert np.max(np.abs(a - b)) <= 1e-12 * max(1.0, np.max(np.abs(a)))
