import math

import pytest
from hypothesis import given, strategies as st

from qthermo.examples import (ExampleValidationError, contracting_p_max, example_process, pm_p_max,
                              shortest_branch, shortest_cell, validate_example, zeta_minus_one)
from qthermo.maps import make_fiber_map
from qthermo.potentials import contracting_report

PM5 = {"beta": 5, "a": 1, "t": 1}
# closed forms evaluated by hand: log 1.25 / log 6 and log 1.25 / log 15
PM_ORACLE = math.log(1.25) / math.log(6)
CONTRACTING_ORACLE = 0.0824000793


def test_pm_threshold():
    assert pm_p_max(5, 1, 1) == pytest.approx(PM_ORACLE, rel=1e-15)
    assert abs(pm_p_max(5, 1, 1) - 0.12453) <= 1e-5
    ok = validate_example("pm", dict(PM5, p=0.05))
    assert ok.overall and ok.hypotheses[-1].margin == pytest.approx(PM_ORACLE - 0.05, rel=1e-14)
    bad = validate_example("pm", dict(PM5, p=0.2))
    assert not bad.overall and bad.margin < 0


def test_contracting_threshold():
    v = contracting_p_max(5, 0.5, 1)
    assert v == pytest.approx(math.log(1.25) / math.log(15), rel=1e-15)
    assert v == pytest.approx(CONTRACTING_ORACLE, abs=1e-10)
    assert validate_example("contracting", {"beta": 5, "a": 0.5, "t": 1, "p": 0.05}).overall
    assert not validate_example("contracting", {"beta": 5, "a": 0.5, "t": 1, "p": 0.1}).overall


@given(st.floats(5, 20), st.floats(0.1, 4), st.floats(0.2, 3))
def test_pm_threshold_monotone(beta, a, t):
    h = 1e-6
    p = pm_p_max(beta, a, t)
    assert pm_p_max(beta, a, t + h) < p
    assert pm_p_max(beta, a + h, t) < p


def test_beta_ii_boundary():
    r35 = validate_example("beta_II", {"beta": 3.5, "delta": 0.5, "t": 0})
    h = r35.get("int log floor(beta) > log 3")
    assert h.margin == 0.0 and not h.verdict and not r35.overall
    r45 = validate_example("beta_II", {"beta": 4.5, "delta": 0.5, "t": 0})
    assert r45.overall
    assert r45.get("int log floor(beta) > log 3").margin == pytest.approx(math.log(4 / 3), rel=1e-15)


def test_zeta_values():
    z2 = zeta_minus_one(2.0, 1e-8)
    assert abs(z2.value - (math.pi**2 / 6 - 1)) <= 1e-8
    assert z2.lo <= math.pi**2 / 6 - 1 <= z2.hi and z2.half_width <= 1e-8
    # zeta(1.226) > 5, which the Gauss-Renyi check relies on
    assert zeta_minus_one(1.226).lo > 4
    z12 = zeta_minus_one(1.2, 1e-6)
    assert abs(z12.value - 4.591582441177752) <= 1e-6
    assert abs(z12.value - 4.591) <= 1e-3


def test_zeta_errors():
    for s in (1.0, 0.5, -2.0):
        with pytest.raises(ArithmeticError):
            zeta_minus_one(s)
    with pytest.raises(ValueError):
        zeta_minus_one(2.0, 0.0)


@given(st.floats(1.3, 6.0))
def test_zeta_bracket_contains_refinement(s):
    coarse = zeta_minus_one(s, 1e-4)
    fine = zeta_minus_one(s, 1e-4 / 2 ** s)
    assert fine.terms >= coarse.terms
    assert coarse.lo <= fine.value <= coarse.hi
    assert coarse.lo <= fine.lo and fine.hi <= coarse.hi


@given(st.lists(st.floats(2.05, 6.0), min_size=1, max_size=3))
def test_shortest_branch_matches_partition(betas):
    maps = [make_fiber_map("beta", {"beta": b}) for b in betas]
    assert shortest_branch(betas, len(betas)) == pytest.approx(shortest_cell(maps, len(betas)), rel=1e-9, abs=1e-13)


def test_gauss_renyi_validator():
    assert validate_example("gauss_renyi", {"t": 0.613}).overall
    assert validate_example("gauss_renyi", {"t": 0.6}).overall
    assert not validate_example("gauss_renyi", {"t": 0.62}).overall
    assert not validate_example("gauss_renyi", {"t": 0.5}).overall


def test_beta_i_and_shifted_validators():
    assert validate_example("beta_I", {"betas": [2.5, 3.5], "t": 1}).overall
    # phi_+ - phi_- = log 9 - log 2.1 exceeds E_- = (log 2 + log 9)/2
    assert not validate_example("beta_I", {"betas": [2.1, 9.0], "t": 1}).overall
    r = validate_example("shifted_beta", {"betas": [2.6, 3.3], "alphas": [0.2, 0.7]}, samples=20)
    assert r.overall
    assert "covering_bound_max" in r.get("log s_N integrable (empirical)").quantities
    assert not validate_example("shifted_beta", {"betas": [2.0], "delta": 0.0}).overall


def test_lasota_yorke_validator():
    from qthermo.driving import iid_process
    P = iid_process([("lasota_yorke", {"beta": 3.0, "alpha": 0.1, "eps": 0.6}, None),
                     ("lasota_yorke", {"beta": 4.0, "alpha": 0.0, "eps": 0.3}, None)], [0.5, 0.5], seed=1)
    r = validate_example("lasota_yorke", {"t": 1.0, "n_max": 2}, process=P, samples=10)
    assert r.get("lambda > 1 (n1 = 1)").verdict
    with pytest.raises(ExampleValidationError):
        validate_example("lasota_yorke", {})


def test_malformed_params():
    with pytest.raises(ExampleValidationError):
        validate_example("pm", {"beta": 5, "a": 1, "t": 1})
    with pytest.raises(ExampleValidationError):
        validate_example("pm", dict(PM5, p="x"))
    with pytest.raises(ExampleValidationError):
        validate_example("pm", dict(PM5, a=0, p=0.1))
    with pytest.raises(ExampleValidationError):
        validate_example("nope", {})
    with pytest.raises(ExampleValidationError):
        validate_example("pm", [1, 2])


@pytest.mark.parametrize("family,params", [
    ("pm", dict(PM5, p=0.05)),
    ("contracting", {"beta": 5, "a": 0.5, "t": 1, "p": 0.05}),
    ("gauss_renyi", {"t": 0.613}),
])
def test_pass_implies_contracting(family, params):
    assert validate_example(family, params).overall
    samples = 10_000 if family != "gauss_renyi" else 400
    r = contracting_report(example_process(family, params, seed=11), 1, samples=samples)
    assert r.margin > 0


def test_report_json_round_trip():
    import json
    d = json.loads(validate_example("pm", dict(PM5, p=0.05)).to_json())
    assert d["overall"] is True and d["family"] == "pm"
    assert all(h["verdict"] for h in d["hypotheses"])
