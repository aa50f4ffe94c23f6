import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qthermo.driving import constant_process, make_driving
from qthermo.maps import (MapValidationError, covering_bounds, covering_time, make_fiber_map,
                          monotone_solve, preimages, refine_partition, tau)

from _covering import beta_delta_violations, conze_raugi_violations, tau_violations
from _models import doubling

FAMILY_CASES = [
    ("beta", {"beta": 2.0}), ("beta", {"beta": 2.5}), ("beta", {"beta": 3.7}),
    ("shifted_beta", {"beta": 2.6, "alpha": 0.3, "delta": 0.5}),
    ("gauss", {"k_cut": 16}), ("renyi", {"k_cut": 16}),
    ("pm", {"a": 1.0}), ("pm", {"a": 0.4}),
    ("contracting", {"a": 0.3}),
    ("lasota_yorke", {"beta": 3.0, "alpha": 0.2, "eps": 0.5}),
]


def test_doubling_branches():
    fm = make_fiber_map("beta", {"beta": 2.0})
    assert fm.n_branches == 2
    assert all(b.is_full and b.slope == 2.0 for b in fm.branches)


def test_beta_25_branches():
    fm = make_fiber_map("beta", {"beta": 2.5})
    assert [(b.l, b.r) for b in fm.branches] == [(0.0, 0.4), (0.4, 0.8), (0.8, 1.0)]
    assert fm.branches[2].image == pytest.approx((0.0, 0.5))
    assert not fm.branches[2].is_full


def test_pm_branches():
    fm = make_fiber_map("pm", {"a": 1.0})
    left, right = fm.branches
    assert (left.l, left.r, right.l, right.r) == (0.0, 0.5, 0.5, 1.0)
    x = np.linspace(0, 0.5, 11)
    assert np.allclose(left.forward(x), x + 2 * x**2, atol=0)
    assert left.image == (0.0, 1.0)
    assert np.allclose(right.forward(np.array([0.5, 0.75, 1.0])), [0.0, 0.5, 1.0])


@pytest.mark.parametrize("family,params", [
    ("beta", {"beta": 1.0}), ("shifted_beta", {"beta": 2.3, "delta": 0.5}),
    ("pm", {"a": 0.0}), ("contracting", {"a": 1.0}), ("gauss", {"k_cut": 0}),
    ("nonsense", {}),
])
def test_bad_params(family, params):
    with pytest.raises(MapValidationError):
        make_fiber_map(family, params)


def test_preimage_examples():
    d = preimages(make_fiber_map("beta", {"beta": 2.0}), 0.5)
    assert sorted(y for y, _ in d) == pytest.approx([0.25, 0.75])
    b = preimages(make_fiber_map("beta", {"beta": 2.5}), 0.9)
    assert sorted(y for y, _ in b) == pytest.approx([0.36, 0.76])
    assert sorted(i for _, i in b) == [0, 1]
    pm = preimages(make_fiber_map("pm", {"a": 1.0}), 0.0)
    assert sorted(y for y, _ in pm) == pytest.approx([0.0, 0.5])


def test_preimages_solve_forward():
    for fam, par in FAMILY_CASES:
        fm = make_fiber_map(fam, par)
        for x in np.linspace(0, 1, 23):
            pre = preimages(fm, x)
            assert pre, (fam, x)
            for y, i in pre:
                assert abs(float(fm.branches[i].forward(np.array(y))) - x) <= 1e-10


@pytest.mark.parametrize("family,params", FAMILY_CASES)
def test_inverse_consistency(family, params):
    fm = make_fiber_map(family, params)
    for br in fm.branches:
        y = np.linspace(br.image[0], br.image[1], 100)
        assert np.max(np.abs(br.forward(br.inverse(y)) - y)) <= 1e-10


@pytest.mark.parametrize("family,params", FAMILY_CASES)
def test_branches_monotone_and_partition(family, params):
    fm = make_fiber_map(family, params)
    for br in fm.branches:
        x = np.linspace(br.l, br.r, 200)[:-1]
        d = np.diff(br.forward(x))
        assert np.all(d > 0) or np.all(d < 0)
    ls = [b.l for b in fm.branches]
    rs = [b.r for b in fm.branches]
    assert ls == sorted(ls)
    if fm.tail is None:
        assert ls[0] == 0.0 and rs[-1] == 1.0
        assert all(abs(r - l) < 1e-15 for r, l in zip(rs, ls[1:]))


@given(st.floats(1.05, 9.0))
def test_preimage_count_noninteger(beta):
    fm = make_fiber_map("beta", {"beta": beta})
    for x in np.linspace(0.003, 0.997, 37):
        c = len(preimages(fm, x))
        assert c in (math.floor(beta), math.ceil(beta))


@pytest.mark.parametrize("beta", [2, 3, 5])
def test_preimage_count_integer(beta):
    fm = make_fiber_map("beta", {"beta": float(beta)})
    assert all(len(preimages(fm, x)) == beta for x in np.linspace(0, 1, 41))


def test_monotone_solve_bisection_fallback():
    f = lambda x: x**3
    df = lambda x: 3 * x**2
    y = monotone_solve(f, df, np.array([0.0, 1e-9, 0.125, 1.0]), 0.0, 1.0)
    assert np.allclose(f(y), [0.0, 1e-9, 0.125, 1.0], atol=1e-12)


def test_refine_examples():
    d = refine_partition(doubling().maps_window(0, 2), 2)
    assert d.breakpoints == (0.0, 0.25, 0.5, 0.75, 1.0)
    b = refine_partition([make_fiber_map("beta", {"beta": 2.5})], 1)
    assert b.breakpoints == pytest.approx((0.0, 0.4, 0.8, 1.0))
    w = refine_partition([make_fiber_map("beta", {"beta": 3.0}), make_fiber_map("beta", {"beta": 2.0})])
    assert w.n_cells == 6
    assert np.allclose(np.diff(w.breakpoints), 1 / 6)


def test_refined_cells_are_monotone():
    maps = [make_fiber_map(f, p) for f, p in FAMILY_CASES[:4] + FAMILY_CASES[6:]]
    Z = refine_partition(maps[:3], 3)
    for c in Z.cells:
        x = np.linspace(c.l, c.r, 50)[1:-1]
        y = c.image_of(x)
        d = np.diff(y)
        assert np.all(d > 0) or np.all(d < 0)


@given(st.lists(st.sampled_from(range(len(FAMILY_CASES))), min_size=2, max_size=4))
def test_refinement_monotone(idx):
    cases = [FAMILY_CASES[i] for i in idx if FAMILY_CASES[i][0] not in ("gauss", "renyi")]
    if len(cases) < 2:
        return
    maps = [make_fiber_map(f, p) for f, p in cases]
    for n in range(1, len(maps)):
        coarse = np.array(refine_partition(maps, n).breakpoints)
        fine = np.array(refine_partition(maps, n + 1).breakpoints)
        assert all(np.min(np.abs(fine - b)) < 1e-12 for b in coarse)


def test_covering_examples(dbl):
    assert covering_time(dbl, 0, (0.0, 0.5)) == 1
    assert covering_time(dbl, 0, (0.0, 1.0)) == 0
    P = constant_process("beta", {"beta": 2.5})
    m = covering_time(P, 0, (0.8, 1.0))
    assert m is not None and m <= 3
    assert m <= 1 + tau(0.5, 2.5)


def test_covering_not_reached():
    P = constant_process("contracting", {"a": 0.5})
    res = covering_time(P, 0, (0.0, 0.01), max_n=3, detail=True)
    assert res.n is None and 0 < res.covered_fraction < 1
    with pytest.raises(ValueError):
        covering_time(P, 0, (0.3, 0.3))


def test_closed_form_bounds():
    assert covering_bounds("tau", s=0.2, betas=2.5) == 2
    assert covering_bounds("beta_delta", delta=0.5) == 3
    assert covering_bounds("conze_raugi", delta=0.5, s=0.1, N=1) == 19
    # hand check against the defining formulas
    assert 1 + math.ceil(math.log(2) / math.log(1.5)) == 3
    assert math.ceil(math.log(50) / math.log(1.25)) + 1 == 19
    with pytest.raises(ValueError):
        covering_bounds("tau", s=0.0, betas=2.0)
    with pytest.raises(ValueError):
        covering_bounds("conze_raugi", delta=0.5, s=-1, N=1)


def test_tau_along_process():
    P = make_driving({"kind": "periodic", "word": [0, 1]},
                     {0: {"family": "beta", "params": {"beta": 2.0}},
                      1: {"family": "beta", "params": {"beta": 3.0}}})
    # 0.1 * 2 * 3 * 2 = 1.2 >= 1 at n = 3
    assert tau(0.1, P, 0) == 3
    assert tau(0.1, P, 1) == 3  # 0.1*3*2=0.6, *3 = 1.8
    assert tau(0.5, [2.0]) == 1


# empirical covering times never beat the analytic bounds

def test_tau_bound_beta_family():
    assert tau_violations() == 0


def test_beta_delta_bound():
    assert beta_delta_violations() == 0


def test_conze_raugi_bound():
    assert conze_raugi_violations() == 0
