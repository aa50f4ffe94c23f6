"""Small model systems shared by the tests."""

from qthermo.driving import constant_process, iid_process

GEOM1 = {"kind": "geometric", "t": 1.0}
UNIT = {"kind": "geometric", "t": 0.0}


def doubling():
    return constant_process("beta", {"beta": 2.0}, GEOM1)


def beta_const(beta, t=1.0):
    return constant_process("beta", {"beta": beta}, {"kind": "geometric", "t": t})


def iid23(t=1.0, seed=3):
    pot = {"kind": "geometric", "t": t}
    return iid_process([("beta", {"beta": 2.0}, pot), ("beta", {"beta": 3.0}, pot)], [0.5, 0.5], seed=seed)


def ly_mix(seed=1):
    return iid_process([("lasota_yorke", {"beta": 3.0, "alpha": 0.1, "eps": 0.6}, None),
                        ("lasota_yorke", {"beta": 4.0, "alpha": 0.0, "eps": 0.3}, None)],
                       [0.5, 0.5], seed=seed)


def validated_families():
    """name -> (process, alpha_hat, gamma_hat) at parameters the validators accept."""
    from qthermo.examples import example_process

    return {
        "doubling": (doubling(), 0.0, 1.0),
        "beta_ii": (example_process("beta_ii", {"betas": [3.5, 4.7], "delta": 0.4}), 0.0, 1.0),
        "shifted_beta": (example_process("shifted_beta", {"betas": [2.6, 3.3], "alphas": [0.2, 0.7]}), 0.0, 1.0),
        "pm": (example_process("pm", {"beta": 5.0, "a": 1.0, "t": 1.0, "p": 0.05}, seed=2), 0.5, 1.0),
        "contracting": (example_process("contracting", {"beta": 5.0, "a": 0.5, "t": 1.0, "p": 0.05}, seed=2),
                        0.0, 1.0),
        "gauss_renyi": (example_process("gauss_renyi", {"t": 0.613}), 1.0, 1.0),
        "lasota_yorke": (ly_mix(), 0.5, 1.0),
    }
