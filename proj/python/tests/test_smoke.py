import math

import pytest

import pitransfer as pt


def test_pi_basis_kinematic_repeated():
    groups = dict(pt.pi_basis("kinematic", ["l", "v_i"]))
    assert groups == {
        "X": "X^1 l^-1",
        "Y": "Y^1 l^-1",
        "theta": "theta^1",
        "a": "a^1 l^1 v_i^-2",
        "delta": "delta^1",
    }


def test_pi_basis_dependent_repeated_set_raises():
    with pytest.raises(ValueError):
        pt.pi_basis("kinematic", ["X", "l"])


def test_transform_row_product():
    out = pt.transform_row("kinematic", ["l", "v_i"], {"a": -4.905, "l": 0.475, "v_i": 2.0,
                                                     "X": 0.0, "Y": 0.0, "theta": 0.0, "delta": 0.1})
    assert out["a"] == pytest.approx(-4.905 * 0.475 / 4.0, rel=1e-15)


def test_straight_stop_and_oracle():
    v = pt.vehicle("large")
    pose = pt.simulate_kinematic(v, pt.ManeuverInput(1.0, -0.5, 0.0))
    assert pose.as_tuple() == pytest.approx((1.0, 0.0, 0.0), abs=1e-9)
    m = pt.ManeuverInput(2.0, -4.905, 0.7854)
    sim = pt.simulate_kinematic(v, m)
    ref = pt.analytic_arc_oracle(v, m)
    for a, b in zip(sim.as_tuple(), ref.as_tuple()):
        assert abs(a - b) <= 1e-6


def test_non_braking_input_rejected():
    with pytest.raises(ValueError):
        pt.simulate_kinematic(pt.vehicle("small"), pt.ManeuverInput(1.0, 0.5, 0.0))


def test_surrogate_is_seed_deterministic():
    v = pt.vehicle("small")
    m = pt.ManeuverInput(2.0, -3.0, 0.3927, mu=0.4)
    a = pt.simulate_dynamic_surrogate(v, m, 7).as_tuple()
    b = pt.simulate_dynamic_surrogate(v, m, 7).as_tuple()
    assert a == b


def test_grid_sizes():
    assert pt.grid_size("kinematic", "small") == 5500
    assert pt.grid_size("surrogate", "long", seed=3) == 540


def test_features():
    v = pt.vehicle("small")
    assert pt.features("baseline", v, pt.ManeuverInput(1.0, -0.981, 0.0)) == [1.0, -0.981, 0.0, 0.345]
    pi = pt.features("pi", pt.vehicle("long"), pt.ManeuverInput(2.0, -1.962, 0.0))
    assert pi[0] == pytest.approx(-1.962 * 0.853 / 4.0)


def test_gbt_roundtrip():
    xs = [[i / 50.0] for i in range(100)]
    ys = [math.sin(6.0 * x[0]) for x in xs]
    model = pt.fit_gbt(xs, ys, n_rounds=50)
    again = pt.loads_ensemble(model.dumps())
    assert model.predict(xs) == again.predict(xs)
    assert model.n_trees == 50


def test_small_matrix_has_no_leakage():
    report = pt.run_matrix("pi", n_rounds=20, vehicles=["small", "large"])
    assert len(report["cells"]) == 6
    assert report["leaks"] == []
    kinds = sorted(c["kind"] for c in report["cells"])
    assert kinds == ["cross", "cross", "self", "self", "shared", "shared"]


def test_schemes_listed():
    assert pt.SCHEMES == ["baseline", "normalized", "pca2", "pca3", "augmented", "pi", "pi-aug", "pi-fillers"]
