import math

import numpy as np
import pytest

from nehari_sp.potentials import ExpressionError, Expr, PotentialError, PotentialSet, box_points


@pytest.mark.parametrize("src, point, expected", [
    ("x^2 + y^2", (1, 2, 0), 5.0),
    ("-x^2", (3, 0, 0), -9.0),
    ("2^3^2", (0, 0, 0), 512.0),
    ("1 - 0.5*exp(-(x^2+y^2+z^2))", (0, 0, 0), 0.5),
    ("max(x, 0) + min(y, 1)", (-2, 3, 0), 1.0),
    ("sqrt(abs(z)) + tanh(0)", (0, 0, -4), 2.0),
    ("cos(x) + sin(y)", (0, 0, 0), 1.0),
    (2.5, (9, 9, 9), 2.5),
])
def test_expression_values(src, point, expected):
    assert Expr(src).at(point) == pytest.approx(expected)


def test_constant_detection():
    assert Expr("2*3").constant == 6.0
    assert Expr("x").constant is None
    assert Expr("4").__call__(np.zeros((2, 3)), 0.0, 0.0).shape == (2, 3)


@pytest.mark.parametrize("src", [
    "__import__('os')", "x.real", "w + 1", "exp(x, y)", "max(x)", "x if y else z",
    "lambda: 1", "x // 2", "'a'", "True", "", "   ", None, "exp(x=1)",
])
def test_expression_rejections(src):
    with pytest.raises(ExpressionError):
        Expr(src)


def test_structure_errors():
    base = dict(V="1", Q=["1"], q=[4.5], K="1")
    with pytest.raises(PotentialError, match="outside"):
        PotentialSet(**{**base, "q": [6.5]})
    with pytest.raises(PotentialError, match="increasing"):
        PotentialSet(**{**base, "Q": ["1", "1"], "q": [4.8, 4.5]})
    with pytest.raises(PotentialError, match="pivot"):
        PotentialSet(**{**base, "i0": 2})
    with pytest.raises(PotentialError):
        PotentialSet(**{**base, "Q": []})
    with pytest.raises(PotentialError, match="Q_inf"):
        PotentialSet(**base, Q_inf=[1, 2])


def test_sign_pattern_validation():
    pts = box_points(1.0, 3)
    P = PotentialSet(V="1", Q=["-1", "x", "1"], q=[4.2, 4.5, 4.8], K="1", i0=2)
    P.validate(pts)  # the pivot may change sign
    bad = PotentialSet(V="1", Q=["x", "1"], q=[4.2, 4.5], K="1", i0=2)
    with pytest.raises(PotentialError, match="f2"):
        bad.validate(pts)
    with pytest.raises(PotentialError, match="f3"):
        PotentialSet(V="x", Q=["1"], q=[4.5], K="1").validate(pts)
    with pytest.raises(PotentialError, match="f4"):
        PotentialSet(V="1", Q=["1"], q=[4.5], K="-1").validate(pts)
    with pytest.raises(PotentialError, match="K_inf"):
        PotentialSet(V="1", Q=["1"], q=[4.5], K="1 + x^2", K_inf=1).validate(pts)


def test_f5_validator():
    pts = box_points(2.0, 5)
    bump = PotentialSet(V="0.5 + 0.25*exp(-x^2)", Q=["1"], q=[4.5], K="1",
                        V_inf=0.5, Q_inf=[1], K_inf=1)
    bump.check_f5(pts)
    well = PotentialSet(V="0.5 - 0.25*exp(-x^2)", Q=["1"], q=[4.5], K="1",
                        V_inf=0.5, Q_inf=[1], K_inf=1)
    with pytest.raises(PotentialError, match="f5"):
        well.check_f5(pts)


def test_frozen_coefficients_and_extremes(single_well):
    f = single_well.frozen_at((0.0, 0.0, 0.0))
    assert f.a == 0.5 and f.b == (100.0, 1.0) and f.poisson_weight == 1.0
    lim = single_well.frozen_limit()
    assert lim.a == 1.0
    ext = single_well.extremes(box_points(2.0, 5))
    assert ext.a == 0.5
    h = PotentialSet(V="1", Q=["1"], q=[4.5], K="1", h="x", V_inf=1, Q_inf=[1], K_inf=1,
                     h_inf=1)
    assert h.frozen_at((0.5, 0, 0)).poisson_weight == pytest.approx(0.25)


def test_limits_must_be_declared():
    with pytest.raises(PotentialError, match="limits"):
        PotentialSet(V="1", Q=["1"], q=[4.5], K="1").frozen_limit()


def test_on_grid_rejects_nonpositive_v(grid32):
    P = PotentialSet(V="x", Q=["1"], q=[4.5], K="1")
    with pytest.raises(PotentialError):
        P.on_grid(grid32, 1.0)


def test_box_points():
    assert box_points(3.0, 1).tolist() == [[0.0, 0.0, 0.0]]
    pts = box_points(1.0, 3)
    assert pts.shape == (27, 3) and math.isclose(pts.max(), 1.0)
    with pytest.raises(ValueError):
        box_points(1.0, 0)
