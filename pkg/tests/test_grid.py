import numpy as np
import pytest

from aglens.expr import ExprError
from aglens.grid import Box, SamplePlan, anchored_axis, grid_verdict


def test_anchored_axis():
    np.testing.assert_allclose(anchored_axis(-1, 1, 0.5), [-1, -0.5, 0, 0.5, 1])
    np.testing.assert_allclose(
        anchored_axis(-1, 1.05, 0.5, anchor=0.2), [-0.8, -0.3, 0.2, 0.7]
    )
    np.testing.assert_array_equal(anchored_axis(0.1, 0.2, 1.0), [0.1])
    np.testing.assert_array_equal(anchored_axis(-2, 2, 0.05)[[0, -1]], [-2.0, 2.0])
    assert len(anchored_axis(-2, 2, 0.05)) == 81
    with pytest.raises(ValueError, match="positive"):
        anchored_axis(0, 1, 0)


def test_box():
    box = Box.cube(2, 1.0)
    assert box.dim == 2
    assert box.contains([1.0, -1.0])
    assert not box.contains([1.1, 0.0])
    assert not box.contains([0.0])
    np.testing.assert_array_equal(box.clip([2.0, -0.5]), [1.0, -0.5])
    assert (box + Box(((0, 3),))).bounds == ((-1, 1), (-1, 1), (0, 3))
    with pytest.raises(ValueError, match="Empty interval"):
        Box(((1, 0),))
    with pytest.raises(ValueError, match="finite"):
        Box(((0, float("inf")),))


def test_sample_plan():
    plan = SamplePlan.uniform(["x1", "a1"], 0.0, 1.0, 1.0)
    assert plan.size == 4
    assert plan.shape == (2, 2)
    points = plan.points()
    np.testing.assert_array_equal(points["x1"], [0, 0, 1, 1])
    np.testing.assert_array_equal(points["a1"], [0, 1, 0, 1])
    assert plan.point(1) == {"x1": 0.0, "a1": 1.0}
    assert plan.restrict(["a1"]).names == ("a1",)
    assert plan.describe() == {
        "axes": {"x1": [0.0, 1.0, 1.0], "a1": [0.0, 1.0, 1.0]},
        "samples": 4,
    }
    empty = SamplePlan(())
    assert empty.size == 1
    assert empty.points() == {}
    with pytest.raises(ValueError, match="Duplicate"):
        plan + plan


def test_sample_plan_over_box():
    plan = SamplePlan.over(Box(((-1, 1), (0, 2))), ["x1", "x2"], 1.0, anchor=[0.5, 0])
    np.testing.assert_allclose(plan.axis_points()[0], [-0.5, 0.5])
    np.testing.assert_allclose(plan.axis_points()[1], [0, 1, 2])
    with pytest.raises(ValueError, match="One variable name"):
        SamplePlan.over(Box.cube(2, 1), ["x1"], 0.5)


def test_grid_verdict_ties():
    plan = SamplePlan.uniform(["x1"], 0.0, 2.0, 1.0)
    margins = {
        "first": np.array([0.0, -1.0, -1.0]),
        "second": np.array([-1.0, 0.0, 0.0]),
    }
    verdict = grid_verdict(margins, plan, {"tol": 1e-8}, 1e-8)
    assert not verdict
    assert verdict.failed == "first"
    assert verdict.worst_margin == -1.0
    assert verdict.witness_point == {"x1": 1.0}
    assert verdict.details == {"first_margin": -1.0, "second_margin": -1.0}
    assert verdict.tolerances == {"tol": 1e-8}


def test_grid_verdict_tolerance():
    plan = SamplePlan.uniform(["x1"], 0.0, 1.0, 1.0)
    verdict = grid_verdict({"only": np.array([-1e-9, 1.0])}, plan, {}, 1e-8)
    assert verdict
    assert verdict.worst_margin == -1e-9
    assert verdict.witness_point == {"x1": 0.0}
    with pytest.raises(ExprError, match="Undefined only margin"):
        grid_verdict({"only": np.array([np.nan, 1.0])}, plan, {}, 1e-8)
