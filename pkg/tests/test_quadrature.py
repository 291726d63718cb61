import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdivflow.quadrature import (
    edge_rule,
    map_to_elements,
    map_to_faces,
    reference_monomial_integral,
    triangle_rule,
)


def test_order_one_is_centroid_rule():
    rule = triangle_rule(1)
    assert len(rule.weights) == 1
    assert np.allclose(rule.points[0], [1 / 3, 1 / 3])
    assert rule.weights[0] == pytest.approx(0.5)


@pytest.mark.parametrize("order", range(0, 13))
def test_triangle_monomial_exactness(order):
    rule = triangle_rule(order)
    for a in range(order + 1):
        for b in range(order + 1 - a):
            approx = (rule.weights * rule.points[:, 0] ** a * rule.points[:, 1] ** b).sum()
            assert approx == pytest.approx(
                reference_monomial_integral(a, b), abs=1e-14
            )


def test_order_four_integrates_x2y2():
    rule = triangle_rule(4)
    val = (rule.weights * rule.points[:, 0] ** 2 * rule.points[:, 1] ** 2).sum()
    assert val == pytest.approx(1.0 / 180.0, abs=1e-15)


@pytest.mark.parametrize("order", range(0, 13))
def test_triangle_weights_positive_and_sum_to_half(order):
    rule = triangle_rule(order)
    assert (rule.weights > 0).all()
    assert rule.weights.sum() == pytest.approx(0.5)


def test_unsupported_orders_rejected():
    with pytest.raises(ValueError):
        triangle_rule(21)
    with pytest.raises(ValueError):
        triangle_rule(-1)
    with pytest.raises(ValueError):
        edge_rule(-2)


def test_edge_one_point_integrates_constants():
    rule = edge_rule(0)
    assert len(rule.weights) == 1
    assert rule.weights.sum() == pytest.approx(1.0)


def test_edge_two_points_integrate_cubics():
    rule = edge_rule(3)
    assert len(rule.weights) == 2
    val = (rule.weights * rule.points[:, 0] ** 3).sum()
    assert val == pytest.approx(0.25, abs=1e-15)


def test_edge_weights_sum_to_length():
    coords = np.array([[[0.0, 0.0], [3.0, 4.0]]])
    _, wq = map_to_faces(edge_rule(4), coords)
    assert wq.sum() == pytest.approx(5.0)


def test_mapped_element_weights_sum_to_area():
    coords = np.array([[[0.0, 0.0], [2.0, 0.0], [0.0, 3.0]]])
    _, wq = map_to_elements(triangle_rule(6), coords)
    assert wq.sum() == pytest.approx(3.0)


@settings(max_examples=25, deadline=None)
@given(
    a=st.integers(min_value=0, max_value=4),
    b=st.integers(min_value=0, max_value=4),
)
def test_mapped_rule_integrates_monomials_on_physical_triangle(a, b):
    coords = np.array([[[0.2, -0.1], [1.1, 0.3], [0.4, 0.9]]])
    pts, wq = map_to_elements(triangle_rule(8), coords)
    approx = (wq * pts[..., 0] ** a * pts[..., 1] ** b).sum()
    dense_pts, dense_wq = map_to_elements(triangle_rule(16), coords)
    dense = (dense_wq * dense_pts[..., 0] ** a * dense_pts[..., 1] ** b).sum()
    assert approx == pytest.approx(dense, rel=1e-12)
