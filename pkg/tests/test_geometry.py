import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from steklov.exceptions import InvalidShape, NonDiffeo
from steklov.geometry import (
    DiffeoMap,
    PerturbSpec,
    ShapeSpec,
    boundary_frame,
    d_perimeter,
    d_surface_functional,
    d_volume,
    eval_map,
    eval_perturbation,
    perimeter,
    surface_functional,
    volume,
)
from steklov.oracle import richardson_diff

ELLIPTIC = ShapeSpec(1.0, (0, 0.2))
GENERIC = ShapeSpec(1.1, (0.05, 0.15, 0, 0.03), (0, 0.04, 0.06))
GENERIC_PERT = PerturbSpec(0.3, (0.2, 1.0), (0.4, 0, 1.0))

coef = st.floats(-0.04, 0.04)


def _admissible(shape):
    try:
        DiffeoMap(shape)
    except NonDiffeo:
        return False
    return True


shapes = st.builds(
    lambda r0, c, s: ShapeSpec(r0, c, s),
    st.floats(0.8, 1.4),
    st.lists(coef, max_size=4),
    st.lists(coef, max_size=4),
).filter(_admissible)
points = st.tuples(st.floats(0.0, 0.999), st.floats(0.0, 2 * math.pi)).map(
    lambda p: np.array([p[0] * math.cos(p[1]), p[0] * math.sin(p[1])])
)


def _fd_jacobian(phi, x, h=1e-6):
    J = np.empty((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        J[:, j] = (phi(x + e) - phi(x - e)) / (2 * h)
    return J


def test_identity_map():
    phi = DiffeoMap(ShapeSpec())
    x = np.array([[0.1, 0.2], [0.5, -0.3], [0.0, 1.0], [0.0, 0.0]])
    y, J, det = eval_map(phi, x)
    np.testing.assert_array_equal(y, x)
    np.testing.assert_allclose(J, np.broadcast_to(np.eye(2), J.shape), atol=1e-15)
    np.testing.assert_allclose(det, 1.0)


def test_core_is_untouched():
    phi = DiffeoMap(GENERIC)
    x = np.array([[0.1, 0.05], [-0.2, 0.1]])
    np.testing.assert_array_equal(phi(x), x)


def test_boundary_hits_curve():
    phi = DiffeoMap(GENERIC)
    t = np.linspace(0, 2 * np.pi, 37)
    y = phi(np.column_stack([np.cos(t), np.sin(t)]))
    np.testing.assert_allclose(np.hypot(*y.T), GENERIC.radius(t), rtol=1e-14)
    ang = np.arctan2(y[:, 1], y[:, 0])
    np.testing.assert_allclose(np.column_stack([np.cos(ang), np.sin(ang)]), np.column_stack([np.cos(t), np.sin(t)]), atol=1e-14)


@given(shapes, points)
def test_jacobian_matches_finite_differences(shape, x):
    phi = DiffeoMap(shape)
    _, J, det = eval_map(phi, x)
    np.testing.assert_allclose(J, _fd_jacobian(phi, x), atol=2e-8)
    assert det == pytest.approx(np.linalg.det(J), rel=1e-12)
    assert det > 0


@given(shapes, st.floats(1.0, 3.0))
def test_scaling_covariance(shape, c):
    phi, phic = DiffeoMap(shape), DiffeoMap(shape.scaled(c))
    assert volume(phic) == pytest.approx(c * c * volume(phi), rel=1e-12)
    assert perimeter(phic) == pytest.approx(c * perimeter(phi), rel=1e-12)
    t = np.linspace(0, 2 * np.pi, 11)
    np.testing.assert_allclose(boundary_frame(phic, t).curvature, boundary_frame(phi, t).curvature / c, rtol=1e-12)


def test_nondiffeo_detected():
    with pytest.raises(NonDiffeo):
        DiffeoMap(ShapeSpec(1.0, (0, 0, 0, 0, 0, 0, 0, 0.4)))


def test_strong_shrink_needs_earlier_blend():
    # the blend annulus cannot absorb rho = 0.5 when it starts at 0.3
    with pytest.raises(NonDiffeo):
        DiffeoMap(ShapeSpec(0.5))
    DiffeoMap(ShapeSpec(0.5, blend_start=0.05))


def test_eval_map_rejects_outside_points():
    with pytest.raises(ValueError):
        eval_map(DiffeoMap(ShapeSpec()), np.array([1.1, 0.0]))


def test_circle_frame():
    R = 1.7
    fr = boundary_frame(DiffeoMap(ShapeSpec(R)), np.linspace(0, 2 * np.pi, 9))
    np.testing.assert_allclose(fr.curvature, 1 / R, rtol=1e-14)
    np.testing.assert_allclose(fr.weight, R, rtol=1e-14)
    np.testing.assert_allclose(fr.normal, fr.point / R, atol=1e-14)


def test_curvature_closed_form():
    # rho = 1 + 0.2 cos 2t at t = 0: H = (rho^2 + 2 rho'^2 - rho rho'') / (rho^2 + rho'^2)^1.5
    fr = boundary_frame(DiffeoMap(ELLIPTIC), np.array([0.0, np.pi / 2]))
    assert fr.curvature[0] == pytest.approx((1.44 + 1.2 * 0.8) / 1.2**3, rel=1e-14)
    assert fr.curvature[1] == pytest.approx((0.64 - 0.8 * 0.8) / 0.8**3 + 0.0, abs=1e-14)


def _curve(shape, t):
    return shape.radius(t)[:, None] * np.column_stack([np.cos(t), np.sin(t)])


def test_curvature_vs_five_point_stencil():
    t = np.linspace(0.1, 6.0, 17)
    h = 1e-3
    c = [_curve(GENERIC, t + k * h) for k in (-2, -1, 0, 1, 2)]
    d1 = (c[0] - 8 * c[1] + 8 * c[3] - c[4]) / (12 * h)
    d2 = (-c[0] + 16 * c[1] - 30 * c[2] + 16 * c[3] - c[4]) / (12 * h * h)
    H = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / np.hypot(*d1.T) ** 3
    np.testing.assert_allclose(boundary_frame(DiffeoMap(GENERIC), t).curvature, H, atol=1e-7)


@given(shapes)
def test_normal_is_outward_unit(shape):
    fr = boundary_frame(DiffeoMap(shape), np.linspace(0, 2 * np.pi, 24, endpoint=False))
    np.testing.assert_allclose(np.hypot(*fr.normal.T), 1.0, rtol=1e-14)
    assert np.all(np.einsum("ij,ij->i", fr.normal, fr.point) > 0)
    np.testing.assert_allclose(np.einsum("ij,ij->i", fr.normal, fr.tangent), 0.0, atol=1e-14)


def test_weight_is_arc_length():
    t = np.linspace(0, 2 * np.pi, 13)
    fr = boundary_frame(DiffeoMap(GENERIC), t)
    speed = np.hypot(GENERIC.radius(t), GENERIC.radius(t, 1))
    np.testing.assert_allclose(fr.weight, speed, rtol=1e-13)


def test_volume_examples():
    assert volume(DiffeoMap(ShapeSpec())) == pytest.approx(math.pi, rel=1e-14)
    phi = DiffeoMap(ShapeSpec(1.0, (0, 0, 0.2)))
    assert volume(phi) == pytest.approx(math.pi * 1.02, rel=1e-13)
    assert volume(phi, "boundary") == pytest.approx(math.pi * 1.02, rel=1e-13)


@given(shapes)
def test_volume_routes_agree(shape):
    phi = DiffeoMap(shape)
    assert volume(phi, "domain") == pytest.approx(volume(phi, "boundary"), rel=1e-12)


def test_perimeter_examples():
    assert perimeter(DiffeoMap(ShapeSpec(2.0))) == pytest.approx(4 * math.pi, rel=1e-14)
    # ellipse-like shape: independent arc-length quadrature
    t = np.linspace(0, 2 * np.pi, 20001)
    speed = np.hypot(ELLIPTIC.radius(t), ELLIPTIC.radius(t, 1))
    ref = np.trapezoid(speed, t) if hasattr(np, "trapezoid") else np.trapz(speed, t)
    assert perimeter(DiffeoMap(ELLIPTIC)) == pytest.approx(ref, rel=1e-10)


def test_disk_derivatives():
    phi = DiffeoMap(ShapeSpec())
    assert d_volume(phi, PerturbSpec(1.0)) == pytest.approx(2 * math.pi, rel=1e-14)
    assert d_perimeter(phi, PerturbSpec(1.0)) == pytest.approx(2 * math.pi, rel=1e-14)
    for k in range(1, 5):
        assert abs(d_volume(phi, PerturbSpec.mode(k, "cos"))) < 1e-13
        assert abs(d_perimeter(phi, PerturbSpec.mode(k, "sin"))) < 1e-13


@pytest.mark.parametrize("shape", [ELLIPTIC, GENERIC])
def test_volume_perimeter_derivatives_vs_richardson(shape):
    phi = DiffeoMap(shape)
    for fn, dfn in ((volume, d_volume), (perimeter, d_perimeter)):
        fd, _ = richardson_diff(lambda e, fn=fn: fn(DiffeoMap(shape.perturbed(GENERIC_PERT, e))), 1e-2, 4)
        assert dfn(phi, GENERIC_PERT) == pytest.approx(fd, rel=1e-10)


def test_surface_functional_values():
    disk = DiffeoMap(ShapeSpec())
    assert surface_functional(disk, lambda x: np.ones(len(x))) == pytest.approx(2 * math.pi)
    assert abs(surface_functional(disk, lambda x: x[:, 0])) < 1e-13
    assert surface_functional(disk, lambda x: x[:, 0] ** 2) == pytest.approx(math.pi, rel=1e-13)


def test_surface_functional_derivative_generic():
    u = lambda x: x[:, 0] * x[:, 1] + x[:, 1]
    du = lambda x: np.column_stack([x[:, 1], x[:, 0] + 1])
    phi = DiffeoMap(GENERIC)
    fd, _ = richardson_diff(lambda e: surface_functional(DiffeoMap(GENERIC.perturbed(GENERIC_PERT, e)), u), 1e-2, 4)
    assert d_surface_functional(phi, u, du, GENERIC_PERT) == pytest.approx(fd, rel=1e-8)


def test_perturbation_field_on_circle():
    phi = DiffeoMap(GENERIC)
    t = np.linspace(0, 2 * np.pi, 7)
    x = np.column_stack([np.cos(t), np.sin(t)])
    np.testing.assert_allclose(eval_perturbation(phi, GENERIC_PERT, x), GENERIC_PERT.value(t)[:, None] * x)
    assert np.all(eval_perturbation(phi, GENERIC_PERT, 0.2 * x) == 0)


def test_perturbed_shape_is_radius_sum():
    t = np.linspace(0, 2 * np.pi, 11)
    s = GENERIC.perturbed(GENERIC_PERT, 0.01)
    np.testing.assert_allclose(s.radius(t), GENERIC.radius(t) + 0.01 * GENERIC_PERT.value(t), rtol=1e-15)


def test_perturbation_algebra():
    p = PerturbSpec.mode(2, "sin", 3.0)
    assert p.sin_coeffs == (0.0, 3.0) and p.eta0 == 0.0
    assert PerturbSpec.mode(0).eta0 == 1.0
    q = p.combine(PerturbSpec(1.0, (1.0,)), 2.0, -1.0)
    t = np.linspace(0, 6, 5)
    np.testing.assert_allclose(q.value(t), 6 * np.sin(2 * t) - 1 - np.cos(t))
    assert PerturbSpec().is_zero() and not p.is_zero()


@given(shapes)
def test_json_round_trip(shape):
    assert ShapeSpec.from_json(shape.to_json()) == shape


def test_json_layout():
    d = json.loads(ShapeSpec(1.0, (0.1,), (0, 0.2)).to_json())
    assert d["rho0"] == 1.0 and d["cos"] == [0.1] and d["sin"] == [0, 0.2]


@pytest.mark.parametrize(
    "text, field",
    [
        ('{"cos": [0.1]}', "rho0"),
        ('{"rho0": "one"}', "rho0"),
        ('{"rho0": 1, "cos": [0.1, "x"]}', "cos"),
        ('{"rho0": 1, "cosine": [0.1]}', "cosine"),
        ('{"rho0": 1, "blend_start": 1.5}', "blend_start"),
        ('{"rho0": 0.5, "cos": [0.8]}', "rho0"),
        ("[1, 2]", "<root>"),
        ("{not json", "<root>"),
    ],
)
def test_malformed_shape(text, field):
    with pytest.raises(InvalidShape) as info:
        ShapeSpec.from_json(text)
    assert info.value.field == field
