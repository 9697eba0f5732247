"""Star-shaped planar domains as images of the unit disk.

A domain is described by a Fourier radius function

    rho(theta) = rho0 + sum_k a_k cos(k theta) + b_k sin(k theta)

and realized as the image of the closed unit disk under the blended radial
map

    phi(x) = x * (1 + chi(|x|) * (rho(theta(x)) - 1)),

where ``chi`` is a quintic smoothstep rising from 0 at ``blend_start`` to 1 at
``(1 + blend_start) / 2``. The map is the identity near the origin (so it is
C^2 there) and a pure radial scaling in the outer annulus, so the image
boundary is exactly the curve ``rho(t) (cos t, sin t)``.

All evaluators are vectorized over leading axes of their inputs.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidShape, NonDiffeo

__all__ = [
    "ShapeSpec",
    "PerturbSpec",
    "DiffeoMap",
    "BoundaryFrame",
    "eval_map",
    "eval_perturbation",
    "boundary_frame",
    "boundary_quadrature",
    "volume",
    "perimeter",
    "d_volume",
    "d_perimeter",
    "surface_functional",
    "d_surface_functional",
]

DEFAULT_BLEND_START = 0.3
DEFAULT_PANELS = 256

# 3-point Gauss-Legendre on [0, 1]
GAUSS3_NODES = 0.5 + 0.5 * np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)])
GAUSS3_WEIGHTS = np.array([5.0, 8.0, 5.0]) / 18.0


def _as_coeffs(values, name):
    try:
        arr = tuple(float(v) for v in values)
    except (TypeError, ValueError) as exc:
        raise InvalidShape(f"{name} must be a list of numbers", field=name) from exc
    if not all(math.isfinite(v) for v in arr):
        raise InvalidShape(f"{name} contains non-finite values", field=name)
    return arr


class _FourierSeries:
    """Shared evaluation for ``c0 + sum a_k cos k t + b_k sin k t``."""

    def _constant(self):
        raise NotImplementedError

    @property
    def order(self):
        return max(len(self.cos_coeffs), len(self.sin_coeffs))

    def _eval(self, t, deriv=0):
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, self._constant() if deriv == 0 else 0.0)
        # d^m/dt^m of cos(kt), sin(kt) cycles through (cos, -sin, -cos, sin)
        for k, a in enumerate(self.cos_coeffs, start=1):
            if a:
                out = out + a * k**deriv * _cos_deriv(k * t, deriv)
        for k, b in enumerate(self.sin_coeffs, start=1):
            if b:
                out = out + b * k**deriv * _cos_deriv(k * t - 0.5 * np.pi, deriv)
        return out

    def _coeff_dict(self, const_key):
        return {
            const_key: self._constant(),
            "cos": list(self.cos_coeffs),
            "sin": list(self.sin_coeffs),
        }


def _cos_deriv(arg, m):
    m %= 4
    if m == 0:
        return np.cos(arg)
    if m == 1:
        return -np.sin(arg)
    if m == 2:
        return -np.cos(arg)
    return np.sin(arg)


@dataclass(frozen=True)
class ShapeSpec(_FourierSeries):
    """Fourier description of a star-shaped boundary radius function."""

    rho0: float = 1.0
    cos_coeffs: tuple = ()
    sin_coeffs: tuple = ()
    blend_start: float = DEFAULT_BLEND_START

    def __post_init__(self):
        object.__setattr__(self, "cos_coeffs", _as_coeffs(self.cos_coeffs, "cos"))
        object.__setattr__(self, "sin_coeffs", _as_coeffs(self.sin_coeffs, "sin"))
        if not isinstance(self.rho0, (int, float)) or not math.isfinite(self.rho0):
            raise InvalidShape("rho0 must be a finite number", field="rho0")
        if not isinstance(self.blend_start, (int, float)) or not 0.0 < self.blend_start < 1.0:
            raise InvalidShape("blend_start must lie in (0, 1)", field="blend_start")
        object.__setattr__(self, "rho0", float(self.rho0))
        object.__setattr__(self, "blend_start", float(self.blend_start))
        n = max(16 * self.order, 512)
        if np.min(self.radius(np.linspace(0.0, 2 * np.pi, n, endpoint=False))) <= 0.0:
            raise InvalidShape("radius function must be positive", field="rho0")

    def _constant(self):
        return self.rho0

    def radius(self, t, deriv=0):
        """``rho(t)`` or its ``deriv``-th derivative."""
        return self._eval(t, deriv)

    @property
    def blend_end(self):
        return 0.5 * (1.0 + self.blend_start)

    def perturbed(self, pert, eps):
        """The shape with radius ``rho + eps * eta``."""
        K = max(self.order, pert.order)
        return ShapeSpec(
            rho0=self.rho0 + eps * pert.eta0,
            cos_coeffs=_padd(self.cos_coeffs, pert.cos_coeffs, eps, K),
            sin_coeffs=_padd(self.sin_coeffs, pert.sin_coeffs, eps, K),
            blend_start=self.blend_start,
        )

    def scaled(self, c):
        """The shape with radius ``c * rho``."""
        return ShapeSpec(
            rho0=c * self.rho0,
            cos_coeffs=tuple(c * a for a in self.cos_coeffs),
            sin_coeffs=tuple(c * b for b in self.sin_coeffs),
            blend_start=self.blend_start,
        )

    def mode_energy(self):
        """Energy of the non-constant modes, ``sum_k a_k^2 + b_k^2``."""
        return float(sum(a * a for a in self.cos_coeffs) + sum(b * b for b in self.sin_coeffs))

    def to_dict(self):
        d = self._coeff_dict("rho0")
        d["blend_start"] = self.blend_start
        return d

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise InvalidShape("shape description must be a JSON object", field="<root>")
        unknown = set(data) - {"rho0", "cos", "sin", "blend_start"}
        if unknown:
            raise InvalidShape(f"unknown field(s): {sorted(unknown)}", field=sorted(unknown)[0])
        if "rho0" not in data:
            raise InvalidShape("missing required field rho0", field="rho0")
        return cls(
            rho0=_as_number(data["rho0"], "rho0"),
            cos_coeffs=data.get("cos", ()),
            sin_coeffs=data.get("sin", ()),
            blend_start=_as_number(data.get("blend_start", DEFAULT_BLEND_START), "blend_start"),
        )

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidShape(f"invalid JSON: {exc}", field="<root>") from exc
        return cls.from_dict(data)

    def to_json(self):
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class PerturbSpec(_FourierSeries):
    """Fourier description ``eta(theta)`` of a normal boundary velocity.

    It induces the vector field ``psi(x) = chi(|x|) * eta(theta(x)) * x``, so
    that ``psi = eta * x`` on the unit circle.
    """

    eta0: float = 0.0
    cos_coeffs: tuple = ()
    sin_coeffs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "cos_coeffs", _as_coeffs(self.cos_coeffs, "cos"))
        object.__setattr__(self, "sin_coeffs", _as_coeffs(self.sin_coeffs, "sin"))
        if not isinstance(self.eta0, (int, float)) or not math.isfinite(self.eta0):
            raise InvalidShape("rho0 must be a finite number", field="rho0")
        object.__setattr__(self, "eta0", float(self.eta0))

    def _constant(self):
        return self.eta0

    def value(self, t, deriv=0):
        return self._eval(t, deriv)

    @classmethod
    def mode(cls, k, kind="cos", amplitude=1.0):
        """A single Fourier mode; ``k = 0`` is the dilation field."""
        if k == 0:
            return cls(eta0=amplitude)
        coeffs = [0.0] * k
        coeffs[k - 1] = amplitude
        if kind == "cos":
            return cls(cos_coeffs=coeffs)
        if kind == "sin":
            return cls(sin_coeffs=coeffs)
        raise ValueError(f"kind must be 'cos' or 'sin', got {kind!r}")

    def combine(self, other, alpha=1.0, beta=1.0):
        """``alpha * self + beta * other``."""
        K = max(self.order, other.order)
        return PerturbSpec(
            eta0=alpha * self.eta0 + beta * other.eta0,
            cos_coeffs=_lincomb(self.cos_coeffs, other.cos_coeffs, alpha, beta, K),
            sin_coeffs=_lincomb(self.sin_coeffs, other.sin_coeffs, alpha, beta, K),
        )

    def is_zero(self):
        return self.eta0 == 0 and not any(self.cos_coeffs) and not any(self.sin_coeffs)

    # Serialized with the same keys as ShapeSpec; "rho0" holds eta0.
    def to_dict(self):
        return self._coeff_dict("rho0")

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise InvalidShape("perturbation description must be a JSON object", field="<root>")
        unknown = set(data) - {"rho0", "cos", "sin", "blend_start"}
        if unknown:
            raise InvalidShape(f"unknown field(s): {sorted(unknown)}", field=sorted(unknown)[0])
        return cls(
            eta0=_as_number(data.get("rho0", 0.0), "rho0"),
            cos_coeffs=data.get("cos", ()),
            sin_coeffs=data.get("sin", ()),
        )

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidShape(f"invalid JSON: {exc}", field="<root>") from exc
        return cls.from_dict(data)


def _as_number(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidShape(f"{name} must be a number", field=name)
    return float(value)


def _padd(a, b, eps, K):
    return _lincomb(a, b, 1.0, eps, K)


def _lincomb(a, b, alpha, beta, K):
    a = list(a) + [0.0] * (K - len(a))
    b = list(b) + [0.0] * (K - len(b))
    return tuple(alpha * x + beta * y for x, y in zip(a, b))


def _smoothstep(r, s0, s1):
    """Quintic smoothstep ``chi`` and its derivative ``chi'`` in ``r``."""
    width = s1 - s0
    u = np.clip((r - s0) / width, 0.0, 1.0)
    chi = u**3 * (10.0 - 15.0 * u + 6.0 * u * u)
    dchi = 30.0 * u * u * (1.0 - u) ** 2 / width
    return chi, dchi


@dataclass(frozen=True)
class DiffeoMap:
    """The blended radial map of the closed unit disk onto a shape.

    Construction verifies that the Jacobian determinant is positive on a dense
    polar grid covering the blend annulus (elsewhere it is 1 or ``rho^2``).
    """

    shape: ShapeSpec
    check_points: int = field(default=64, compare=False)

    def __post_init__(self):
        s0 = self.shape.blend_start
        nt = max(16 * self.shape.order, 256)
        r = np.linspace(s0, 1.0, self.check_points)
        t = np.linspace(0.0, 2 * np.pi, nt, endpoint=False)
        R, T = np.meshgrid(r, t, indexing="ij")
        det = self._det_polar(R, T)
        if not np.all(det > 0.0):
            i = np.unravel_index(np.argmin(det), det.shape)
            raise NonDiffeo(
                f"det(grad phi) = {det[i]:.3g} <= 0 at r={R[i]:.3f}, theta={T[i]:.3f}; "
                f"shape too extreme for blend_start={s0}"
            )

    @property
    def blend_start(self):
        return self.shape.blend_start

    @property
    def blend_end(self):
        return self.shape.blend_end

    def _det_polar(self, r, t):
        chi, dchi = _smoothstep(r, self.blend_start, self.blend_end)
        rho_m1 = self.shape.radius(t) - 1.0
        s = 1.0 + chi * rho_m1
        return s * (s + r * dchi * rho_m1)

    def __call__(self, x):
        return eval_map(self, x)[0]


def eval_map(phi, x, check=True):
    """Evaluate ``phi(x)``, its Jacobian and Jacobian determinant.

    Parameters
    ----------
    phi : DiffeoMap
    x : array_like, shape (..., 2)
        Points of the closed unit disk.
    check : bool
        Raise :class:`NonDiffeo` if any determinant is not positive.

    Returns
    -------
    y : ndarray (..., 2)
    J : ndarray (..., 2, 2)
        ``J[..., i, j] = d phi_i / d x_j``.
    det : ndarray (...)
    """
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    r = np.hypot(x1, x2)
    if np.any(r > 1.0 + 1e-12):
        raise ValueError("eval_map: points must lie in the closed unit disk")
    theta = np.arctan2(x2, x1)
    chi, dchi = _smoothstep(r, phi.blend_start, phi.blend_end)
    rho = phi.shape.radius(theta)
    drho = phi.shape.radius(theta, 1)
    s = 1.0 + chi * (rho - 1.0)
    # chi and chi' vanish inside the blend start, so r there is never divided by
    safe_r = np.where(r >= phi.blend_start, r, 1.0)
    # grad s = chi' (rho - 1) x / r + chi rho' (-x2, x1) / r^2
    g_rad = dchi * (rho - 1.0) / safe_r
    g_ang = chi * drho / safe_r**2
    gs1 = g_rad * x1 - g_ang * x2
    gs2 = g_rad * x2 + g_ang * x1
    J = np.empty(x.shape + (2,))
    J[..., 0, 0] = s + x1 * gs1
    J[..., 0, 1] = x1 * gs2
    J[..., 1, 0] = x2 * gs1
    J[..., 1, 1] = s + x2 * gs2
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    if check and np.any(det <= 0.0):
        raise NonDiffeo(f"det(grad phi) = {np.min(det):.3g} <= 0")
    y = x * s[..., None]
    return y, J, det


def eval_perturbation(phi, pert, x):
    """The vector field ``psi(x) = chi(|x|) eta(theta) x`` induced by ``pert``."""
    x = np.asarray(x, dtype=float)
    r = np.hypot(x[..., 0], x[..., 1])
    chi, _ = _smoothstep(r, phi.blend_start, phi.blend_end)
    eta = pert.value(np.arctan2(x[..., 1], x[..., 0]))
    return x * (chi * eta)[..., None]


def _inv2(J):
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    inv = np.empty_like(J)
    inv[..., 0, 0] = J[..., 1, 1]
    inv[..., 0, 1] = -J[..., 0, 1]
    inv[..., 1, 0] = -J[..., 1, 0]
    inv[..., 1, 1] = J[..., 0, 0]
    return inv / det[..., None, None]


@dataclass(frozen=True)
class BoundaryFrame:
    """Geometry of the image boundary sampled at reference angles ``t``.

    ``weight`` converts arc length on the unit circle to arc length on the
    image boundary, ``|nu (grad phi)^-1| * |det grad phi|``.
    """

    t: np.ndarray
    point: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    curvature: np.ndarray
    weight: np.ndarray
    jacobian: np.ndarray

    def displacement(self, pert):
        """Boundary datum ``zeta = psi o phi^-1`` at the sample points."""
        eta = pert.value(self.t)
        return eta[:, None] * np.column_stack([np.cos(self.t), np.sin(self.t)])

    def normal_displacement(self, pert):
        """``zeta . nu`` at the sample points."""
        return np.einsum("ij,ij->i", self.displacement(pert), self.normal)

    def gradient_to_image(self, grad_ref):
        """Map reference gradients ``grad u`` (rows) to ``grad u (grad phi)^-1``."""
        return np.einsum("...j,...jk->...k", grad_ref, _inv2(self.jacobian))


def boundary_frame(phi, t):
    """Tangent, outward normal, curvature and surface weight at angles ``t``.

    Computed from the analytic curve ``c(t) = rho(t) (cos t, sin t)``; the
    curvature is positive for convex arcs (``H = 1`` on the unit circle).
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    shape = phi.shape
    rho, d1, d2 = shape.radius(t), shape.radius(t, 1), shape.radius(t, 2)
    e_r = np.column_stack([np.cos(t), np.sin(t)])
    e_t = np.column_stack([-np.sin(t), np.cos(t)])
    c = rho[:, None] * e_r
    dc = d1[:, None] * e_r + rho[:, None] * e_t
    ddc = (d2 - rho)[:, None] * e_r + 2.0 * d1[:, None] * e_t
    speed = np.hypot(dc[:, 0], dc[:, 1])
    tangent = dc / speed[:, None]
    normal = np.column_stack([tangent[:, 1], -tangent[:, 0]])
    curvature = (dc[:, 0] * ddc[:, 1] - dc[:, 1] * ddc[:, 0]) / speed**3

    _, J, det = eval_map(phi, e_r)
    nu_jinv = np.einsum("ij,ijk->ik", e_r, _inv2(J))
    weight = np.hypot(nu_jinv[:, 0], nu_jinv[:, 1]) * np.abs(det)
    return BoundaryFrame(
        t=t,
        point=c,
        tangent=tangent,
        normal=normal,
        curvature=curvature,
        weight=weight,
        jacobian=J,
    )


def boundary_quadrature(n_panels=DEFAULT_PANELS):
    """Composite 3-point Gauss rule on ``n_panels`` equal panels of [0, 2 pi).

    Returns nodes ``t`` and weights summing to ``2 pi``.
    """
    h = 2 * np.pi / n_panels
    start = h * np.arange(n_panels)
    t = (start[:, None] + h * GAUSS3_NODES[None, :]).ravel()
    wts = np.tile(h * GAUSS3_WEIGHTS, n_panels)
    return t, wts


def _polar_rule(phi, n_radial=8):
    """Tensor Gauss(r) x trapezoid(theta) rule on the unit disk.

    Radial panels break at the blend radii where the map is only C^2, so the
    determinant (polynomial in r on each panel, trigonometric in theta) is
    integrated exactly.
    """
    xg, wg = np.polynomial.legendre.leggauss(n_radial)
    breaks = [0.0, phi.blend_start, phi.blend_end, 1.0]
    r, wr = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        r.append(0.5 * (b - a) * xg + 0.5 * (a + b))
        wr.append(0.5 * (b - a) * wg)
    r, wr = np.concatenate(r), np.concatenate(wr)
    nt = max(4 * phi.shape.order + 16, 64)
    t = 2 * np.pi * np.arange(nt) / nt
    return r, wr * r, t, np.full(nt, 2 * np.pi / nt)


def volume(phi, method="domain", n_panels=DEFAULT_PANELS):
    """Area of ``phi(Omega)``.

    ``method="domain"`` integrates ``|det grad phi|`` over the unit disk with a
    polar rule; ``method="boundary"`` evaluates ``(1/2) \\oint rho^2``.
    """
    if method == "domain":
        r, wr, t, wt = _polar_rule(phi)
        R, T = np.meshgrid(r, t, indexing="ij")
        return float(np.einsum("i,j,ij->", wr, wt, np.abs(phi._det_polar(R, T))))
    if method == "boundary":
        t, wts = boundary_quadrature(n_panels)
        return float(0.5 * np.sum(wts * phi.shape.radius(t) ** 2))
    raise ValueError(f"unknown method {method!r}")


def perimeter(phi, n_panels=DEFAULT_PANELS):
    """Length of the image boundary, ``\\oint w d sigma`` over the unit circle."""
    t, wts = boundary_quadrature(n_panels)
    return float(np.sum(wts * boundary_frame(phi, t).weight))


def d_volume(phi, pert, n_panels=DEFAULT_PANELS):
    """Derivative of the area along ``pert``: ``\\oint zeta . nu d sigma``."""
    t, wts = boundary_quadrature(n_panels)
    fr = boundary_frame(phi, t)
    return float(np.sum(wts * fr.weight * fr.normal_displacement(pert)))


def d_perimeter(phi, pert, n_panels=DEFAULT_PANELS):
    """Derivative of the perimeter along ``pert``: ``\\oint H zeta . nu d sigma``."""
    t, wts = boundary_quadrature(n_panels)
    fr = boundary_frame(phi, t)
    return float(np.sum(wts * fr.weight * fr.curvature * fr.normal_displacement(pert)))


def _unit_circle(t):
    return np.column_stack([np.cos(t), np.sin(t)])


def surface_functional(phi, u, n_panels=DEFAULT_PANELS):
    """``B[phi] = \\int_{dOmega} u w d sigma`` for a field ``u`` on the reference disk.

    ``u`` maps an ``(n, 2)`` array of reference points to ``n`` values.
    """
    t, wts = boundary_quadrature(n_panels)
    fr = boundary_frame(phi, t)
    return float(np.sum(wts * fr.weight * np.asarray(u(_unit_circle(t)), dtype=float)))


def d_surface_functional(phi, u, grad_u, pert, n_panels=DEFAULT_PANELS):
    """Shape derivative of :func:`surface_functional` along ``pert``.

    With ``v = u o phi^-1`` and ``zeta = psi o phi^-1`` this is

        \\oint (H v + dv/dnu) zeta.nu d sigma - \\oint zeta . grad v d sigma

    on the image boundary. ``grad_u`` returns the ``(n, 2)`` reference gradient.
    """
    t, wts = boundary_quadrature(n_panels)
    fr = boundary_frame(phi, t)
    x = _unit_circle(t)
    v = np.asarray(u(x), dtype=float)
    grad_v = fr.gradient_to_image(np.asarray(grad_u(x), dtype=float))
    zeta = fr.displacement(pert)
    zn = np.einsum("ij,ij->i", zeta, fr.normal)
    dvdn = np.einsum("ij,ij->i", grad_v, fr.normal)
    integrand = (fr.curvature * v + dvdn) * zn - np.einsum("ij,ij->i", zeta, grad_v)
    return float(np.sum(wts * fr.weight * integrand))
