"""Shape derivatives of eigenvalue clusters and criticality diagnostics.

For a cluster ``F`` with common eigenvalue ``lambda_F`` and eigenbasis
``v_l`` the derivative of the elementary symmetric function
``Lambda_{F,h}`` along a boundary velocity ``zeta`` is

    factor * \\oint g (zeta . nu) d sigma,
    g = sum_l |grad_T v_l|^2 + (1 - lambda_F H - lambda_F^2) v_l^2,

with ``factor = lambda_F^h C(|F|-1, h-1)`` when the basis is orthonormal
in W^{1,2} and ``lambda_F^(h-1) C(|F|-1, h-1)`` when it is orthonormal on the
boundary. The boundary integrals here use the Gauss nodes of the mesh
boundary edges, i.e. the same measure as the boundary mass matrix.
"""

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ClusterBroken, GapViolation, InvalidShape, NonDiffeo, NormalizationMismatch, StepFailure
from .fem import assemble, boundary_nodes, element_gradients
from .geometry import (
    GAUSS3_WEIGHTS,
    DiffeoMap,
    PerturbSpec,
    ShapeSpec,
    boundary_frame,
    d_perimeter,
    d_volume,
    perimeter,
)
from .oracle import richardson_diff
from .spectrum import (
    DEFAULT_SEP_TOL,
    Normalization,
    detect_cluster,
    renormalize,
    solve_pencil,
    sym_functions,
)

logger = logging.getLogger(__name__)

__all__ = [
    "Constraint",
    "GradientDensity",
    "CriticalityReport",
    "FlowRecord",
    "boundary_density",
    "hadamard_derivative",
    "fd_derivative",
    "criticality_report",
    "constrained_flow",
]


class Constraint(str, enum.Enum):
    VOLUME = "volume"
    PERIMETER = "perimeter"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"constraint must be 'volume' or 'perimeter', got {value!r}") from None


def _map_of(pencil):
    return pencil.phi if pencil.phi is not None else DiffeoMap(ShapeSpec())


@dataclass(frozen=True)
class GradientDensity:
    """Eigenfunction data at the boundary quadrature nodes.

    Arrays indexed ``[l, node]`` hold one row per basis function of the
    cluster; ``weight`` is the arc-length weight on the image boundary.
    """

    t: np.ndarray
    weight: np.ndarray
    curvature: np.ndarray
    frame: object
    values: np.ndarray
    grad: np.ndarray
    grad_tangential: np.ndarray
    grad_normal: np.ndarray
    lam: float
    eigenvalues: np.ndarray
    g: np.ndarray
    normalization: Normalization

    @property
    def v2_sum(self):
        return np.sum(self.values**2, axis=0)

    @property
    def gradT2_sum(self):
        return np.sum(self.grad_tangential**2, axis=0)

    def split_residual(self):
        """Max of ``| |grad v|^2 - (grad_T v)^2 - (dv/dnu)^2 |`` over all nodes."""
        full = np.sum(self.grad**2, axis=-1)
        return float(np.max(np.abs(full - self.grad_tangential**2 - self.grad_normal**2)))

    def bc_residual(self):
        """``L^2`` norm on the boundary of ``dv_l/dnu - lambda_l v_l``, summed over ``l``."""
        r = self.grad_normal - self.eigenvalues[:, None] * self.values
        return float(np.sqrt(np.sum(self.weight * r**2)))

    def integrate(self, f):
        return float(np.sum(self.weight * f))

    def rows(self):
        """Per-node records for the density CSV."""
        return zip(self.t, self.curvature, self.frame.weight, self.v2_sum, self.gradT2_sum, self.g)


def boundary_density(cluster, expected=Normalization.SOBOLEV):
    """Evaluate traces, gradients and the Hadamard density ``g`` on the boundary.

    Gradients are the constant P1 gradients of the triangle owning each
    boundary edge, pushed to the image by ``(grad phi)^-1`` and split along
    the analytic tangent and normal of the image curve.
    """
    expected = Normalization.parse(expected)
    if cluster.normalization is not expected:
        raise NormalizationMismatch(
            f"density requested for a {expected.value} basis, got {cluster.normalization.value}"
        )
    pencil = cluster.pencil
    mesh = pencil.mesh
    xi, t, chord = boundary_nodes(mesh)
    frame = boundary_frame(_map_of(pencil), t.ravel())
    weight = (chord[:, None] * GAUSS3_WEIGHTS[None, :]).ravel() * frame.weight

    U = cluster.basis.T
    e = mesh.boundary_edges
    values = np.stack([np.outer(u[e[:, 0]], 1.0 - xi) + np.outer(u[e[:, 1]], xi) for u in U])
    values = values.reshape(len(U), -1)
    grad_ref = np.stack([np.repeat(element_gradients(mesh, u)[mesh.edge_triangle], 3, axis=0) for u in U])
    grad = frame.gradient_to_image(grad_ref)
    g_t = np.einsum("lnd,nd->ln", grad, frame.tangent)
    g_n = np.einsum("lnd,nd->ln", grad, frame.normal)

    lam = cluster.lam
    H = frame.curvature
    g = np.sum(g_t**2 + (1.0 - lam * H - lam * lam)[None, :] * values**2, axis=0)
    return GradientDensity(
        t=frame.t,
        weight=weight,
        curvature=H,
        frame=frame,
        values=values,
        grad=grad,
        grad_tangential=g_t,
        grad_normal=g_n,
        lam=lam,
        eigenvalues=np.asarray(cluster.eigenvalues, dtype=float),
        g=g,
        normalization=expected,
    )


def _require_gap(cluster):
    if not cluster.gap_ok:
        raise GapViolation(
            f"cluster {cluster.indices} is not separated from the rest of the spectrum",
            cluster.eigenvalues,
        )


def hadamard_derivative(cluster, h, pert, normalization=Normalization.SOBOLEV):
    """Shape derivative of ``Lambda_{F,h}`` along ``pert`` from the boundary formula."""
    _require_gap(cluster)
    norm = Normalization.parse(normalization)
    cl = renormalize(cluster, norm)
    dens = boundary_density(cl, expected=norm)
    zn = dens.frame.normal_displacement(pert)
    return cl.prefactor(h, norm) * dens.integrate(dens.g * zn)


def _cluster_at(shape, mesh, F, sep_tol, method="condensed"):
    pencil = assemble(mesh, DiffeoMap(shape))
    result = solve_pencil(pencil, max(F) + 1, method=method)
    return detect_cluster(result, F, sep_tol=sep_tol, check_width=False, strict=False)


def lambda_along(shape, mesh, F, h, pert, sep_tol=DEFAULT_SEP_TOL):
    """``eps -> Lambda_{F,h}`` on the shapes ``rho + eps eta`` (same mesh)."""

    def f(eps):
        cl = _cluster_at(shape.perturbed(pert, eps), mesh, F, sep_tol)
        if not cl.gap_ok:
            raise ClusterBroken(f"cluster {cl.indices} lost its gap at eps={eps:g}", cl.eigenvalues)
        return float(sym_functions(cl)[h - 1])

    return f


def fd_derivative(shape, F, h, pert, eps, mesh, levels=1, sep_tol=DEFAULT_SEP_TOL):
    """Finite-difference derivative of ``Lambda_{F,h}`` along ``pert``.

    Central difference at ``eps`` (``levels=1``) or Richardson extrapolation
    over ``eps, eps/2, ...``. The pencil is re-assembled on the same mesh for
    every sample; the cluster is tracked by its index set.
    """
    if pert.is_zero():
        return 0.0
    value, _ = richardson_diff(lambda_along(shape, mesh, F, h, pert, sep_tol), eps, levels)
    return float(value)


@dataclass(frozen=True)
class CriticalityReport:
    """Least-squares fit of the density to the constant (volume) or to ``H`` (perimeter)."""

    constraint: Constraint
    constant: float
    residual: float
    multiplier: float
    h: int
    indices: tuple

    def to_dict(self):
        return {
            "constraint": self.constraint.value,
            "cluster": list(self.indices),
            "h": self.h,
            "constant": self.constant,
            "residual": self.residual,
            "multiplier": self.multiplier,
        }


def criticality_report(cluster, constraint, h=1, density=None):
    """Distance of the cluster's density from the overdetermined conditions.

    With ``m = 1`` (volume) or ``m = H`` (perimeter), fits ``g ~ C m`` in
    the boundary ``L^2`` product and reports ``|g - C m| / |g|``. The
    Lagrange multiplier is ``C`` times the derivative prefactor.
    """
    constraint = Constraint.parse(constraint)
    dens = density if density is not None else boundary_density(cluster)
    m = np.ones_like(dens.g) if constraint is Constraint.VOLUME else dens.curvature
    C = dens.integrate(dens.g * m) / dens.integrate(m * m)
    r = math.sqrt(dens.integrate((dens.g - C * m) ** 2) / dens.integrate(dens.g**2))
    return CriticalityReport(
        constraint=constraint,
        constant=float(C),
        residual=float(r),
        multiplier=float(cluster.prefactor(h, Normalization.SOBOLEV) * C),
        h=h,
        indices=cluster.indices,
    )


@dataclass(frozen=True)
class FlowRecord:
    step: int
    shape: ShapeSpec
    Lambda: float
    residual: float
    volume: float
    perimeter: float
    mode_energy: float
    step_size: float = field(default=float("nan"))

    def row(self):
        return (self.step, self.Lambda, self.residual, self.volume, self.perimeter, self.mode_energy)


def _exact_volume(shape):
    # (1/2) \oint rho^2 for a trigonometric polynomial
    return math.pi * (shape.rho0**2 + 0.5 * shape.mode_energy())


def _modes(K):
    """Basis perturbations for rho0, cos k, sin k (k = 1..K) and their wavenumbers."""
    perts = [PerturbSpec(eta0=1.0)]
    waves = [0]
    for k in range(1, K + 1):
        perts += [PerturbSpec.mode(k, "cos"), PerturbSpec.mode(k, "sin")]
        waves += [k, k]
    return perts, np.array(waves, dtype=float)


def _coeffs(shape, K):
    a = list(shape.cos_coeffs) + [0.0] * (K - len(shape.cos_coeffs))
    b = list(shape.sin_coeffs) + [0.0] * (K - len(shape.sin_coeffs))
    c = [shape.rho0]
    for k in range(K):
        c += [a[k], b[k]]
    return np.array(c)


def _shape_from(c, blend_start):
    return ShapeSpec(rho0=c[0], cos_coeffs=tuple(c[1::2]), sin_coeffs=tuple(c[2::2]), blend_start=blend_start)


def _restore(shape, constraint, target):
    if constraint is Constraint.VOLUME:
        return shape.scaled(math.sqrt(target / _exact_volume(shape)))
    # perimeter is homogeneous of degree one; iterate to absorb quadrature roundoff
    for _ in range(3):
        shape = shape.scaled(target / perimeter(DiffeoMap(shape)))
    return shape


def constrained_flow(
    shape0,
    mesh,
    F=(1,),
    h=1,
    constraint=Constraint.VOLUME,
    steps=200,
    step_size=1.0,
    n_modes=None,
    sep_tol=DEFAULT_SEP_TOL,
    max_halvings=10,
    gtol=1e-6,
):
    """Projected gradient ascent of ``Lambda_{F,h}`` over Fourier radius coefficients.

    The gradient with respect to each coefficient comes from the Hadamard
    formula, is preconditioned by ``1 / (1 + k^2)`` and projected onto the
    tangent space of the constraint. After each step the radius is rescaled
    so that the constraint holds exactly. Steps that leave the admissible
    class are halved up to ``max_halvings`` times.

    The run stops early once the largest component of the projected,
    preconditioned gradient drops to ``gtol``. Below that level the
    direction is dominated by mesh effects (e.g. the discrete spectrum is not
    translation invariant) rather than by the shape.

    Returns the list of :class:`FlowRecord`, one per visited shape
    (at most ``steps + 1`` records).
    """
    constraint = Constraint.parse(constraint)
    F = tuple(F)
    K = n_modes if n_modes is not None else max(shape0.order, 1)
    if K < shape0.order:
        raise ValueError(f"n_modes={K} cannot represent a shape of order {shape0.order}")
    perts, waves = _modes(K)
    precond = 1.0 / (1.0 + waves**2)
    blend = shape0.blend_start

    shape = _shape_from(_coeffs(shape0, K), blend)
    phi = DiffeoMap(shape)
    target = _exact_volume(shape) if constraint is Constraint.VOLUME else perimeter(phi)

    records = []
    for step in range(steps + 1):
        cl = detect_cluster(
            solve_pencil(assemble(mesh, phi), max(F) + 1), F, sep_tol=sep_tol, check_width=False
        )
        dens = boundary_density(cl)
        rep = criticality_report(cl, constraint, h=h, density=dens)
        Lam = float(sym_functions(cl)[h - 1])
        records.append(
            FlowRecord(
                step=step,
                shape=shape,
                Lambda=Lam,
                residual=rep.residual,
                volume=_exact_volume(shape),
                perimeter=perimeter(phi),
                mode_energy=shape.mode_energy(),
                step_size=step_size,
            )
        )
        logger.debug("flow step %d: Lambda=%.12g r=%.3g", step, Lam, rep.residual)
        if step == steps:
            break

        factor = cl.prefactor(h, Normalization.SOBOLEV)
        grad = np.array([factor * dens.integrate(dens.g * dens.frame.normal_displacement(p)) for p in perts])
        dcon = d_volume if constraint is Constraint.VOLUME else d_perimeter
        D = np.array([dcon(phi, p) for p in perts])
        mu = (D @ (precond * grad)) / (D @ (precond * D))
        direction = precond * (grad - mu * D)
        if np.max(np.abs(direction)) <= gtol:
            logger.info("flow converged at step %d (|direction| <= %g)", step, gtol)
            break

        c = _coeffs(shape, K)
        tau = step_size
        for _ in range(max_halvings + 1):
            try:
                trial = _restore(_shape_from(c + tau * direction, blend), constraint, target)
                phi = DiffeoMap(trial)
                break
            except (NonDiffeo, InvalidShape):
                tau *= 0.5
        else:
            raise StepFailure(f"step {step}: no admissible step after {max_halvings} halvings")
        shape = trial
    return records
