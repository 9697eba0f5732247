"""Smallest eigenvalues of the pencil ``A u = lambda B u``.

``B`` is singular: its kernel is the span of the interior nodal functions,
the discrete analogue of the functions vanishing on the boundary. The solver
therefore works with the reciprocal problem ``B u = mu A u`` (``mu = 1/lambda``),
whose nonzero spectrum is finite, and reduces it with a Cholesky factor of
the SPD operator.

Two reductions are available:

``"condensed"`` (default)
    Eliminates interior unknowns exactly through the Schur complement
    ``S = A_bb - A_bi A_ii^-1 A_ib``; the nonzero ``mu`` of ``(B, A)`` are
    those of ``(B_bb, S)``. Dense work is on the boundary block only.
``"dense"``
    Cholesky of the full ``A`` and a dense eigensolve of ``L^-1 B L^-T``.
    Quadratic memory in the vertex count; meant for small meshes and as a
    cross-check.
"""

import enum
from dataclasses import dataclass, replace
from math import comb

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .exceptions import (
    ConvergenceFailure,
    DegenerateTrace,
    GapViolation,
    NotACluster,
    NotPositiveDefinite,
)

__all__ = [
    "Normalization",
    "SpectralResult",
    "EigenCluster",
    "solve_pencil",
    "detect_cluster",
    "elementary_symmetric",
    "sym_functions",
    "gamma_functions",
    "renormalize",
    "DEFAULT_CLUSTER_TOL",
    "DEFAULT_SEP_TOL",
]

DEFAULT_CLUSTER_TOL = 1e-4
DEFAULT_SEP_TOL = 1e-2


class Normalization(str, enum.Enum):
    SOBOLEV = "sobolev"  # u^T A u = 1
    BOUNDARY = "boundary"  # u^T B u = 1

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"normalization must be 'sobolev' or 'boundary', got {value!r}") from None


@dataclass(frozen=True)
class SpectralResult:
    """Ascending eigenvalues with eigenvectors stored column-wise."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    pencil: object
    normalization: Normalization = Normalization.SOBOLEV

    def residuals(self):
        """Relative residuals ``|A u - lambda B u| / |A u|`` per eigenpair."""
        A, B = self.pencil.A, self.pencil.B
        AU = A @ self.eigenvectors
        R = AU - (B @ self.eigenvectors) * self.eigenvalues
        return np.linalg.norm(R, axis=0) / np.linalg.norm(AU, axis=0)


@dataclass(frozen=True)
class EigenCluster:
    """Eigenvalues with 1-based indices ``F`` and an orthonormal eigenbasis."""

    indices: tuple
    eigenvalues: np.ndarray
    basis: np.ndarray
    gap_ok: bool
    pencil: object
    normalization: Normalization = Normalization.SOBOLEV

    @property
    def size(self):
        return len(self.indices)

    @property
    def lam(self):
        """Representative value: mean of the eigenvalues in the cluster."""
        return float(np.mean(self.eigenvalues))

    def prefactor(self, h, normalization=None):
        """``lambda_F^p * C(|F|-1, h-1)`` with ``p = h`` (Sobolev) or ``h-1`` (boundary)."""
        norm = Normalization.parse(normalization or self.normalization)
        if not 1 <= h <= self.size:
            raise ValueError(f"h must lie in 1..{self.size}, got {h}")
        power = h if norm is Normalization.SOBOLEV else h - 1
        return self.lam**power * comb(self.size - 1, h - 1)


def _fix_signs(V):
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def _cholesky(M, what):
    try:
        return sla.cholesky(M, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"Cholesky factorization of {what} failed: {exc}") from exc


def _top_eigs(C, k):
    n = C.shape[0]
    try:
        mu, W = sla.eigh(C, subset_by_index=(n - k, n - 1), driver="evr")
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"dense eigensolver failed: {exc}") from exc
    return mu[::-1], W[:, ::-1]


def solve_pencil(pencil, k, method="condensed"):
    """The ``k`` smallest eigenvalues of ``A u = lambda B u``.

    Eigenvectors are normalized so that ``u^T A u = 1`` and signed so that
    their largest-magnitude component is positive.
    """
    mesh = pencil.mesh
    bnd = mesh.boundary_vertices
    if not 1 <= k <= len(bnd):
        raise ValueError(f"k must lie in 1..{len(bnd)} (boundary vertex count), got {k}")
    A, B = pencil.A, pencil.B

    if method == "condensed":
        inner = mesh.interior_vertices
        A_ii = A[inner][:, inner].tocsc()
        A_ib = A[inner][:, bnd].toarray()
        A_bb = A[bnd][:, bnd].toarray()
        B_bb = B[bnd][:, bnd].toarray()
        try:
            X = spla.splu(A_ii).solve(A_ib) if len(inner) else np.zeros((0, len(bnd)))
        except RuntimeError as exc:
            raise NotPositiveDefinite(f"interior block is singular: {exc}") from exc
        S = A_bb - A_ib.T @ X
        S = 0.5 * (S + S.T)
        L = _cholesky(S, "the condensed operator")
        T = sla.solve_triangular(L, B_bb, lower=True)
        C = sla.solve_triangular(L, T.T, lower=True)
        mu, W = _top_eigs(0.5 * (C + C.T), k)
        Ub = sla.solve_triangular(L, W, lower=True, trans="T")
        U = np.empty((mesh.n_vertices, k))
        U[bnd] = Ub
        U[inner] = -X @ Ub
    elif method == "dense":
        L = _cholesky(A.toarray(), "A")
        T = sla.solve_triangular(L, B.toarray(), lower=True)
        C = sla.solve_triangular(L, T.T, lower=True)
        mu, W = _top_eigs(0.5 * (C + C.T), k)
        U = sla.solve_triangular(L, W, lower=True, trans="T")
    else:
        raise ValueError(f"unknown method {method!r}")

    if np.any(mu <= 0.0):
        raise ConvergenceFailure(f"requested {k} eigenvalues but only {np.sum(mu > 0)} are finite")
    return SpectralResult(eigenvalues=1.0 / mu, eigenvectors=_fix_signs(U), pencil=pencil)


def _gram_schmidt(V, M):
    """Modified Gram-Schmidt in the ``M`` inner product."""
    V = np.array(V, dtype=float, copy=True)
    for j in range(V.shape[1]):
        for i in range(j):
            V[:, j] -= (V[:, i] @ (M @ V[:, j])) * V[:, i]
        V[:, j] /= np.sqrt(V[:, j] @ (M @ V[:, j]))
    return V


def detect_cluster(
    result,
    F,
    cluster_tol=DEFAULT_CLUSTER_TOL,
    sep_tol=DEFAULT_SEP_TOL,
    check_width=True,
    strict=True,
):
    """Extract the eigenvalue cluster with 1-based indices ``F``.

    Raises :class:`NotACluster` if the relative spread of the eigenvalues in
    ``F`` exceeds ``cluster_tol`` (skipped when ``check_width`` is false) and
    :class:`GapViolation` if an eigenvalue outside ``F`` lies within
    ``sep_tol * lambda_F`` (unless ``strict`` is false, in which case the
    returned cluster has ``gap_ok=False``).
    """
    F = tuple(sorted(int(j) for j in F))
    k = len(result.eigenvalues)
    if not F or F[0] < 1:
        raise ValueError("cluster indices are 1-based and must be nonempty")
    if F != tuple(range(F[0], F[-1] + 1)):
        raise ValueError(f"cluster indices must be contiguous, got {F}")
    if F[-1] >= k:
        raise ValueError(
            f"cluster {F} needs at least {F[-1] + 1} computed eigenvalues to check its gap; got {k}"
        )
    idx = np.array(F) - 1
    lams = result.eigenvalues[idx]
    lam_F = float(np.mean(lams))
    if check_width and np.max(np.abs(lams - lam_F)) > cluster_tol * lam_F:
        raise NotACluster(f"eigenvalues {lams.tolist()} at {F} are not a cluster", lams)
    outside = np.delete(result.eigenvalues, idx)
    gap = np.min(np.abs(outside - lam_F)) if len(outside) else np.inf
    gap_ok = bool(gap > sep_tol * lam_F)
    if strict and not gap_ok:
        near = outside[np.abs(outside - lam_F) <= sep_tol * lam_F]
        raise GapViolation(
            f"eigenvalue(s) {near.tolist()} outside {F} are within {sep_tol:g} of {lam_F:.6g}",
            np.concatenate([lams, near]),
        )
    basis = _gram_schmidt(result.eigenvectors[:, idx], result.pencil.A)
    return EigenCluster(
        indices=F,
        eigenvalues=lams.copy(),
        basis=basis,
        gap_ok=gap_ok,
        pencil=result.pencil,
        normalization=Normalization.SOBOLEV,
    )


def elementary_symmetric(values):
    """``e_1, ..., e_m`` of ``values`` by the product recurrence."""
    values = list(values)
    e = [1.0] + [0.0] * len(values)
    for x in values:
        for h in range(len(values), 0, -1):
            e[h] += x * e[h - 1]
    return np.array(e[1:])


def sym_functions(cluster):
    """Elementary symmetric functions of the individual eigenvalues in the cluster."""
    return elementary_symmetric(cluster.eigenvalues)


def gamma_functions(cluster):
    """Elementary symmetric functions of the reciprocals ``mu_j = 1/lambda_j``."""
    return elementary_symmetric(1.0 / np.asarray(cluster.eigenvalues))


def renormalize(cluster, target):
    """Orthonormalize the basis in the ``A`` (Sobolev) or ``B`` (boundary) product.

    Uses the symmetric (Loewdin) square root of the Gram matrix so that the
    new basis stays as close as possible to the old one.
    """
    target = Normalization.parse(target)
    M = cluster.pencil.A if target is Normalization.SOBOLEV else cluster.pencil.B
    V = cluster.basis
    G = V.T @ (M @ V)
    G = 0.5 * (G + G.T)
    g, Q = np.linalg.eigh(G)
    if g[0] <= 1e-14 * max(g[-1], 1e-300):
        raise DegenerateTrace(f"Gram matrix in the {target.value} product is singular: {g.tolist()}")
    inv_sqrt = (Q / np.sqrt(g)) @ Q.T
    return replace(cluster, basis=V @ inv_sqrt, normalization=target)
