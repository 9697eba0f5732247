"""Estimator-style front end.

The objects here follow the scikit-learn conventions (constructor arguments
are hyperparameters, ``fit`` returns ``self``, learned state ends with an
underscore, ``get_params``/``set_params``/``clone`` work) so that sweeps
over mesh levels or tolerances can reuse the usual tooling. ``fit`` takes a
shape (a :class:`~steklov.geometry.ShapeSpec`, a dict in the JSON layout or
a path to a JSON file) instead of a feature matrix.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_cluster, check_h, check_level, check_perturbation, check_shape
from .fem import assemble, build_disk_mesh
from .geometry import DiffeoMap
from .shapegrad import (
    Constraint,
    boundary_density,
    constrained_flow,
    criticality_report,
    hadamard_derivative,
)
from .spectrum import (
    DEFAULT_CLUSTER_TOL,
    DEFAULT_SEP_TOL,
    Normalization,
    detect_cluster,
    solve_pencil,
    sym_functions,
)

__all__ = ["SteklovEigensolver", "HadamardGradient", "ConstrainedFlow"]


class SteklovEigensolver(BaseEstimator):
    """Smallest eigenvalues of ``Delta u = u``, ``du/dnu = lambda u`` on a shape.

    Parameters
    ----------
    level : int
        Refinement level of the disk mesh (``6 * 4**level`` triangles).
    n_eigenvalues : int
        Number of eigenvalues to compute.
    method : {"condensed", "dense"}
        Reduction used by :func:`~steklov.spectrum.solve_pencil`.
    cluster_tol, sep_tol : float
        Relative width and gap tolerances for cluster detection.

    Attributes
    ----------
    shape_, map_, mesh_, pencil_, result_ :
        The fitted shape, its map, mesh, assembled pencil and spectral result.
    eigenvalues_ : ndarray of shape (n_eigenvalues,)
    eigenvectors_ : ndarray of shape (n_vertices, n_eigenvalues)
    """

    def __init__(
        self,
        level=5,
        n_eigenvalues=6,
        method="condensed",
        cluster_tol=DEFAULT_CLUSTER_TOL,
        sep_tol=DEFAULT_SEP_TOL,
    ):
        self.level = level
        self.n_eigenvalues = n_eigenvalues
        self.method = method
        self.cluster_tol = cluster_tol
        self.sep_tol = sep_tol

    def fit(self, X, y=None, mesh=None):
        """Assemble and solve on shape ``X``; ``mesh`` overrides the level."""
        self.shape_ = check_shape(X)
        self.mesh_ = mesh if mesh is not None else build_disk_mesh(check_level(self.level))
        self.map_ = DiffeoMap(self.shape_)
        self.pencil_ = assemble(self.mesh_, self.map_)
        self.result_ = solve_pencil(self.pencil_, self.n_eigenvalues, method=self.method)
        self.eigenvalues_ = self.result_.eigenvalues
        self.eigenvectors_ = self.result_.eigenvectors
        return self

    def cluster(self, F):
        check_is_fitted(self, "result_")
        return detect_cluster(self.result_, check_cluster(F), self.cluster_tol, self.sep_tol)

    def symmetric_functions(self, F):
        """``Lambda_{F,h}`` for ``h = 1..|F|``."""
        return sym_functions(self.cluster(F))

    def density(self, F):
        return boundary_density(self.cluster(F))

    def shape_derivative(self, F, h, pert, normalization="sobolev"):
        cl = self.cluster(F)
        return hadamard_derivative(cl, check_h(h, cl.indices), check_perturbation(pert), normalization)

    def criticality(self, F, constraint="volume", h=1):
        cl = self.cluster(F)
        return criticality_report(cl, constraint, h=check_h(h, cl.indices))


class HadamardGradient(TransformerMixin, BaseEstimator):
    """Shape derivative of ``Lambda_{F,h}`` as a linear map on perturbations.

    ``fit(shape)`` solves the eigenproblem; ``transform(perts)`` returns one
    derivative per perturbation.
    """

    def __init__(self, level=5, cluster=(1,), h=1, normalization="sobolev", sep_tol=DEFAULT_SEP_TOL):
        self.level = level
        self.cluster = cluster
        self.h = h
        self.normalization = normalization
        self.sep_tol = sep_tol

    def fit(self, X, y=None):
        F = check_cluster(self.cluster)
        check_h(self.h, F)
        Normalization.parse(self.normalization)
        self.solver_ = SteklovEigensolver(
            level=self.level, n_eigenvalues=max(F) + 1, sep_tol=self.sep_tol
        ).fit(X)
        self.cluster_ = self.solver_.cluster(F)
        self.Lambda_ = sym_functions(self.cluster_)[self.h - 1]
        return self

    def transform(self, X):
        check_is_fitted(self, "cluster_")
        perts = [check_perturbation(p) for p in X]
        return np.array([hadamard_derivative(self.cluster_, self.h, p, self.normalization) for p in perts])


class ConstrainedFlow(BaseEstimator):
    """Volume- or perimeter-constrained gradient ascent of ``Lambda_{F,h}``.

    Attributes
    ----------
    trajectory_ : list of FlowRecord
    shape_ : ShapeSpec
        Last shape of the run.
    converged_ : bool
        Whether the run stopped on the gradient tolerance.
    """

    def __init__(
        self,
        level=4,
        cluster=(1,),
        h=1,
        constraint="volume",
        steps=200,
        step_size=1.0,
        n_modes=None,
        gtol=1e-6,
    ):
        self.level = level
        self.cluster = cluster
        self.h = h
        self.constraint = constraint
        self.steps = steps
        self.step_size = step_size
        self.n_modes = n_modes
        self.gtol = gtol

    def fit(self, X, y=None):
        F = check_cluster(self.cluster)
        shape = check_shape(X)
        self.mesh_ = build_disk_mesh(check_level(self.level))
        self.trajectory_ = constrained_flow(
            shape,
            self.mesh_,
            F=F,
            h=check_h(self.h, F),
            constraint=Constraint.parse(self.constraint),
            steps=self.steps,
            step_size=self.step_size,
            n_modes=self.n_modes,
            gtol=self.gtol,
        )
        self.shape_ = self.trajectory_[-1].shape
        self.converged_ = len(self.trajectory_) <= self.steps
        return self
