"""Closed-form reference values on the disk and a Richardson differentiator.

Modified Bessel functions are summed from their power series, which is
accurate to machine precision for the small arguments (x <= ~4) used here.
Nothing in this module touches the finite-element code, so it can serve as
an independent oracle for it.
"""

import math

from .exceptions import EvaluationFailure

__all__ = [
    "bessel_i",
    "bessel_i_prime",
    "disk_eigenvalue",
    "disk_spectrum",
    "disk_dilation_derivative",
    "richardson_diff",
]

_SERIES_RTOL = 1e-17
_MAX_TERMS = 500


def bessel_i(n, x):
    """Modified Bessel function of the first kind, ``I_n(x)``, for ``x > 0``.

    Sums ``(x/2)^(n+2m) / (m! (m+n)!)`` until a term drops below
    ``1e-17`` of the partial sum.
    """
    if n < 0:
        raise ValueError(f"order must be nonnegative, got {n}")
    if x <= 0:
        raise ValueError(f"argument must be positive, got {x}")
    half = 0.5 * x
    term = half**n / math.factorial(n)
    total = term
    q = half * half
    for m in range(1, _MAX_TERMS):
        term *= q / (m * (m + n))
        total += term
        if term < _SERIES_RTOL * total:
            break
    return total


def bessel_i_prime(n, x):
    """Derivative ``I_n'(x)``; uses ``I_0' = I_1`` and ``(I_{n-1} + I_{n+1})/2``."""
    if n == 0:
        return bessel_i(1, x)
    return 0.5 * (bessel_i(n - 1, x) + bessel_i(n + 1, x))


def disk_eigenvalue(n, R=1.0):
    """Eigenvalue of angular order ``n`` on the disk of radius ``R``.

    Separation of variables gives eigenfunctions ``I_n(r) cos(n theta)`` and
    ``I_n(r) sin(n theta)``, so ``lambda = I_n'(R) / I_n(R)``; multiplicity is
    1 for ``n = 0`` and 2 otherwise.
    """
    if R <= 0:
        raise ValueError(f"radius must be positive, got {R}")
    return bessel_i_prime(n, R) / bessel_i(n, R)


def disk_spectrum(count, R=1.0):
    """The ``count`` smallest disk eigenvalues, repeated by multiplicity.

    Returns a list of ``(lambda, n)`` pairs in ascending order.
    """
    out = []
    n = 0
    while len(out) < count:
        lam = disk_eigenvalue(n, R)
        out.extend([(lam, n)] * (1 if n == 0 else 2))
        n += 1
    out.sort()
    return out[:count]


def disk_dilation_derivative(n, R=1.0):
    """``d lambda_n / dR`` for the disk of radius ``R``.

    With ``lambda = I_n'/I_n`` and the Bessel equation
    ``I_n'' = (1 + n^2/R^2) I_n - I_n'/R`` this is
    ``1 + n^2/R^2 - lambda/R - lambda^2``.
    """
    lam = disk_eigenvalue(n, R)
    return 1.0 + n * n / (R * R) - lam / R - lam * lam


def richardson_diff(f, eps0, levels=4):
    """Derivative of ``f`` at 0 by central differences and Richardson extrapolation.

    Central differences are taken at ``eps0 / 2**i`` for ``i < levels`` and
    combined in a Neville table that eliminates the ``eps**2``, ``eps**4``, ...
    error terms.

    Returns
    -------
    derivative : float
        Extrapolated slope.
    error : float
        Magnitude of the last correction applied, a rough error estimate.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    table = []
    for i in range(levels):
        eps = eps0 / 2**i
        fp, fm = f(eps), f(-eps)
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise EvaluationFailure(f"non-finite sample at eps={eps:g}")
        row = [(fp - fm) / (2.0 * eps)]
        for j in range(1, i + 1):
            factor = 4.0**j
            row.append(row[j - 1] + (row[j - 1] - table[i - 1][j - 1]) / (factor - 1.0))
        table.append(row)
    last = table[-1]
    err = abs(last[-1] - last[-2]) if len(last) > 1 else float("nan")
    return last[-1], err
