"""Input coercion shared by the estimators and the CLI."""

import json
import os
from numbers import Integral

from .exceptions import InvalidShape, SteklovValidationError
from .geometry import PerturbSpec, ShapeSpec

MIN_LEVEL, MAX_LEVEL = 0, 8


def _load_json_file(path, kind):
    if not os.path.isfile(path):
        raise InvalidShape(f"{kind} file not found: {path}", field="<path>")
    with open(path) as fh:
        text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidShape(f"{kind} file {path} is not valid JSON: {exc}", field="<root>") from exc


def check_shape(X):
    """Coerce a ShapeSpec, a mapping or a JSON file path to a :class:`ShapeSpec`."""
    if isinstance(X, ShapeSpec):
        return X
    if isinstance(X, (str, os.PathLike)):
        X = _load_json_file(os.fspath(X), "shape")
    if isinstance(X, dict):
        return ShapeSpec.from_dict(X)
    raise InvalidShape(f"cannot interpret {type(X).__name__} as a shape", field="<root>")


def check_perturbation(p):
    """Coerce a PerturbSpec, mapping, JSON path or number (dilation amplitude)."""
    if isinstance(p, PerturbSpec):
        return p
    if isinstance(p, (int, float)) and not isinstance(p, bool):
        return PerturbSpec(eta0=float(p))
    if isinstance(p, (str, os.PathLike)):
        p = _load_json_file(os.fspath(p), "perturbation")
    if isinstance(p, dict):
        return PerturbSpec.from_dict(p)
    raise InvalidShape(f"cannot interpret {type(p).__name__} as a perturbation", field="<root>")


def check_level(level, low=MIN_LEVEL, high=MAX_LEVEL):
    if not isinstance(level, Integral) or not low <= level <= high:
        raise SteklovValidationError(f"mesh level must be an integer in [{low}, {high}], got {level!r}")
    return int(level)


def check_cluster(F):
    """Parse ``"2,3"``, ``3`` or ``(2, 3)`` into a sorted tuple of 1-based indices."""
    if isinstance(F, str):
        try:
            F = [int(s) for s in F.split(",") if s.strip()]
        except ValueError:
            raise SteklovValidationError(f"cluster must be a comma-separated list of integers, got {F!r}") from None
    elif isinstance(F, Integral):
        F = [F]
    F = tuple(sorted(int(j) for j in F))
    if not F or F[0] < 1:
        raise SteklovValidationError(f"cluster indices are 1-based and nonempty, got {F}")
    if F != tuple(range(F[0], F[-1] + 1)):
        raise SteklovValidationError(f"cluster indices must be contiguous, got {F}")
    return F


def check_h(h, F):
    if not isinstance(h, Integral) or not 1 <= h <= len(F):
        raise SteklovValidationError(f"h must lie in 1..{len(F)} for cluster {F}, got {h!r}")
    return int(h)
