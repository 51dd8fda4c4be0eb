"""Greatest convex minorants and least concave majorants of finite diagrams.

A diagram is a finite set of planar points with strictly increasing
abscissae.  Its greatest convex minorant (GCM) is the lower convex hull,
viewed as a piecewise-linear function on ``[x_first, x_last]``; the least
concave majorant (LCM) is the upper hull.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidInputError


@dataclass(frozen=True)
class PointSet:
    """Finite planar diagram with strictly increasing ``x``."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise InvalidInputError("x and y must be 1-d arrays of equal length")
        if len(x) < 2:
            raise InvalidInputError("a diagram needs at least 2 points")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidInputError("diagram coordinates must be finite")
        if np.any(np.diff(x) <= 0):
            raise InvalidInputError("diagram x values must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_pairs(cls, pairs) -> "PointSet":
        arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])

    def __len__(self):
        return len(self.x)


@dataclass(frozen=True)
class PiecewiseLinearFn:
    """Continuous piecewise-linear function through ``vertices``.

    ``convex`` records which hull produced it (True for a GCM, False for
    an LCM); it is informational and not re-checked.
    """

    vx: np.ndarray
    vy: np.ndarray
    convex: bool = True

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.vx[0]), float(self.vx[-1])

    @property
    def vertices(self) -> np.ndarray:
        return np.column_stack([self.vx, self.vy])

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.vy) / np.diff(self.vx)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.domain
        if np.any((x < lo) | (x > hi)):
            raise DomainError(f"evaluation outside [{lo}, {hi}]")
        return np.interp(x, self.vx, self.vy)


def _lower_hull(x: np.ndarray, y: np.ndarray) -> list[int]:
    # monotone chain; pops on non-strict turns so collinear points drop out
    x, y = x.tolist(), y.tolist()
    hull: list[int] = []
    for k in range(len(x)):
        xk, yk = x[k], y[k]
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            if (y[j] - y[i]) * (xk - x[j]) >= (yk - y[j]) * (x[j] - x[i]):
                hull.pop()
            else:
                break
        hull.append(k)
    return hull


def gcm(diagram: PointSet) -> PiecewiseLinearFn:
    """Greatest convex minorant of ``diagram`` over ``[x_first, x_last]``.

    Vertices are a subset of the input points; collinear interior points
    are not kept as vertices.
    """
    if not isinstance(diagram, PointSet):
        diagram = PointSet.from_pairs(diagram)
    idx = _lower_hull(diagram.x, diagram.y)
    return PiecewiseLinearFn(diagram.x[idx], diagram.y[idx], convex=True)


def lcm(diagram: PointSet) -> PiecewiseLinearFn:
    """Least concave majorant of ``diagram``; the reflection of :func:`gcm`."""
    if not isinstance(diagram, PointSet):
        diagram = PointSet.from_pairs(diagram)
    idx = _lower_hull(diagram.x, -diagram.y)
    return PiecewiseLinearFn(diagram.x[idx], diagram.y[idx], convex=False)


def left_derivative(f: PiecewiseLinearFn, x):
    """Left derivative of ``f`` at ``x`` (vectorised).

    At a vertex the slope of the incoming segment is returned.  Defined on
    ``(x_first, x_last]``; anything else raises :class:`DomainError`.
    """
    xa = np.asarray(x, dtype=float)
    lo, hi = f.domain
    if np.any((xa <= lo) | (xa > hi)) or np.any(np.isnan(xa)):
        raise DomainError(f"left derivative is defined on ({lo}, {hi}] only")
    seg = np.searchsorted(f.vx, xa, side="left") - 1
    out = f.slopes[seg]
    return float(out) if out.ndim == 0 else out
