"""Invariant sublevel sets of planar certificates.

A valid certificate makes {x : V(x) <= V(x0)} forward invariant for every
admissible switching signal.  For n = 2 the boundary is traced in polar
coordinates without any root finding: V is homogeneous of degree 2c and
positive definite, so sublevel sets are star shaped about the origin and the
boundary radius along direction u is (level / V(u)) ** (1 / 2c).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .certificate import Certificate, eval_V


class UnsupportedDimensionError(ValueError):
    """Boundary tracing is only implemented for planar systems."""


class GridMismatchError(ValueError):
    """Sets must share one angular sample grid to be intersected."""


@dataclass(frozen=True)
class SublevelSet:
    """Closed polar boundary of {x : V(x) <= level} plus its area estimate.

    members holds (certificate, level) pairs; intersections carry one pair
    per intersected set and a point belongs to the set iff it satisfies every
    member's inequality.
    """

    theta: np.ndarray  # (samples + 1,), 0 .. 2*pi inclusive
    r: np.ndarray      # (samples + 1,), r[-1] == r[0]
    members: tuple[tuple[Certificate, float], ...]
    area: float
    area_error: float
    label: str

    @property
    def level(self) -> float | None:
        """Level of a single-certificate set; None for intersections."""
        return self.members[0][1] if len(self.members) == 1 else None


_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def _polar_area(theta: np.ndarray, r: np.ndarray) -> tuple[float, float]:
    """Trapezoidal area of a closed polar curve with a Richardson error estimate."""
    full = 0.5 * _trapezoid(r**2, theta)
    half = 0.5 * _trapezoid(r[::2] ** 2, theta[::2])
    return float(full), float(abs(full - half) / 3.0)


def boundary_trace(cert: Certificate, x0, samples: int = 720) -> SublevelSet:
    """Trace the boundary of the invariant set through x0.

    samples must be even (the area error estimate halves the grid) and at
    least 16.  The level is V(x0), which must be positive.
    """
    if cert.n != 2:
        raise UnsupportedDimensionError("boundary tracing needs a planar certificate")
    if samples < 16 or samples % 2 != 0:
        raise ValueError("samples must be an even count >= 16")
    x0 = np.asarray(x0, dtype=float)
    level = float(eval_V(cert, x0))
    if level <= 0.0:
        raise ValueError("x0 must be nonzero so the level is positive")

    theta = np.linspace(0.0, 2.0 * np.pi, samples + 1)
    unit = np.column_stack([np.cos(theta[:-1]), np.sin(theta[:-1])])
    vals = eval_V(cert, unit)
    r = (level / vals) ** (1.0 / (2.0 * cert.c))
    r = np.append(r, r[0])  # close the curve exactly
    area, err = _polar_area(theta, r)
    return SublevelSet(theta=theta, r=r, members=((cert, level),),
                       area=area, area_error=err, label=f"c={cert.c}")


def area(sublevel: SublevelSet) -> float:
    """Enclosed area; the O(samples**-2) error estimate is sublevel.area_error."""
    return sublevel.area


def intersect_levels(sets: list[SublevelSet]) -> SublevelSet:
    """Pointwise-minimum radius over sets sharing one angular grid."""
    if not sets:
        raise ValueError("need at least one set")
    base = sets[0]
    for s in sets[1:]:
        if s.theta.shape != base.theta.shape or not np.array_equal(s.theta, base.theta):
            raise GridMismatchError("sets were traced on different angular grids")
    r = np.min(np.stack([s.r for s in sets]), axis=0)
    members = tuple(pair for s in sets for pair in s.members)
    a, err = _polar_area(base.theta, r)
    return SublevelSet(theta=base.theta, r=r, members=members,
                       area=a, area_error=err, label="intersection")


def contains(sublevel: SublevelSet, x, slack: float = 0.0) -> bool:
    """Membership via V(x) <= level for every member; works in any dimension.

    slack loosens each level by a relative factor (1 + slack), which absorbs
    integration error when checking simulated trajectories.
    """
    x = np.asarray(x, dtype=float)
    return all(
        float(eval_V(cert, x)) <= level * (1.0 + slack)
        for cert, level in sublevel.members
    )


def write_boundary_csv(sublevel: SublevelSet, path) -> None:
    """Rows (theta, r, x1, x2); floats via repr so files round-trip exactly."""
    with open(path, "w") as fh:
        fh.write("theta,r,x1,x2\n")
        for th, rr in zip(sublevel.theta.tolist(), sublevel.r.tolist()):
            x1 = rr * np.cos(th)
            x2 = rr * np.sin(th)
            fh.write(f"{th!r},{rr!r},{float(x1)!r},{float(x2)!r}\n")


def set_summary(sublevel: SublevelSet) -> dict:
    return {
        "label": sublevel.label,
        "level": sublevel.level,
        "area": sublevel.area,
        "error_bound": sublevel.area_error,
    }


def write_area_json(sets: list[SublevelSet], path) -> None:
    with open(path, "w") as fh:
        json.dump([set_summary(s) for s in sets], fh, indent=2)
        fh.write("\n")
