"""Closed-form recovery of yaw and depth from one keyedge-ratio tuple.

Writing e1 = r1 - 1 and e2 = r2 - 1, each reference keyedge has a
placeholder row (Rtheta_w, Rtheta_l, Rd_w, Rd_l) that rearranges and signs
(e1, e2) so that a single pair of formulas inverts every tuple:

    theta = atan2(width * Rtheta_w, length * Rtheta_l)
    d_ref = (Rd_w^2 / width^2 + Rd_l^2 / length^2) ** -0.5

        reference   Rtheta_w  Rtheta_l  Rd_w  Rd_l
        a            e1       -e2        e2    e1
        b            e2        e1        e1    e2
        c           -e1        e2        e2    e1
        d           -e2       -e1        e1    e2

The object-center depth adds half the signed offset delta_d between the
reference keyedge and the center:

        a:  l sin(theta) - w cos(theta)
        b:  l sin(theta) + w cos(theta)
        c: -l sin(theta) + w cos(theta)
        d: -l sin(theta) - w cos(theta)

For any reference this composes to d_obj = d_ref * (1 + (e1 + e2) / 2)
with d_ref = (e1^2/k1^2 + e2^2/k2^2)^(-1/2), where (k1, k2) is (w, l) for
references b, d and (l, w) for references a, c; axis_scales exposes that
pairing for the uncertainty propagation.

No focal length appears anywhere here: the ratios already cancelled it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .geometry import normalize_angle
from .indexing import RatioTuple

# Below this distortion a tuple pins no depth: d_ref would exceed roughly
# 1e10 * min(length, width).
DEGENERACY_TOL = 1e-10


class UnobservableDistortion(ValueError):
    """Both ratios are too close to 1 to carry depth information."""


class InvalidDims(ValueError):
    """A physical dimension is zero, negative, or not finite."""


class NonPositiveResult(ValueError):
    """The recovered center depth came out non-positive (inconsistent inputs)."""


class AllDegenerate(ValueError):
    """Every tuple of an observation was unobservable."""


@dataclass(frozen=True)
class PlaceholderRow:
    """Signed rearrangement of (e1, e2) for one reference keyedge."""

    reference: str
    rtheta_w: float
    rtheta_l: float
    rd_w: float
    rd_l: float


@dataclass(frozen=True)
class PoseEstimate:
    """One tuple's inversion: yaw, reference-keyedge depth, center depth."""

    theta: float
    d_ref: float
    d_obj: float
    reference: str


_ROW_SIGNS = {
    # reference: ((sign, which) for Rtheta_w, Rtheta_l, Rd_w, Rd_l),
    # where which selects e1 or e2
    "a": ((1, 0), (-1, 1), (1, 1), (1, 0)),
    "b": ((1, 1), (1, 0), (1, 0), (1, 1)),
    "c": ((-1, 0), (1, 1), (1, 1), (1, 0)),
    "d": ((-1, 1), (-1, 0), (1, 0), (1, 1)),
}


def placeholder_row(t: RatioTuple) -> PlaceholderRow:
    """The (Rtheta_w, Rtheta_l, Rd_w, Rd_l) row for the tuple's reference."""
    e = (t.r1 - 1.0, t.r2 - 1.0)
    values = [sign * e[which] for sign, which in _ROW_SIGNS[t.reference]]
    return PlaceholderRow(t.reference, *values)


def _check_dims(length: float, width: float) -> None:
    for name, v in (("length", length), ("width", width)):
        if not (math.isfinite(v) and v > 0.0):
            raise InvalidDims(f"{name} must be positive, got {v}")


def solve_tuple(t: RatioTuple, length: float, width: float) -> tuple[float, float]:
    """Invert one tuple to (theta, d_ref).

    Negative distortions (r < 1) are taken as-is; they encode the viewing
    side.  Raises UnobservableDistortion when both ratios sit within
    DEGENERACY_TOL of 1.
    """
    _check_dims(length, width)
    if max(abs(t.r1 - 1.0), abs(t.r2 - 1.0)) < DEGENERACY_TOL:
        raise UnobservableDistortion(
            f"tuple {t.reference}: ratios {t.r1}, {t.r2} are indistinguishable from 1"
        )
    row = placeholder_row(t)
    theta = normalize_angle(math.atan2(width * row.rtheta_w, length * row.rtheta_l))
    d_ref = 1.0 / math.sqrt((row.rd_w / width) ** 2 + (row.rd_l / length) ** 2)
    return theta, d_ref


def center_offset(reference: str, theta: float, length: float, width: float) -> float:
    """Signed depth offset delta_d from the reference keyedge to the center."""
    s = length * math.sin(theta)
    c = width * math.cos(theta)
    return {"a": s - c, "b": s + c, "c": -s + c, "d": -s - c}[reference]


def center_depth(
    theta: float, d_ref: float, reference: str, length: float, width: float
) -> float:
    """Object-center depth d_obj = d_ref + delta_d / 2."""
    if d_ref <= 0.0:
        raise ValueError(f"d_ref must be positive, got {d_ref}")
    d_obj = d_ref + 0.5 * center_offset(reference, theta, length, width)
    if d_obj <= 0.0:
        raise NonPositiveResult(
            f"reference {reference}: center depth {d_obj} from d_ref {d_ref}"
        )
    return d_obj


def axis_scales(reference: str, length: float, width: float) -> tuple[float, float]:
    """(k1, k2) pairing each ratio with its dimension in the unified depth form.

    d_ref = (e1^2/k1^2 + e2^2/k2^2)^(-1/2); references b and d pair e1 with
    the width, references a and c pair e1 with the length.
    """
    if reference in ("b", "d"):
        return width, length
    if reference in ("a", "c"):
        return length, width
    raise ValueError(f"unknown reference {reference!r}")


def pose_estimate(t: RatioTuple, length: float, width: float) -> PoseEstimate:
    """Full inversion of one tuple: theta, d_ref, and d_obj."""
    theta, d_ref = solve_tuple(t, length, width)
    d_obj = center_depth(theta, d_ref, t.reference, length, width)
    return PoseEstimate(theta=theta, d_ref=d_ref, d_obj=d_obj, reference=t.reference)


def solve_all(
    tuples: Iterable[RatioTuple], length: float, width: float
) -> tuple[list[PoseEstimate], list[tuple[str, str]]]:
    """Invert every tuple; degenerate ones are excluded with a reason.

    Returns (estimates, skipped) where skipped holds (reference, reason)
    pairs.  Raises AllDegenerate when nothing survives.
    """
    _check_dims(length, width)
    estimates: list[PoseEstimate] = []
    skipped: list[tuple[str, str]] = []
    for t in tuples:
        try:
            estimates.append(pose_estimate(t, length, width))
        except UnobservableDistortion:
            skipped.append((t.reference, "unobservable distortion"))
        except NonPositiveResult:
            skipped.append((t.reference, "non-positive center depth"))
    if not estimates:
        raise AllDegenerate(f"no usable tuple among {[s[0] for s in skipped]}")
    return estimates, skipped
