"""Camera-centric keyedge indexing, allocentric groups, tuple conversion.

Object-centric letters a, b, c, d are fixed to the box, so which letter
faces the camera changes with the allocentric angle alpha.  Camera-centric
indexing relabels the keyedges 1..4: index 1 is the keyedge whose bottom
corner is nearest the camera center (Euclidean distance), and 2, 3, 4
continue in the object's clockwise order.  With that labeling the observed
ratios [r21, r41, r32, r34] stay at or below 1 whenever the nearest
keyedge is also the minimum-depth keyedge; they can exceed 1 slightly when
the two differ, which happens only off the optical axis.

The nearest letter is a function of alpha alone.  Partitioning [-pi, pi)
into quarters gives the allocentric group, which fixes the cyclic offset
between the labelings:

    group 0: alpha in [-pi, -pi/2)   nearest keyedge d
    group 1: alpha in [-pi/2, 0)     nearest keyedge c
    group 2: alpha in [0, pi/2)      nearest keyedge b
    group 3: alpha in [pi/2, pi)     nearest keyedge a

Exactly on a quarter boundary two corners are equidistant; ties break to
the lowest letter at relative tolerance 1e-9.  (At alpha = -pi the
tie-break picks a while the quarter rule says d; the set is measure zero
and the emitted group always matches the letter actually used.)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .geometry import KEYEDGES, KeyedgeObservation, ZeroHeight, normalize_angle

# Nearest keyedge letter for each allocentric group.
NEAREST_BY_GROUP = ("d", "c", "b", "a")
GROUP_BY_NEAREST = {letter: g for g, letter in enumerate(NEAREST_BY_GROUP)}

DISTANCE_TIE_REL = 1e-9


class DegenerateObservation(ValueError):
    """Nearest-keyedge selection is ambiguous.

    The lowest-letter tie-break resolves every tie finite geometry can
    produce, so this fires only for observations with non-finite
    distances.
    """


def allocentric_group(alpha: float) -> int:
    """Quarter index of alpha under the fixed partition of [-pi, pi).

    Explicit comparisons keep the half-open boundaries exact; a floor of
    (alpha + pi) / (pi / 2) would absorb values tiny relative to pi.
    """
    alpha = normalize_angle(alpha)
    if alpha < -math.pi / 2.0:
        return 0
    if alpha < 0.0:
        return 1
    if alpha < math.pi / 2.0:
        return 2
    return 3


def nearest_keyedge(distances: Mapping[str, float]) -> str:
    """Letter with the smallest camera distance; ties go to the lowest letter."""
    values = [distances[k] for k in KEYEDGES]
    if not all(math.isfinite(v) for v in values):
        raise DegenerateObservation(f"non-finite keyedge distances: {distances}")
    cutoff = min(values) * (1.0 + DISTANCE_TIE_REL)
    for k in KEYEDGES:
        if distances[k] <= cutoff:
            return k
    raise DegenerateObservation(f"no nearest keyedge among {distances}")


@dataclass(frozen=True)
class CameraCentricRatios:
    """Height ratios under camera-centric indexing plus the group.

    r_pq = h_p / h_q for camera indices p, q; index 1 is the nearest
    keyedge and the group records which letter that is.
    """

    r21: float
    r41: float
    r32: float
    r34: float
    group: int

    def __post_init__(self):
        for name in ("r21", "r41", "r32", "r34"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError(f"{name} must be positive, got {v}")
        if self.group not in (0, 1, 2, 3):
            raise ValueError(f"group must be in 0..3, got {self.group}")

    @property
    def nearest(self) -> str:
        return NEAREST_BY_GROUP[self.group]


@dataclass(frozen=True)
class RatioTuple:
    """(reference, r1, r2): one reference keyedge and its two ratios.

    The canonical tuples are (a, r_ad, r_ab), (b, r_ba, r_bc),
    (c, r_cb, r_cd), (d, r_dc, r_da); inverting one yields the reference
    keyedge's depth and the yaw.
    """

    reference: str
    r1: float
    r2: float

    def __post_init__(self):
        if self.reference not in KEYEDGES:
            raise ValueError(f"reference must be one of {KEYEDGES}, got {self.reference!r}")
        for name, v in (("r1", self.r1), ("r2", self.r2)):
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError(f"{name} must be positive, got {v}")


def camera_centric_view(obs: KeyedgeObservation) -> CameraCentricRatios:
    """Relabel an observation by camera distance and take its four ratios."""
    nearest = nearest_keyedge(obs.distances)
    offset = KEYEDGES.index(nearest)
    letters = [KEYEDGES[(offset + k) % 4] for k in range(4)]  # camera indices 1..4
    h = obs.heights
    for k in KEYEDGES:
        if h[k] <= 0.0:
            raise ZeroHeight(f"keyedge {k} height {h[k]} is not positive")
    return CameraCentricRatios(
        r21=h[letters[1]] / h[letters[0]],
        r41=h[letters[3]] / h[letters[0]],
        r32=h[letters[2]] / h[letters[1]],
        r34=h[letters[2]] / h[letters[3]],
        group=GROUP_BY_NEAREST[nearest],
    )


def object_centric_tuples(ratios: Mapping[str, float]) -> tuple[RatioTuple, ...]:
    """Build the four canonical tuples from {r_ab, r_bc, r_cd, r_da}."""
    directed = {
        ("a", "b"): ratios["r_ab"],
        ("b", "c"): ratios["r_bc"],
        ("c", "d"): ratios["r_cd"],
        ("d", "a"): ratios["r_da"],
    }
    for (p, q), v in list(directed.items()):
        directed[(q, p)] = 1.0 / v
    return (
        RatioTuple("a", directed[("a", "d")], directed[("a", "b")]),
        RatioTuple("b", directed[("b", "a")], directed[("b", "c")]),
        RatioTuple("c", directed[("c", "b")], directed[("c", "d")]),
        RatioTuple("d", directed[("d", "c")], directed[("d", "a")]),
    )


def to_object_centric_tuples(cc: CameraCentricRatios) -> tuple[RatioTuple, ...]:
    """Undo the cyclic relabeling and emit the four canonical tuples.

    The four observed ratios cover each adjacent pair of the a-b-c-d cycle
    exactly once in some direction; missing directions are reciprocals.
    """
    offset = KEYEDGES.index(NEAREST_BY_GROUP[cc.group])
    letters = [KEYEDGES[(offset + k) % 4] for k in range(4)]
    observed = {
        (letters[1], letters[0]): cc.r21,
        (letters[3], letters[0]): cc.r41,
        (letters[2], letters[1]): cc.r32,
        (letters[2], letters[3]): cc.r34,
    }
    canonical = {}
    for (p, q), v in observed.items():
        canonical[p + q] = v
        canonical[q + p] = 1.0 / v
    return object_centric_tuples(
        {
            "r_ab": canonical["ab"],
            "r_bc": canonical["bc"],
            "r_cd": canonical["cd"],
            "r_da": canonical["da"],
        }
    )
