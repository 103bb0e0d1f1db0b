"""KITTI-format ingestion, synthetic scenes, pixel noise, and flat records.

KITTI label grammar: one object per line, 15 whitespace-separated fields in
devkit order (type, truncated, occluded, alpha, bbox left/top/right/bottom,
dimensions h w l, location x y z, rotation_y).  The location is the bottom
center of the box, so conversion to a pose shifts y up by h/2.  rotation_y
and alpha already follow this package's yaw and allocentric conventions;
the theta = alpha + gamma identity holds per label to within the file's
2-decimal precision and is what pins the sign map.

Calibration: the "P2:" row holds the rectified left color camera's 3x4
projection, row-major.  We read f = P2[0,0] and the principal point from
P2[0,2], P2[1,2]; rectified cameras have equal horizontal and vertical
focal lengths, so a single f suffices.

Records: one flat JSON-lines object per box (RECORD_FIELDS order), with
ratios keyed "r_ab" etc. and the group as an integer; CSV export mirrors
the same schema.  Noise is applied in pixel space on keyedge heights, not
on ratios, because that is where measurement error physically arises;
ratio sigmas are then first-order propagated from the per-height sigma.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import (
    KEYEDGES,
    RATIO_KEYS,
    BoxPose3D,
    CameraIntrinsics,
    KeyedgeObservation,
    NonPositiveDepth,
    keyedge_positions,
    keyedge_ratios,
    normalize_angle,
    project_keyedges,
    viewing_angle,
)
from .indexing import RatioTuple, allocentric_group, object_centric_tuples

# Flat record schema; the four sigma fields appear only when noise is active.
RECORD_FIELDS = (
    "index", "class_name",
    "x", "y", "z", "length", "width", "height", "yaw", "alpha", "gamma", "group",
    "r_ab", "r_bc", "r_cd", "r_da",
    "h_a", "h_b", "h_c", "h_d",
    "d_a", "d_b", "d_c", "d_d",
    "bbox_left", "bbox_top", "bbox_right", "bbox_bottom",
    "sigma_ab", "sigma_bc", "sigma_cd", "sigma_da",
)
SIGMA_KEYS = ("sigma_ab", "sigma_bc", "sigma_cd", "sigma_da")

LABEL_FIELD_COUNT = 15
MIN_HEIGHT_PX = 0.1  # clamp floor for perturbed heights
MAX_POSE_RETRIES = 100


class ParseError(ValueError):
    """Input text violates the expected grammar."""

    def __init__(self, message: str, line: int | None = None, field: int | None = None):
        where = [f"line {line}"] if line is not None else []
        if field is not None:
            where.append(f"field {field}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.line = line
        self.field = field


class NonPositiveFocal(ValueError):
    """Calibration carries a non-positive focal length."""


class BehindCamera(ValueError):
    """A label places its object at z <= 0."""


class ConfigError(ValueError):
    """A configuration value is out of its documented domain."""


@dataclass(frozen=True)
class KittiLabel:
    """One parsed label line, values exactly as read."""

    class_name: str
    truncated: float
    occluded: int
    alpha: float
    bbox2d: tuple[float, float, float, float]
    dims_hwl: tuple[float, float, float]
    location: tuple[float, float, float]
    rotation_y: float

    @property
    def is_dontcare(self) -> bool:
        return self.class_name == "DontCare"

    @property
    def is_hard(self) -> bool:
        # flagged, never dropped here; filtering is a CLI choice
        return self.truncated > 0.5 or self.occluded == 2


def _numeric(tokens: list[str], idx0: int, caster, name: str, line_no: int):
    try:
        value = caster(tokens[idx0])
    except ValueError:
        raise ParseError(
            f"{name} is not numeric: {tokens[idx0]!r}", line=line_no, field=idx0 + 1
        ) from None
    if isinstance(value, float) and not math.isfinite(value):
        raise ParseError(f"{name} is not finite: {tokens[idx0]!r}", line=line_no, field=idx0 + 1)
    return value


def parse_label_file(text: str) -> list[KittiLabel]:
    """Parse a KITTI label file; strict on field count and numeric grammar."""
    labels = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        tokens = raw.split()
        if len(tokens) != LABEL_FIELD_COUNT:
            raise ParseError(
                f"expected {LABEL_FIELD_COUNT} fields, got {len(tokens)}",
                line=line_no,
                field=min(len(tokens) + 1, LABEL_FIELD_COUNT + 1),
            )
        class_name = tokens[0]
        truncated = _numeric(tokens, 1, float, "truncated", line_no)
        occluded = _numeric(tokens, 2, int, "occluded", line_no)
        alpha = _numeric(tokens, 3, float, "alpha", line_no)
        bbox = tuple(_numeric(tokens, i, float, "bbox", line_no) for i in range(4, 8))
        dims = tuple(_numeric(tokens, i, float, ("h", "w", "l")[i - 8], line_no) for i in range(8, 11))
        location = tuple(_numeric(tokens, i, float, ("x", "y", "z")[i - 11], line_no) for i in range(11, 14))
        rotation_y = _numeric(tokens, 14, float, "rotation_y", line_no)
        if class_name != "DontCare":
            for offset, value in enumerate(dims):
                if value <= 0.0:
                    raise ParseError(
                        f"dimension must be positive, got {value}", line=line_no, field=9 + offset
                    )
        labels.append(
            KittiLabel(
                class_name=class_name,
                truncated=truncated,
                occluded=occluded,
                alpha=alpha,
                bbox2d=bbox,
                dims_hwl=dims,
                location=location,
                rotation_y=rotation_y,
            )
        )
    return labels


def parse_calib(text: str) -> CameraIntrinsics:
    """Read intrinsics from the P2 row of a KITTI calibration file."""
    for line_no, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split()
        if not tokens or tokens[0] != "P2:":
            continue
        scalars = tokens[1:]
        if len(scalars) != 12:
            raise ParseError(f"P2 row must have 12 scalars, got {len(scalars)}", line=line_no)
        values = [_numeric(scalars, i, float, "P2 entry", line_no) for i in range(12)]
        focal = values[0]
        if not focal > 0.0:
            raise NonPositiveFocal(f"P2[0,0] = {focal}")
        return CameraIntrinsics(focal_length=focal, principal_point=(values[2], values[6]))
    raise ParseError("no P2 row found")


@dataclass(frozen=True)
class GroundTruthObject:
    """A label lifted into the pose convention with its derived quantities."""

    pose: BoxPose3D
    observation: KeyedgeObservation
    tuples: tuple[RatioTuple, ...]
    group: int
    label: KittiLabel


def labels_to_ground_truth(
    labels: list[KittiLabel], intr: CameraIntrinsics
) -> list[GroundTruthObject]:
    """Project labels into ground-truth ratio tuples; DontCare rows skipped."""
    out = []
    for label in labels:
        if label.is_dontcare:
            continue
        h, w, l = label.dims_hwl
        x, y_bottom, z = label.location
        if z <= 0.0:
            raise BehindCamera(f"label {label.class_name} at z={z}")
        pose = BoxPose3D(center=(x, y_bottom - h / 2.0, z), dims=(l, w, h), yaw=label.rotation_y)
        obs = project_keyedges(pose, intr)
        alpha = normalize_angle(pose.yaw - viewing_angle(pose.center))
        out.append(
            GroundTruthObject(
                pose=pose,
                observation=obs,
                tuples=object_centric_tuples(keyedge_ratios(obs)),
                group=allocentric_group(alpha),
                label=label,
            )
        )
    return out


def _check_range(name: str, lo: float, hi: float) -> None:
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ConfigError(f"{name} must be a finite (min, max) with min < max, got ({lo}, {hi})")


@dataclass(frozen=True)
class SceneConfig:
    """Sampling ranges for synthetic box poses; seed is mandatory."""

    count: int
    seed: int
    depth_range: tuple[float, float] = (5.0, 60.0)
    gamma_range: tuple[float, float] = (-0.7, 0.7)
    length_range: tuple[float, float] = (3.2, 4.8)
    width_range: tuple[float, float] = (1.4, 1.9)
    height_range: tuple[float, float] = (1.3, 1.8)
    ground_y: float = 1.65
    min_distortion: float = 0.0

    def __post_init__(self):
        if self.count < 0:
            raise ConfigError(f"count must be >= 0, got {self.count}")
        if not (0 <= self.seed < 2**64):
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        for name in ("depth_range", "gamma_range", "length_range", "width_range", "height_range"):
            _check_range(name, *getattr(self, name))
        if self.depth_range[0] <= 0.0:
            raise ConfigError(f"depth_range must be positive, got {self.depth_range}")
        if not (-math.pi / 2 < self.gamma_range[0] and self.gamma_range[1] < math.pi / 2):
            raise ConfigError(f"gamma_range must lie inside (-pi/2, pi/2), got {self.gamma_range}")
        if not math.isfinite(self.ground_y):
            raise ConfigError(f"ground_y must be finite, got {self.ground_y}")
        if not (math.isfinite(self.min_distortion) and self.min_distortion >= 0.0):
            raise ConfigError(f"min_distortion must be >= 0, got {self.min_distortion}")


def min_tuple_distortion(pose: BoxPose3D) -> float:
    """Worst conditioning over the four canonical tuples.

    Each tuple's usable signal is max(|r1 - 1|, |r2 - 1|); the minimum over
    tuples bounds how close any inversion comes to the degeneracy tolerance.
    Requires every keyedge in front of the camera.
    """
    corners, _ = keyedge_positions(pose)
    depth = {k: corners[k][2] for k in KEYEDGES}
    ratios = {
        "r_ab": depth["b"] / depth["a"],
        "r_bc": depth["c"] / depth["b"],
        "r_cd": depth["d"] / depth["c"],
        "r_da": depth["a"] / depth["d"],
    }
    tuples = object_centric_tuples(ratios)
    return min(max(abs(t.r1 - 1.0), abs(t.r2 - 1.0)) for t in tuples)


def generate_scene(cfg: SceneConfig) -> list[BoxPose3D]:
    """Draw poses from per-object substreams of the scene seed.

    Object i uses SeedSequence(seed, spawn_key=(i,)), so scenes are prefix
    stable under count changes and objects can be drawn in parallel without
    changing the output.  Poses with a keyedge at z <= 0 are redrawn, as are
    poses under cfg.min_distortion when that rejection is enabled; either
    way a single object gets at most MAX_POSE_RETRIES draws.
    """
    poses = []
    for index in range(cfg.count):
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(index,)))
        for _ in range(MAX_POSE_RETRIES):
            z = float(rng.uniform(*cfg.depth_range))
            gamma = float(rng.uniform(*cfg.gamma_range))
            yaw = float(rng.uniform(-math.pi, math.pi))
            length = float(rng.uniform(*cfg.length_range))
            width = float(rng.uniform(*cfg.width_range))
            height = float(rng.uniform(*cfg.height_range))
            pose = BoxPose3D(
                center=(z * math.tan(gamma), cfg.ground_y - height / 2.0, z),
                dims=(length, width, height),
                yaw=yaw,
            )
            corners, _ = keyedge_positions(pose)
            if min(c[2] for c in corners.values()) <= 0.0:
                continue
            if cfg.min_distortion > 0.0 and min_tuple_distortion(pose) < cfg.min_distortion:
                continue
            poses.append(pose)
            break
        else:
            raise ConfigError(
                f"object {index}: no acceptable pose in {MAX_POSE_RETRIES} draws "
                f"(min_distortion={cfg.min_distortion})"
            )
    return poses


NOISE_KINDS = ("none", "gaussian_height", "pixel_quantization")


@dataclass(frozen=True)
class NoiseModel:
    """Pixel-space perturbation of keyedge heights."""

    kind: str
    sigma_px: float = 0.0
    quantum_px: float = 0.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ConfigError(f"kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        if not (math.isfinite(self.sigma_px) and self.sigma_px >= 0.0):
            raise ConfigError(f"sigma_px must be >= 0, got {self.sigma_px}")
        if not (math.isfinite(self.quantum_px) and self.quantum_px >= 0.0):
            raise ConfigError(f"quantum_px must be >= 0, got {self.quantum_px}")
        if self.kind == "pixel_quantization" and self.quantum_px <= 0.0:
            raise ConfigError("pixel_quantization requires quantum_px > 0")


def perturb_heights(
    obs: KeyedgeObservation, noise: NoiseModel, seed
) -> KeyedgeObservation:
    """Apply the noise model to the four heights; clamp to MIN_HEIGHT_PX.

    seed may be an integer or a numpy Generator; only gaussian_height
    consumes randomness.
    """
    if noise.kind == "none":
        return obs
    if noise.kind == "gaussian_height":
        rng = np.random.default_rng(seed)
        draws = rng.normal(0.0, noise.sigma_px, size=len(KEYEDGES))
        heights = {
            k: max(obs.heights[k] + float(d), MIN_HEIGHT_PX)
            for k, d in zip(KEYEDGES, draws)
        }
    else:
        q = noise.quantum_px
        heights = {k: max(q * round(obs.heights[k] / q), MIN_HEIGHT_PX) for k in KEYEDGES}
    return replace(obs, heights=heights)


def _sigma_effective(noise: NoiseModel) -> float:
    if noise.kind == "gaussian_height":
        return noise.sigma_px
    if noise.kind == "pixel_quantization":
        # standard deviation of uniform rounding error on [-q/2, q/2]
        return noise.quantum_px / math.sqrt(12.0)
    return 0.0


def ratio_sigmas(obs: KeyedgeObservation, noise: NoiseModel) -> dict[str, float] | None:
    """First-order ratio sigmas from independent per-height pixel noise.

    sigma(r_pq) = r_pq * sigma_px * sqrt(1/h_p^2 + 1/h_q^2).  Returns None
    when the noise model contributes nothing, in which case records carry
    no sigma fields.
    """
    s = _sigma_effective(noise)
    if s == 0.0:
        return None
    ratios = keyedge_ratios(obs)
    h = obs.heights
    out = {}
    for key in RATIO_KEYS:
        p, q = key[2], key[3]
        out["sigma_" + key[2:]] = ratios[key] * s * math.sqrt(1.0 / h[p] ** 2 + 1.0 / h[q] ** 2)
    return out


def keyedge_bbox(
    pose: BoxPose3D, intr: CameraIntrinsics
) -> tuple[float, float, float, float]:
    """Tight pixel box around the eight projected box corners.

    Keyedges are vertical, so top and bottom corners share a column and
    the extremes come from the four keyedges alone.
    """
    corners, height = keyedge_positions(pose)
    f = intr.focal_length
    cx, cy = intr.principal_point
    us, v_top, v_bot = [], [], []
    for px, py, pz in corners.values():
        if pz <= 0.0:
            raise NonPositiveDepth(f"keyedge at depth {pz}")
        us.append(cx + f * px / pz)
        v_bot.append(cy + f * py / pz)
        v_top.append(cy + f * (py - height) / pz)
    return (min(us), min(v_top), max(us), max(v_bot))


def object_record(
    index: int,
    class_name: str,
    pose: BoxPose3D,
    intr: CameraIntrinsics,
    obs: KeyedgeObservation,
    sigmas: dict[str, float] | None = None,
) -> dict:
    """Flatten one object into the RECORD_FIELDS schema.

    obs may be a perturbed observation; ratios and heights then reflect the
    noise while the pose fields, depths, and bbox stay geometric.
    """
    gamma = viewing_angle(pose.center)
    alpha = normalize_angle(pose.yaw - gamma)
    left, top, right, bottom = keyedge_bbox(pose, intr)
    rec = {
        "index": index,
        "class_name": class_name,
        "x": pose.x,
        "y": pose.y,
        "z": pose.z,
        "length": pose.length,
        "width": pose.width,
        "height": pose.height,
        "yaw": pose.yaw,
        "alpha": alpha,
        "gamma": gamma,
        "group": allocentric_group(alpha),
    }
    rec.update(keyedge_ratios(obs))
    for k in KEYEDGES:
        rec[f"h_{k}"] = obs.heights[k]
    for k in KEYEDGES:
        rec[f"d_{k}"] = obs.depths[k]
    rec["bbox_left"] = left
    rec["bbox_top"] = top
    rec["bbox_right"] = right
    rec["bbox_bottom"] = bottom
    if sigmas:
        for key in SIGMA_KEYS:
            rec[key] = sigmas[key]
    return rec


def record_tuples(record: dict) -> tuple[RatioTuple, ...]:
    """Canonical tuples from a record's four stored ratios."""
    return object_centric_tuples({key: float(record[key]) for key in RATIO_KEYS})


def record_ratio_sigmas(record: dict) -> dict[str, tuple[float, float]] | None:
    """Per-reference (sigma1, sigma2) matching record_tuples' pair order.

    A reversed ratio is the reciprocal, so its first-order sigma transforms
    as sigma(1/r) = sigma(r) / r^2.  Returns None when the record carries
    no sigma fields.
    """
    if SIGMA_KEYS[0] not in record:
        return None
    directed = {}
    for key in RATIO_KEYS:
        p, q = key[2], key[3]
        r = float(record[key])
        s = float(record["sigma_" + key[2:]])
        directed[(p, q)] = s
        directed[(q, p)] = s / (r * r)
    return {
        "a": (directed[("a", "d")], directed[("a", "b")]),
        "b": (directed[("b", "a")], directed[("b", "c")]),
        "c": (directed[("c", "b")], directed[("c", "d")]),
        "d": (directed[("d", "c")], directed[("d", "a")]),
    }


def write_jsonl(path, records) -> None:
    """One JSON object per line, UTF-8, LF terminated."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def read_jsonl(path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as err:
                raise ParseError(f"invalid JSON: {err.msg}", line=line_no) from None
            if not isinstance(rec, dict):
                raise ParseError("expected a JSON object", line=line_no)
            records.append(rec)
    return records


def write_csv(path, records, fields=None) -> None:
    """CSV mirror of the JSON-lines schema, header row included."""
    if fields is None:
        if not records:
            raise ValueError("fields is required when records is empty")
        fields = list(records[0])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(records)
