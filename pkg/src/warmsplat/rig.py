"""Parameterized synthetic camera rigs, deterministic splits, camera tracks."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError, InvalidInputError
from .geometry import Camera, CameraIntrinsics, CameraPose, look_at_pose

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))

LAYOUTS = ("hemisphere", "sphere", "ellipse_ring", "stadium")


@dataclass
class RigSpec:
    layout: str
    camera_count: int = 20
    radius: float = 4.0                 # hemisphere / sphere
    semi_axes: tuple = (5.0, 3.0)       # ellipse_ring / stadium perimeter
    ring_height: float = 1.5            # ellipse_ring camera height
    field_size: tuple = (10.0, 6.0)     # stadium playing field (length, width)
    stand_height: float = 4.0           # stadium perimeter camera height
    grid_shape: tuple = (0, 0)          # stadium tiled cameras (nx, ny)
    grid_height: float = 8.0
    goal_line_cameras: bool = False
    target: tuple = (0.0, 0.0, 0.0)
    image_width: int = 64
    image_height: int = 64
    focal: float = 80.0

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise InvalidInputError(f"unknown rig layout {self.layout!r}")
        if self.camera_count < 2:
            raise InvalidInputError("camera_count must be at least 2")
        if self.radius <= 0 or min(self.semi_axes) <= 0:
            raise InvalidInputError("radii must be positive")

    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(self.focal, self.focal,
                                self.image_width / 2.0, self.image_height / 2.0,
                                self.image_width, self.image_height)


def _camera_name(index: int, total: int) -> str:
    width = max(3, len(str(max(total - 1, 0))))
    return f"cam_{index:0{width}d}"


def make_rig(spec: RigSpec) -> list[Camera]:
    """Build the camera list for a rig spec; all cameras look at the target."""
    target = np.asarray(spec.target, dtype=float)
    intr = spec.intrinsics()
    positions: list[np.ndarray] = []
    if spec.layout in ("hemisphere", "sphere"):
        n = spec.camera_count
        for i in range(n):
            if spec.layout == "hemisphere":
                z = (i + 0.5) / n          # upper hemisphere only
            else:
                z = 1.0 - (2.0 * i + 1.0) / n
            r_xy = np.sqrt(max(1.0 - z * z, 0.0))
            phi = GOLDEN_ANGLE * i
            positions.append(spec.radius * np.array(
                [r_xy * np.cos(phi), r_xy * np.sin(phi), z]) + target)
    elif spec.layout == "ellipse_ring":
        a, b = spec.semi_axes
        for i in range(spec.camera_count):
            th = 2.0 * np.pi * i / spec.camera_count
            positions.append(np.array([a * np.cos(th), b * np.sin(th),
                                       spec.ring_height]) + target)
    else:  # stadium: perimeter ring + camera tiles + optional goal-line views
        a, b = spec.semi_axes
        for i in range(spec.camera_count):
            th = 2.0 * np.pi * i / spec.camera_count
            positions.append(np.array([a * np.cos(th), b * np.sin(th),
                                       spec.stand_height]) + target)
        nx, ny = spec.grid_shape
        if nx > 0 and ny > 0:
            length, width = spec.field_size
            xs = np.linspace(-length / 2.0, length / 2.0, nx)
            ys = np.linspace(-width / 2.0, width / 2.0, ny)
            for x in xs:
                for y in ys:
                    positions.append(np.array([x, y, spec.grid_height]) + target)
        if spec.goal_line_cameras:
            length, _ = spec.field_size
            for sx in (-1.0, 1.0):
                positions.append(np.array(
                    [sx * (length / 2.0), 0.0, spec.stand_height / 2.0]) + target)
    total = len(positions)
    return [Camera(_camera_name(i, total), intr, look_at_pose(p, target))
            for i, p in enumerate(positions)]


def _name_suffix(name: str) -> int:
    m = re.search(r"(\d+)$", name)
    if not m:
        raise InvalidInputError(f"camera name {name!r} has no numeric suffix")
    return int(m.group(1))


def assign_splits(cameras, test_indices, val_indices) -> dict[str, str]:
    """Deterministic split map keyed by camera name: numeric suffix in
    test_indices -> test, in val_indices -> val, everything else -> train."""
    test = set(int(i) for i in test_indices)
    val = set(int(i) for i in val_indices)
    if test & val:
        raise InvalidInputError("test and val index lists overlap")
    names = [c.name if hasattr(c, "name") else str(c) for c in cameras]
    suffixes = {n: _name_suffix(n) for n in names}
    known = set(suffixes.values())
    missing = (test | val) - known
    if missing:
        raise InvalidInputError(f"split indices {sorted(missing)} match no camera")
    out = {}
    for n in sorted(names):
        s = suffixes[n]
        out[n] = "test" if s in test else ("val" if s in val else "train")
    return out


# --- camera tracks ----------------------------------------------------------

def make_camera_track(mode: str, params: dict, frame_count: int) -> list[Camera]:
    """Virtual-camera path: 'orbit' (equal angular steps about the target) or
    'lerp' (linear position interpolation, look-at re-derived per frame)."""
    if frame_count < 2:
        raise InvalidInputError("frame_count must be at least 2")
    target = np.asarray(params.get("target", (0.0, 0.0, 0.0)), dtype=float)
    intr = CameraIntrinsics(
        params.get("focal", 80.0), params.get("focal", 80.0),
        params.get("width", 64) / 2.0, params.get("height", 64) / 2.0,
        params.get("width", 64), params.get("height", 64))
    cams = []
    if mode == "orbit":
        radius = float(params.get("radius", 4.0))
        height = float(params.get("height_z", 1.5))
        if radius <= 0:
            raise InvalidInputError("orbit radius must be positive")
        for i in range(frame_count):
            th = 2.0 * np.pi * i / frame_count
            pos = target + np.array([radius * np.cos(th), radius * np.sin(th), height])
            cams.append(Camera(_camera_name(i, frame_count), intr,
                               look_at_pose(pos, target)))
    elif mode == "lerp":
        a = np.asarray(params["start"], dtype=float)
        b = np.asarray(params["end"], dtype=float)
        if np.linalg.norm(a - target) < 1e-9 or np.linalg.norm(b - target) < 1e-9:
            raise InvalidInputError("track endpoint coincides with the target")
        for i in range(frame_count):
            s = i / (frame_count - 1)
            pos = (1.0 - s) * a + s * b
            cams.append(Camera(_camera_name(i, frame_count), intr,
                               look_at_pose(pos, target)))
    else:
        raise InvalidInputError(f"unknown track mode {mode!r}")
    return cams


def camera_to_dict(cam: Camera) -> dict:
    intr = cam.intrinsics
    return {
        "name": cam.name,
        "width": intr.width, "height": intr.height,
        "fx": intr.fx, "fy": intr.fy, "cx": intr.cx, "cy": intr.cy,
        "rotation": cam.pose.rotation.tolist(),
        "translation": cam.pose.translation.tolist(),
    }


def camera_from_dict(d: dict) -> Camera:
    try:
        intr = CameraIntrinsics(d["fx"], d["fy"], d["cx"], d["cy"],
                                d["width"], d["height"])
        pose = CameraPose(np.array(d["rotation"]), np.array(d["translation"]))
        return Camera(d["name"], intr, pose)
    except KeyError as e:
        raise DataFormatError(f"camera record missing field {e.args[0]!r}") from e


def save_camera_track(cameras: list[Camera], path) -> None:
    payload = {"convention": "opencv_world_to_camera",
               "frames": [camera_to_dict(c) for c in cameras]}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


def load_camera_track(path) -> list[Camera]:
    try:
        with open(path) as fh:
            payload = json.load(fh)
        return [camera_from_dict(d) for d in payload["frames"]]
    except (OSError, json.JSONDecodeError, KeyError) as e:
        raise DataFormatError(f"cannot load camera track {path}: {e}") from e
