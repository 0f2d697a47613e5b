"""Synchronized multi-view dataset bundles: synthesis, disk layout, and
export/import in the supported interchange formats (NeRF-synthetic JSON,
COLMAP text triplet, NPY depth maps)."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .archive import Archive, ArchiveWriter
from .errors import DataFormatError, InvalidInputError
from .gaussians import GaussianFrame
from .geometry import Camera, CameraIntrinsics, CameraPose
from .render import rasterize_with_depth
from .rig import assign_splits, camera_from_dict, camera_to_dict
from .scene import GroundTruthScene
from .training import PointCloud

MANIFEST_NAME = "manifest.json"
GT_ARCHIVE_NAME = "gt_frames.wsar"
POINTS_NAME = "point_cloud.npz"

CONVENTIONS = {
    "world_to_camera": "opencv_colmap",
    "image_origin": "top_left",
    "world_up": "+z",
    "background": "black",
    "quaternion_order": "wxyz",
}

# OpenCV camera-to-world -> OpenGL/NeRF camera-to-world axis flip (y up,
# camera looking down -z). Involutory: the same matrix converts back.
GL_FLIP = np.diag([1.0, -1.0, -1.0, 1.0])


@dataclass
class DatasetBundle:
    """Synchronized images, cameras, splits, and optional depth/points."""
    cameras: list[Camera]
    split_map: dict[str, str]
    images: dict  # (t, name) -> uint8 (H, W, 3)
    num_timesteps: int
    depths: dict = field(default_factory=dict)  # (t, name) -> float32 (H, W)
    gt_frames: list[GaussianFrame] | None = None
    point_cloud: PointCloud | None = None
    manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        names = [c.name for c in self.cameras]
        if len(set(names)) != len(names):
            raise InvalidInputError("camera names must be unique within a rig")
        for n in names:
            if n not in self.split_map:
                raise InvalidInputError(f"camera {n!r} has no split assignment")
        for t in range(self.num_timesteps):
            for n in names:
                if (t, n) not in self.images:
                    raise InvalidInputError(
                        f"bundle is not synchronized: missing image (t={t}, {n!r})")

    @property
    def num_cameras(self) -> int:
        return len(self.cameras)

    def camera(self, name: str) -> Camera:
        for c in self.cameras:
            if c.name == name:
                return c
        raise InvalidInputError(f"no camera named {name!r}")

    def cameras_for_split(self, split: str) -> list[Camera]:
        return [c for c in self.cameras if self.split_map[c.name] == split]

    def images_at(self, t: int, names=None) -> list[np.ndarray]:
        if names is None:
            names = [c.name for c in self.cameras]
        return [self.images[(t, n)].astype(float) / 255.0 for n in names]

    def image(self, t: int, name: str) -> np.ndarray:
        return self.images[(t, name)].astype(float) / 255.0


def quantize_image(pixels: np.ndarray) -> np.ndarray:
    return np.clip(np.round(pixels * 255.0), 0, 255).astype(np.uint8)


def synthesize_dataset(scene: GroundTruthScene, rig: list[Camera], T: int,
                       split_map: dict | None = None,
                       test_indices=(), val_indices=()) -> DatasetBundle:
    """Render the ground-truth scene through every rig camera at every t.

    Ground-truth frames and the t=0 point cloud are kept in the bundle for
    oracle use and training initialization.
    """
    if T < 1:
        raise InvalidInputError("T must be at least 1")
    if split_map is None:
        split_map = assign_splits(rig, test_indices, val_indices)
    images = {}
    depths = {}
    gt_frames = []
    for t in range(T):
        frame = scene.frame_at(t)
        gt_frames.append(frame)
        for cam in rig:
            img, dep = rasterize_with_depth(frame, cam)
            images[(t, cam.name)] = quantize_image(img.pixels)
            depths[(t, cam.name)] = dep.depth.astype(np.float32)
    manifest = {
        "conventions": dict(CONVENTIONS),
        "num_timesteps": T,
        "num_cameras": len(rig),
        "resolution": [rig[0].intrinsics.width, rig[0].intrinsics.height],
        "sh_degree": scene.cfg.sh_degree,
        "scene_seed": scene.cfg.seed,
    }
    return DatasetBundle(rig, split_map, images, T, depths, gt_frames,
                         scene.point_cloud(0), manifest)


# --- native bundle directory layout ----------------------------------------

def image_relpath(t: int, name: str) -> str:
    return f"images/t{t:03d}/{name}.png"


def save_bundle(bundle: DatasetBundle, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    manifest = dict(bundle.manifest)
    manifest["conventions"] = dict(CONVENTIONS)
    manifest["num_timesteps"] = bundle.num_timesteps
    manifest["splits"] = dict(sorted(bundle.split_map.items()))
    manifest["cameras"] = [camera_to_dict(c) for c in bundle.cameras]
    with open(os.path.join(out_dir, MANIFEST_NAME), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    for (t, name), img in sorted(bundle.images.items()):
        path = os.path.join(out_dir, image_relpath(t, name))
        os.makedirs(os.path.dirname(path), exist_ok=True)
        Image.fromarray(img).save(path)
    if bundle.point_cloud is not None:
        pc = bundle.point_cloud
        np.savez(os.path.join(out_dir, POINTS_NAME), points=pc.points,
                 colors=pc.colors if pc.colors is not None else np.zeros((0, 3)))
    if bundle.gt_frames:
        gt_manifest = {
            "budget": bundle.gt_frames[0].size,
            "sh_degree": bundle.gt_frames[0].sh_degree,
            "t0": 0,
            "kind": "ground_truth_frames",
        }
        with ArchiveWriter(os.path.join(out_dir, GT_ARCHIVE_NAME), gt_manifest) as w:
            for f in bundle.gt_frames:
                w.append_frame(f)


def load_bundle(path) -> DatasetBundle:
    mpath = os.path.join(path, MANIFEST_NAME)
    try:
        with open(mpath) as fh:
            manifest = json.load(fh)
    except OSError as e:
        raise DataFormatError(f"cannot read dataset manifest {mpath}: {e}") from e
    except json.JSONDecodeError as e:
        raise DataFormatError(f"malformed dataset manifest {mpath}: {e}") from e
    for key in ("cameras", "splits", "num_timesteps"):
        if key not in manifest:
            raise DataFormatError(f"dataset manifest missing field {key!r}")
    cameras = [camera_from_dict(d) for d in manifest["cameras"]]
    T = int(manifest["num_timesteps"])
    images = {}
    for t in range(T):
        for cam in cameras:
            ipath = os.path.join(path, image_relpath(t, cam.name))
            try:
                with Image.open(ipath) as im:
                    images[(t, cam.name)] = np.asarray(im.convert("RGB"))
            except OSError as e:
                raise DataFormatError(f"cannot read image {ipath}: {e}") from e
    point_cloud = None
    ppath = os.path.join(path, POINTS_NAME)
    if os.path.exists(ppath):
        with np.load(ppath) as z:
            colors = z["colors"] if z["colors"].size else None
            point_cloud = PointCloud(z["points"], colors)
    gt_frames = None
    gpath = os.path.join(path, GT_ARCHIVE_NAME)
    if os.path.exists(gpath):
        with Archive(gpath) as arch:
            gt_frames = [arch.load_frame(t) for t in arch.times()]
    return DatasetBundle(cameras, dict(manifest["splits"]), images, T,
                         {}, gt_frames, point_cloud, manifest)


# --- NeRF-synthetic export/import -------------------------------------------

def pose_to_nerf_matrix(pose: CameraPose) -> np.ndarray:
    """World-to-camera (OpenCV) -> NeRF/OpenGL camera-to-world 4x4."""
    c2w = np.linalg.inv(pose.matrix4())
    return c2w @ GL_FLIP


def pose_from_nerf_matrix(matrix: np.ndarray) -> CameraPose:
    c2w = np.asarray(matrix, dtype=float) @ GL_FLIP
    w2c = np.linalg.inv(c2w)
    # re-orthonormalize to absorb float noise from the double inversion
    u, _, vt = np.linalg.svd(w2c[:3, :3])
    return CameraPose(u @ vt, w2c[:3, 3])


def export_nerf_synthetic(bundle: DatasetBundle, out_dir) -> None:
    """Per-split transforms_{train,val,test}.json with camera_angle_x and
    OpenGL camera-to-world matrices; intrinsics are also emitted explicitly."""
    os.makedirs(out_dir, exist_ok=True)
    intr = bundle.cameras[0].intrinsics
    for cam in bundle.cameras:
        if cam.intrinsics != intr:
            raise InvalidInputError(
                "NeRF-synthetic export requires shared intrinsics across the rig")
    for split in ("train", "val", "test"):
        cams = bundle.cameras_for_split(split)
        frames = []
        for cam in cams:
            for t in range(bundle.num_timesteps):
                frames.append({
                    "file_path": "./" + image_relpath(t, cam.name)[:-4],
                    "camera": cam.name,
                    "time_index": t,
                    "transform_matrix": pose_to_nerf_matrix(cam.pose).tolist(),
                })
        payload = {
            "camera_angle_x": 2.0 * np.arctan(intr.width / (2.0 * intr.fx)),
            "fl_x": intr.fx, "fl_y": intr.fy,
            "cx": intr.cx, "cy": intr.cy,
            "w": intr.width, "h": intr.height,
            "frames": frames,
        }
        with open(os.path.join(out_dir, f"transforms_{split}.json"), "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)


def import_nerf_synthetic(path) -> DatasetBundle:
    """Rebuild cameras and splits from transforms_*.json; loads images when the
    referenced files exist next to the JSON."""
    cameras = []
    split_map = {}
    images = {}
    T = 1
    for split in ("train", "val", "test"):
        jpath = os.path.join(path, f"transforms_{split}.json")
        if not os.path.exists(jpath):
            continue
        try:
            with open(jpath) as fh:
                payload = json.load(fh)
        except json.JSONDecodeError as e:
            raise DataFormatError(f"malformed JSON in {jpath}: {e}") from e
        for key in ("camera_angle_x", "frames"):
            if key not in payload:
                raise DataFormatError(f"{jpath}: missing field {key!r}")
        if "w" in payload:
            w, h = int(payload["w"]), int(payload["h"])
            fx = float(payload.get("fl_x",
                                   w / (2.0 * np.tan(payload["camera_angle_x"] / 2.0))))
            fy = float(payload.get("fl_y", fx))
            cx = float(payload.get("cx", w / 2.0))
            cy = float(payload.get("cy", h / 2.0))
        else:
            raise DataFormatError(f"{jpath}: missing field 'w'")
        intr = CameraIntrinsics(fx, fy, cx, cy, w, h)
        seen = set()
        for fr in payload["frames"]:
            for key in ("transform_matrix", "file_path"):
                if key not in fr:
                    raise DataFormatError(f"{jpath}: frame missing field {key!r}")
            name = fr.get("camera") or os.path.basename(fr["file_path"])
            t = int(fr.get("time_index", 0))
            T = max(T, t + 1)
            if name not in seen:
                seen.add(name)
                pose = pose_from_nerf_matrix(np.array(fr["transform_matrix"]))
                cameras.append(Camera(name, intr, pose))
                split_map[name] = split
            ipath = os.path.join(path, fr["file_path"].lstrip("./") + ".png")
            if os.path.exists(ipath):
                with Image.open(ipath) as im:
                    images[(t, name)] = np.asarray(im.convert("RGB"))
    if not cameras:
        raise DataFormatError(f"no transforms_*.json found under {path}")
    blank = np.zeros((cameras[0].intrinsics.height,
                      cameras[0].intrinsics.width, 3), dtype=np.uint8)
    for t in range(T):
        for cam in cameras:
            images.setdefault((t, cam.name), blank)
    return DatasetBundle(cameras, split_map, images, T)


# --- COLMAP text triplet -----------------------------------------------------

def export_colmap(bundle: DatasetBundle, out_dir, mode: str = "poses_only",
                  voxel_size: float = 0.05, t: int = 0,
                  max_points: int = 20000) -> None:
    """COLMAP text export: cameras.txt (PINHOLE), images.txt (w2c quaternion +
    translation), points3D.txt per mode:

    poses_only  -- header comments only
    surface     -- ground-truth Gaussian centers (sparse surface stand-in)
    depth_fused -- depth maps back-projected to world and voxel-fused
    """
    from .geometry import rotmat_to_quat  # local import to avoid cycle noise

    if mode not in ("poses_only", "surface", "depth_fused"):
        raise InvalidInputError(f"unknown COLMAP export mode {mode!r}")
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "cameras.txt"), "w") as fh:
        fh.write("# Camera list with one line of data per camera:\n")
        fh.write("#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n")
        fh.write(f"# Number of cameras: {len(bundle.cameras)}\n")
        for i, cam in enumerate(bundle.cameras, start=1):
            k = cam.intrinsics
            fh.write(f"{i} PINHOLE {k.width} {k.height} "
                     f"{k.fx:.10g} {k.fy:.10g} {k.cx:.10g} {k.cy:.10g}\n")
    with open(os.path.join(out_dir, "images.txt"), "w") as fh:
        fh.write("# Image list with two lines of data per image:\n")
        fh.write("#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n")
        fh.write("#   POINTS2D[] as (X, Y, POINT3D_ID)\n")
        for i, cam in enumerate(bundle.cameras, start=1):
            q = rotmat_to_quat(cam.pose.rotation)
            tr = cam.pose.translation
            fh.write(f"{i} {q[0]:.12g} {q[1]:.12g} {q[2]:.12g} {q[3]:.12g} "
                     f"{tr[0]:.12g} {tr[1]:.12g} {tr[2]:.12g} {i} {cam.name}.png\n")
            fh.write("\n")

    points = np.zeros((0, 3))
    colors = np.zeros((0, 3))
    if mode == "surface":
        if bundle.gt_frames is None:
            raise InvalidInputError("surface mode requires ground-truth frames")
        pc = bundle.point_cloud
        if pc is None:
            raise InvalidInputError("surface mode requires a bundle point cloud")
        points = pc.points
        colors = pc.colors if pc.colors is not None else np.full_like(points, 0.5)
        if points.shape[0] > max_points:
            step = points.shape[0] // max_points + 1
            points, colors = points[::step], colors[::step]
    elif mode == "depth_fused":
        if not bundle.depths:
            raise InvalidInputError("depth_fused mode requires depth buffers")
        points, colors = fuse_depth_maps(bundle, t, voxel_size)
    with open(os.path.join(out_dir, "points3D.txt"), "w") as fh:
        fh.write("# 3D point list with one line of data per point:\n")
        fh.write("#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n")
        fh.write(f"# Number of points: {points.shape[0]}\n")
        rgb8 = np.clip(np.round(colors * 255), 0, 255).astype(int)
        for i, (p, c) in enumerate(zip(points, rgb8), start=1):
            fh.write(f"{i} {p[0]:.10g} {p[1]:.10g} {p[2]:.10g} "
                     f"{c[0]} {c[1]} {c[2]} 0\n")


def backproject_depth(camera: Camera, depth: np.ndarray) -> np.ndarray:
    """World-space points for all pixels with positive depth."""
    intr = camera.intrinsics
    rows, cols = np.nonzero(depth > 0)
    d = depth[rows, cols]
    x = (cols - intr.cx) / intr.fx * d
    y = (rows - intr.cy) / intr.fy * d
    cam_pts = np.stack([x, y, d], axis=1)
    inv = camera.pose.inverse()
    return cam_pts @ inv.rotation.T + inv.translation


def fuse_depth_maps(bundle: DatasetBundle, t: int, voxel_size: float):
    """Back-project every camera's depth at time t and keep one point per voxel."""
    pts = []
    cols = []
    for cam in bundle.cameras:
        depth = bundle.depths.get((t, cam.name))
        if depth is None:
            raise InvalidInputError(f"no depth map for (t={t}, {cam.name!r})")
        p = backproject_depth(cam, np.asarray(depth, dtype=float))
        pts.append(p)
        rr, cc = np.nonzero(np.asarray(depth) > 0)
        cols.append(bundle.images[(t, cam.name)][rr, cc].astype(float) / 255.0)
    pts = np.concatenate(pts) if pts else np.zeros((0, 3))
    cols = np.concatenate(cols) if cols else np.zeros((0, 3))
    if pts.shape[0] == 0:
        return pts, cols
    vox = np.floor(pts / voxel_size).astype(np.int64)
    _, keep = np.unique(vox, axis=0, return_index=True)
    keep = np.sort(keep)
    return pts[keep], cols[keep]


def read_colmap_cameras(path) -> dict[int, CameraIntrinsics]:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 8 or parts[1] != "PINHOLE":
                raise DataFormatError(f"{path}: unsupported camera line {line!r}")
            out[int(parts[0])] = CameraIntrinsics(
                float(parts[4]), float(parts[5]), float(parts[6]),
                float(parts[7]), int(parts[2]), int(parts[3]))
    return out


def read_colmap_images(path):
    """List of (image_id, qwxyz, translation, camera_id, name)."""
    out = []
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    # two lines per image (pose line, then a possibly empty POINTS2D line);
    # comments may only precede the data block
    data = [ln for ln in lines if not ln.lstrip().startswith("#")]
    data = [ln for i, ln in enumerate(data) if i % 2 == 0]
    for ln in data:
        if not ln.strip():
            continue
        parts = ln.split()
        if len(parts) < 10:
            raise DataFormatError(f"{path}: malformed image line {ln!r}")
        out.append((int(parts[0]), np.array([float(x) for x in parts[1:5]]),
                    np.array([float(x) for x in parts[5:8]]),
                    int(parts[8]), parts[9]))
    return out


def read_colmap_points(path) -> tuple[np.ndarray, np.ndarray]:
    pts = []
    cols = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 7:
                raise DataFormatError(f"{path}: malformed point line {line!r}")
            pts.append([float(x) for x in parts[1:4]])
            cols.append([int(x) / 255.0 for x in parts[4:7]])
    if not pts:
        return np.zeros((0, 3)), np.zeros((0, 3))
    return np.array(pts), np.array(cols)


# --- depth-only NPY export ---------------------------------------------------

def export_depth_only(bundle: DatasetBundle, out_dir) -> None:
    """One NPY v1.0 file per (camera, t): little-endian float32, shape (H, W)."""
    if not bundle.depths:
        raise InvalidInputError("bundle has no depth maps")
    os.makedirs(out_dir, exist_ok=True)
    for t in range(bundle.num_timesteps):
        for cam in bundle.cameras:
            depth = bundle.depths.get((t, cam.name))
            if depth is None:
                raise InvalidInputError(f"no depth map for (t={t}, {cam.name!r})")
            path = os.path.join(out_dir, f"depth_{cam.name}_{t}.npy")
            try:
                np.save(path, np.ascontiguousarray(depth, dtype="<f4"))
            except OSError as e:
                raise DataFormatError(f"cannot write {path}: {e}") from e
