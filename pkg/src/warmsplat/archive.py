"""Fixed-record, randomly accessible on-disk store of optimized frames.

Layout (all integers little-endian):

    magic b"WSAR" | version u32 | manifest_len u64 | manifest JSON (utf-8)
    T fixed-size frame records, each K * (11 + 3*(L+1)^2) float32, C order
    index: per record (offset u64, checksum u64)
    footer: index_offset u64, frame_count u64, magic b"WSND"

Constant record stride gives O(1) seeks by time index; each record carries a
64-bit blake2b checksum verified on load. Storage precision is float32.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from .errors import (DataFormatError, FrameNotFoundError, IntegrityError,
                     InvalidInputError)
from .gaussians import GaussianFrame, floats_per_gaussian
from .render import ImageBuffer, rasterize
from .sh import num_sh_coeffs

MAGIC = b"WSAR"
END_MAGIC = b"WSND"
VERSION = 1


def _checksum(data: bytes) -> int:
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


def record_size_bytes(budget: int, sh_degree: int) -> int:
    return budget * floats_per_gaussian(sh_degree) * 4


class ArchiveWriter:
    """Single-writer archive builder; frames must arrive in ascending t."""

    def __init__(self, path, manifest: dict):
        for key in ("budget", "sh_degree", "t0"):
            if key not in manifest:
                raise InvalidInputError(f"manifest is missing {key!r}")
        self.path = path
        self.manifest = dict(manifest)
        self.budget = int(manifest["budget"])
        self.sh_degree = int(manifest["sh_degree"])
        self.t0 = int(manifest["t0"])
        self._index: list[tuple[int, int]] = []
        self._fh = open(path, "wb")
        blob = json.dumps(self.manifest, sort_keys=True).encode()
        self._fh.write(MAGIC)
        self._fh.write(struct.pack("<I", VERSION))
        self._fh.write(struct.pack("<Q", len(blob)))
        self._fh.write(blob)
        self._finalized = False

    @property
    def num_frames(self) -> int:
        return len(self._index)

    def append_frame(self, frame: GaussianFrame) -> None:
        if self._finalized:
            raise InvalidInputError("archive already finalized")
        if frame.size != self.budget:
            raise InvalidInputError(
                f"frame has {frame.size} Gaussians, archive budget is {self.budget}")
        if frame.sh_degree != self.sh_degree:
            raise InvalidInputError("frame sh_degree does not match the manifest")
        expected_t = self.t0 + len(self._index)
        if frame.t != expected_t:
            raise InvalidInputError(
                f"out-of-order frame t={frame.t}, expected {expected_t}")
        data = np.ascontiguousarray(frame.to_flat(), dtype="<f4").tobytes()
        offset = self._fh.tell()
        self._fh.write(data)
        self._index.append((offset, _checksum(data)))

    def finalize(self) -> None:
        if self._finalized:
            return
        index_offset = self._fh.tell()
        for off, ck in self._index:
            self._fh.write(struct.pack("<QQ", off, ck))
        self._fh.write(struct.pack("<QQ", index_offset, len(self._index)))
        self._fh.write(END_MAGIC)
        self._fh.close()
        self._finalized = True

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.finalize()


class Archive:
    """Read-only random-access view of a finalized archive file."""

    def __init__(self, path):
        self.path = path
        self._fh = open(path, "rb")
        if self._fh.read(4) != MAGIC:
            raise DataFormatError(f"{path}: not an archive file (bad magic)")
        (version,) = struct.unpack("<I", self._fh.read(4))
        if version != VERSION:
            raise DataFormatError(f"{path}: unsupported archive version {version}")
        (mlen,) = struct.unpack("<Q", self._fh.read(8))
        try:
            self.manifest = json.loads(self._fh.read(mlen).decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise DataFormatError(f"{path}: malformed manifest: {e}") from e
        self.budget = int(self.manifest["budget"])
        self.sh_degree = int(self.manifest["sh_degree"])
        self.t0 = int(self.manifest["t0"])
        self._fh.seek(-20, 2)
        index_offset, count = struct.unpack("<QQ", self._fh.read(16))
        if self._fh.read(4) != END_MAGIC:
            raise DataFormatError(f"{path}: truncated archive (bad footer)")
        self._fh.seek(index_offset)
        raw = self._fh.read(16 * count)
        if len(raw) != 16 * count:
            raise DataFormatError(f"{path}: truncated index")
        self._index = [struct.unpack_from("<QQ", raw, 16 * i) for i in range(count)]

    @property
    def num_frames(self) -> int:
        return len(self._index)

    @property
    def record_size(self) -> int:
        return record_size_bytes(self.budget, self.sh_degree)

    def times(self) -> range:
        return range(self.t0, self.t0 + self.num_frames)

    def load_frame(self, t: int) -> GaussianFrame:
        if not self.t0 <= t < self.t0 + self.num_frames:
            raise FrameNotFoundError(
                f"t={t} outside archive range [{self.t0}, {self.t0 + self.num_frames})")
        offset, ck = self._index[t - self.t0]
        self._fh.seek(offset)
        data = self._fh.read(self.record_size)
        if len(data) != self.record_size or _checksum(data) != ck:
            raise IntegrityError(f"{self.path}: checksum mismatch for frame t={t}")
        flat = np.frombuffer(data, dtype="<f4").astype(float).reshape(
            self.budget, floats_per_gaussian(self.sh_degree))
        return GaussianFrame.from_flat(t, flat, self.sh_degree)

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def render_query(archive: Archive, t: int, camera) -> ImageBuffer:
    """Retrospective novel-view render: load the archived frame and rasterize."""
    return rasterize(archive.load_frame(t), camera)


def write_archive(path, frames, manifest: dict) -> None:
    with ArchiveWriter(path, manifest) as w:
        for frame in frames:
            w.append_frame(frame)


# --- interoperable splat PLY export -----------------------------------------

def _ply_property_names(sh_degree: int) -> list[str]:
    n_rest = 3 * (num_sh_coeffs(sh_degree) - 1)
    names = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
    names += [f"f_rest_{i}" for i in range(n_rest)]
    names += ["opacity", "scale_0", "scale_1", "scale_2",
              "rot_0", "rot_1", "rot_2", "rot_3"]
    return names


def export_frame_ply(archive: Archive, t: int, path) -> None:
    frame = archive.load_frame(t)
    export_gaussians_ply(frame, path)


def export_gaussians_ply(frame: GaussianFrame, path) -> None:
    """Binary little-endian PLY in the de-facto splat-viewer layout.

    f_rest is channel-major: all red coefficients, then green, then blue
    (opacity stays in logit space, scales in log space).
    """
    K = frame.size
    names = _ply_property_names(frame.sh_degree)
    rest = frame.sh[:, 1:, :].transpose(0, 2, 1).reshape(K, -1)
    data = np.concatenate([
        frame.mu,
        np.zeros((K, 3)),
        frame.sh[:, 0, :],
        rest,
        frame.alpha_logit[:, None],
        frame.log_s,
        frame.q,
    ], axis=1).astype("<f4")
    header = "ply\nformat binary_little_endian 1.0\n"
    header += f"element vertex {K}\n"
    header += "".join(f"property float {n}\n" for n in names)
    header += "end_header\n"
    try:
        with open(path, "wb") as fh:
            fh.write(header.encode("ascii"))
            fh.write(np.ascontiguousarray(data).tobytes())
    except OSError as e:
        raise DataFormatError(f"cannot write PLY {path}: {e}") from e


def import_gaussians_ply(path, t: int = 0) -> GaussianFrame:
    """Inverse of export_gaussians_ply (float32 precision)."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as e:
        raise DataFormatError(f"cannot read PLY {path}: {e}") from e
    end = blob.find(b"end_header\n")
    if not blob.startswith(b"ply") or end < 0:
        raise DataFormatError(f"{path}: not a PLY file")
    header = blob[:end].decode("ascii").splitlines()
    props = [ln.split()[2] for ln in header if ln.startswith("property")]
    vertex_lines = [ln for ln in header if ln.startswith("element vertex")]
    if not vertex_lines:
        raise DataFormatError(f"{path}: missing vertex element")
    K = int(vertex_lines[0].split()[2])
    n_rest = sum(1 for p in props if p.startswith("f_rest_"))
    if n_rest % 3 != 0:
        raise DataFormatError(f"{path}: f_rest count not divisible by 3")
    B = n_rest // 3 + 1
    sh_degree = int(round(np.sqrt(B))) - 1
    if num_sh_coeffs(sh_degree) != B:
        raise DataFormatError(f"{path}: f_rest count implies no valid SH degree")
    data = np.frombuffer(blob[end + len(b"end_header\n"):],
                         dtype="<f4").astype(float)
    if data.size != K * len(props):
        raise DataFormatError(f"{path}: payload size mismatch")
    data = data.reshape(K, len(props))
    col = {p: i for i, p in enumerate(props)}
    sh = np.zeros((K, B, 3))
    sh[:, 0, :] = data[:, [col["f_dc_0"], col["f_dc_1"], col["f_dc_2"]]]
    if B > 1:
        rest = data[:, col["f_rest_0"]:col["f_rest_0"] + n_rest]
        sh[:, 1:, :] = rest.reshape(K, 3, B - 1).transpose(0, 2, 1)
    return GaussianFrame(
        t,
        data[:, [col["x"], col["y"], col["z"]]],
        data[:, [col["rot_0"], col["rot_1"], col["rot_2"], col["rot_3"]]],
        data[:, [col["scale_0"], col["scale_1"], col["scale_2"]]],
        data[:, col["opacity"]],
        sh,
        sh_degree,
    )
