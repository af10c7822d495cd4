"""Binary wire format for detection messages.

Little-endian layout: a 14-byte header [tag u8][sender u8][seq u32]
[range f32][bearing f32], a u32 record count, then the per-method payload:

  naive / std_thinning : count * (x f32, y f32, theta f32)      12 B/record
  kmeans               : count * (cx, cy, cxx, cxy, cyy, w) f32 24 B/record
  prorok               : count * (cx, cy, ctheta, w,
                                  mu_r, mu_theta, var_r, var_theta) f32
                                                                32 B/record
  det                  : count * 50-byte node records (bbox 4*f32,
                         density f32, split_dim u8, split_value f32,
                         children 2*u32, leaf u8, 16 pad)       50 B/record
  compresspp           : count * (x f32, y f32)                  8 B/record

Payload scalars are 4-byte floats; encode() casts to float32, so a decoded
message re-encodes bit-identically.  Density-tree payloads carry only leaf
records (bbox + density), which fully determine the transmitted density.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .compress import ClusterAbstraction, GaussianCluster
from .world_map import Detection, Pose

HEADER_BYTES = 14  # tag + sender + seq + detection; count is separate
_HEADER = struct.Struct("<BBIff")
_COUNT = struct.Struct("<I")
_DET_NODE = struct.Struct("<ffff f B f II B 16x")
assert _DET_NODE.size == 50

TAG_BY_METHOD = {
    "naive": 1,
    "std_thinning": 2,
    "det": 3,
    "prorok": 4,
    "kmeans": 5,
    "compresspp": 6,
}
METHOD_BY_TAG = {v: k for k, v in TAG_BY_METHOD.items()}

RECORD_BYTES = {
    "naive": 12,
    "std_thinning": 12,
    "det": 50,
    "prorok": 32,
    "kmeans": 24,
    "compresspp": 8,
}


class WireError(ValueError):
    """Malformed message buffer."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (offset {offset})"
        super().__init__(message)
        self.offset = offset


@dataclass(frozen=True)
class PosesPayload:
    """Sender particle poses, (M, 3) float array."""

    poses: np.ndarray


@dataclass(frozen=True)
class KmeansPayload:
    means: np.ndarray    # (K, 2)
    covs: np.ndarray     # (K, 2, 2) symmetric
    weights: np.ndarray  # (K,)

    def clusters(self):
        return [GaussianCluster(self.means[i], self.covs[i], float(self.weights[i]))
                for i in range(self.means.shape[0])]


@dataclass(frozen=True)
class ProrokPayload:
    centroids: np.ndarray  # (K, 3) poses
    weights: np.ndarray    # (K,)
    det_means: np.ndarray  # (K, 2) (range, bearing)
    det_vars: np.ndarray   # (K, 2) (var_r, var_bearing)

    def clusters(self):
        return [ClusterAbstraction(
            Pose(*self.centroids[i]), float(self.weights[i]),
            tuple(self.det_means[i]), tuple(self.det_vars[i]))
            for i in range(self.centroids.shape[0])]


@dataclass(frozen=True)
class DetPayload:
    bboxes: np.ndarray     # (T, 4) (xmin, xmax, ymin, ymax)
    densities: np.ndarray  # (T,)


@dataclass(frozen=True)
class CoresetPayload:
    points: np.ndarray  # (M, 2)


@dataclass(frozen=True)
class BeliefSummary:
    """One transmitted belief message."""

    method: str
    sender_id: int
    seq: int
    detection: Detection
    payload: object

    def count(self):
        p = self.payload
        if isinstance(p, PosesPayload):
            return p.poses.shape[0]
        if isinstance(p, KmeansPayload):
            return p.means.shape[0]
        if isinstance(p, ProrokPayload):
            return p.centroids.shape[0]
        if isinstance(p, DetPayload):
            return p.bboxes.shape[0]
        if isinstance(p, CoresetPayload):
            return p.points.shape[0]
        raise TypeError(f"unknown payload type {type(p).__name__}")

    def payload_nbytes(self):
        return RECORD_BYTES[self.method] * self.count()


def _f32_rows(*arrays):
    """Column-stack arrays and flatten to float32 little-endian bytes."""
    stacked = np.column_stack(arrays).astype("<f4")
    return stacked.tobytes(order="C")


def encode(msg: BeliefSummary) -> bytes:
    """Serialize a message; see the module docstring for the layout."""
    if msg.method not in TAG_BY_METHOD:
        raise WireError(f"unknown method {msg.method!r}")
    count = msg.count()
    if count == 0:
        raise WireError("refusing to encode an empty payload")
    if count > 0xFFFFFFFF:
        raise WireError("payload count exceeds u32")
    head = _HEADER.pack(TAG_BY_METHOD[msg.method], msg.sender_id, msg.seq,
                        msg.detection.range, msg.detection.bearing)
    head += _COUNT.pack(count)

    p = msg.payload
    if isinstance(p, PosesPayload):
        body = np.asarray(p.poses).astype("<f4").tobytes(order="C")
    elif isinstance(p, KmeansPayload):
        body = _f32_rows(p.means[:, 0], p.means[:, 1],
                         p.covs[:, 0, 0], p.covs[:, 0, 1], p.covs[:, 1, 1],
                         p.weights)
    elif isinstance(p, ProrokPayload):
        body = _f32_rows(p.centroids[:, 0], p.centroids[:, 1], p.centroids[:, 2],
                         p.weights, p.det_means[:, 0], p.det_means[:, 1],
                         p.det_vars[:, 0], p.det_vars[:, 1])
    elif isinstance(p, DetPayload):
        parts = []
        for i in range(count):
            xmin, xmax, ymin, ymax = (float(v) for v in p.bboxes[i])
            parts.append(_DET_NODE.pack(xmin, xmax, ymin, ymax,
                                        float(p.densities[i]), 0, 0.0, 0, 0, 1))
        body = b"".join(parts)
    elif isinstance(p, CoresetPayload):
        body = np.asarray(p.points).astype("<f4").tobytes(order="C")
    else:
        raise WireError(f"unknown payload type {type(p).__name__}")
    return head + body


def _check_finite(arr, offset):
    if not np.isfinite(arr).all():
        raise WireError("non-finite float in payload", offset=offset)


def decode(buf: bytes) -> BeliefSummary:
    """Parse a message buffer; raises WireError with the failing offset."""
    if len(buf) < HEADER_BYTES + _COUNT.size:
        raise WireError("buffer shorter than header", offset=len(buf))
    tag, sender, seq, rng_, bearing = _HEADER.unpack_from(buf, 0)
    if tag not in METHOD_BY_TAG:
        raise WireError(f"unknown method tag {tag}", offset=0)
    method = METHOD_BY_TAG[tag]
    if not (np.isfinite(rng_) and np.isfinite(bearing)) or rng_ < 0.0:
        raise WireError("bad detection in header", offset=6)
    (count,) = _COUNT.unpack_from(buf, HEADER_BYTES)
    if count == 0:
        raise WireError("empty payload", offset=HEADER_BYTES)
    body_off = HEADER_BYTES + _COUNT.size
    expected = RECORD_BYTES[method] * count
    if len(buf) - body_off != expected:
        raise WireError(
            f"payload length mismatch: expected {expected} bytes, "
            f"got {len(buf) - body_off}", offset=body_off)
    body = buf[body_off:]
    detection = Detection(rng_, bearing)

    if method in ("naive", "std_thinning"):
        arr = np.frombuffer(body, dtype="<f4").reshape(count, 3).astype(np.float32)
        _check_finite(arr, body_off)
        payload = PosesPayload(arr)
    elif method == "kmeans":
        arr = np.frombuffer(body, dtype="<f4").reshape(count, 6).astype(np.float32)
        _check_finite(arr, body_off)
        covs = np.empty((count, 2, 2), dtype=np.float32)
        covs[:, 0, 0] = arr[:, 2]
        covs[:, 0, 1] = arr[:, 3]
        covs[:, 1, 0] = arr[:, 3]
        covs[:, 1, 1] = arr[:, 4]
        payload = KmeansPayload(arr[:, 0:2].copy(), covs, arr[:, 5].copy())
    elif method == "prorok":
        arr = np.frombuffer(body, dtype="<f4").reshape(count, 8).astype(np.float32)
        _check_finite(arr, body_off)
        payload = ProrokPayload(arr[:, 0:3].copy(), arr[:, 3].copy(),
                                arr[:, 4:6].copy(), arr[:, 6:8].copy())
    elif method == "det":
        bboxes = np.empty((count, 4), dtype=np.float32)
        densities = np.empty(count, dtype=np.float32)
        for i in range(count):
            off = body_off + i * 50
            xmin, xmax, ymin, ymax, dens, _sd, _sv, _l, _r, leaf = \
                _DET_NODE.unpack_from(buf, off)
            if leaf != 1:
                raise WireError("non-leaf record in density payload", offset=off)
            bboxes[i] = (xmin, xmax, ymin, ymax)
            densities[i] = dens
        _check_finite(bboxes, body_off)
        _check_finite(densities, body_off)
        payload = DetPayload(bboxes, densities)
    else:  # compresspp
        arr = np.frombuffer(body, dtype="<f4").reshape(count, 2).astype(np.float32)
        _check_finite(arr, body_off)
        payload = CoresetPayload(arr)
    return BeliefSummary(method, sender, seq, detection, payload)
