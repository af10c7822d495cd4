"""Run artifacts: recorded sensor streams and replayed run logs.

Both are line-delimited JSON (one object per line, first line is the meta
record).  A run log can optionally carry a compressed ``.npz`` sidecar with
belief snapshots taken at message events, used for replay-consistency
checks.

Float values are serialized with Python's shortest round-trip repr, so a
log written twice from the same run is byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


class LogFormatError(ValueError):
    pass


def _row(obj):
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def _pose_list(p):
    return [float(p[0]), float(p[1]), float(p[2])]


@dataclass
class ScanEvent:
    t: float
    robot: str  # "a" | "b"
    ranges: np.ndarray


@dataclass
class DetectionEvent:
    t: float
    true_range: float
    true_bearing: float
    meas_range: float
    meas_bearing: float


@dataclass
class MessageEvent:
    t: float
    seq: int
    sender: int
    heading: float  # sender's estimated heading when the message was built
    data: bytes


@dataclass
class SensorLog:
    """Strategy-agnostic recording of one scenario execution."""

    meta: dict
    t: np.ndarray          # (T,)
    gt_a: np.ndarray       # (T, 3)
    gt_b: np.ndarray       # (T, 3)
    odom_a: np.ndarray     # (T, 3) body-frame increments for tick i-1 -> i
    odom_b: np.ndarray
    scans: list = field(default_factory=list)       # [ScanEvent]
    detections: list = field(default_factory=list)  # [DetectionEvent]

    @property
    def duration(self):
        return float(self.meta["duration"])

    def save(self, path):
        path = Path(path)
        with path.open("w", encoding="utf-8") as f:
            meta = dict(self.meta, type="meta", kind="sensor",
                        schema=SCHEMA_VERSION)
            f.write(_row(meta) + "\n")
            scan_i = det_i = 0
            for i in range(len(self.t)):
                f.write(_row({
                    "type": "tick", "t": self.t[i],
                    "gta": _pose_list(self.gt_a[i]), "gtb": _pose_list(self.gt_b[i]),
                    "oda": _pose_list(self.odom_a[i]), "odb": _pose_list(self.odom_b[i]),
                }) + "\n")
                while scan_i < len(self.scans) and self.scans[scan_i].t <= self.t[i]:
                    s = self.scans[scan_i]
                    f.write(_row({"type": "scan", "t": s.t, "robot": s.robot,
                                  "ranges": [round(float(r), 4) for r in s.ranges]})
                            + "\n")
                    scan_i += 1
                while det_i < len(self.detections) and self.detections[det_i].t <= self.t[i]:
                    d = self.detections[det_i]
                    f.write(_row({"type": "det", "t": d.t,
                                  "true": [d.true_range, d.true_bearing],
                                  "meas": [d.meas_range, d.meas_bearing]}) + "\n")
                    det_i += 1
        return path


@dataclass
class RunLog:
    """Ground truth, estimates and message events of one replayed run."""

    meta: dict
    t: np.ndarray
    gt_a: np.ndarray
    gt_b: np.ndarray
    est_a: np.ndarray
    est_b: np.ndarray
    messages: list = field(default_factory=list)  # [MessageEvent]
    snapshots: dict | None = None

    @property
    def duration(self):
        return float(self.meta["duration"])

    @property
    def strategy(self):
        return self.meta.get("strategy")

    def save(self, path):
        path = Path(path)
        with path.open("w", encoding="utf-8") as f:
            meta = dict(self.meta, type="meta", kind="run", schema=SCHEMA_VERSION)
            f.write(_row(meta) + "\n")
            msg_i = 0
            for i in range(len(self.t)):
                f.write(_row({
                    "type": "est", "t": self.t[i],
                    "gta": _pose_list(self.gt_a[i]), "gtb": _pose_list(self.gt_b[i]),
                    "esta": _pose_list(self.est_a[i]), "estb": _pose_list(self.est_b[i]),
                }) + "\n")
                while msg_i < len(self.messages) and self.messages[msg_i].t <= self.t[i]:
                    m = self.messages[msg_i]
                    f.write(_row({"type": "msg", "t": m.t, "seq": m.seq,
                                  "sender": m.sender, "heading": m.heading,
                                  "data": m.data.hex()}) + "\n")
                    msg_i += 1
        if self.snapshots:
            np.savez_compressed(str(path) + ".npz", **self.snapshots)
        return path


def _load_lines(path):
    path = Path(path)
    with path.open("r", encoding="utf-8") as f:
        for n, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield n, json.loads(line)
            except json.JSONDecodeError as e:
                raise LogFormatError(f"{path}:{n}: bad JSON ({e})") from None


def _check_meta(meta, kind, path):
    if meta.get("type") != "meta" or meta.get("kind") != kind:
        raise LogFormatError(f"{path}: expected a {kind} log meta line")
    if meta.get("schema") != SCHEMA_VERSION:
        raise LogFormatError(
            f"{path}: schema version {meta.get('schema')} != {SCHEMA_VERSION}")


def load_sensor_log(path) -> SensorLog:
    rows = _load_lines(path)
    try:
        _, meta = next(rows)
    except StopIteration:
        raise LogFormatError(f"{path}: empty log") from None
    _check_meta(meta, "sensor", path)
    t, gta, gtb, oda, odb = [], [], [], [], []
    scans, dets = [], []
    for _, obj in rows:
        kind = obj.get("type")
        if kind == "tick":
            t.append(obj["t"])
            gta.append(obj["gta"])
            gtb.append(obj["gtb"])
            oda.append(obj["oda"])
            odb.append(obj["odb"])
        elif kind == "scan":
            scans.append(ScanEvent(obj["t"], obj["robot"],
                                   np.asarray(obj["ranges"], dtype=np.float64)))
        elif kind == "det":
            dets.append(DetectionEvent(obj["t"], obj["true"][0], obj["true"][1],
                                       obj["meas"][0], obj["meas"][1]))
    return SensorLog(meta, np.asarray(t), np.asarray(gta), np.asarray(gtb),
                     np.asarray(oda), np.asarray(odb), scans, dets)


def load_run_log(path, with_snapshots=False) -> RunLog:
    rows = _load_lines(path)
    try:
        _, meta = next(rows)
    except StopIteration:
        raise LogFormatError(f"{path}: empty log") from None
    _check_meta(meta, "run", path)
    t, gta, gtb, esta, estb = [], [], [], [], []
    msgs = []
    for _, obj in rows:
        kind = obj.get("type")
        if kind == "est":
            t.append(obj["t"])
            gta.append(obj["gta"])
            gtb.append(obj["gtb"])
            esta.append(obj["esta"])
            estb.append(obj["estb"])
        elif kind == "msg":
            msgs.append(MessageEvent(obj["t"], obj["seq"], obj["sender"],
                                     obj["heading"], bytes.fromhex(obj["data"])))
    snapshots = None
    if with_snapshots:
        side = Path(str(path) + ".npz")
        if side.exists():
            with np.load(side) as z:
                snapshots = {k: z[k] for k in z.files}
    return RunLog(meta, np.asarray(t), np.asarray(gta), np.asarray(gtb),
                  np.asarray(esta), np.asarray(estb), msgs, snapshots)
