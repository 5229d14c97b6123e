"""Motor babbling and dataset assembly for the four collection strategies.

Strategy 1 (gaze): start each iteration with the ball analytically centered,
execute a random head delta, record (centroid, additive inverse of the
executed delta). Strategy 2 (arm): random in-limit arm poses paired with the
hand position from forward kinematics. Strategy 3 (eye-hand): random arm
pose, ball placed in the open grasp, gaze controller centers it (head scan
as fallback), record the (hand position, arm pose, absolute head pose)
triplet; failed iterations are cancelled. Strategy 4: strategy 3 with the
shoulder-rotation joint locked at zero and half the iterations.

Augmentation interpolates in the commanded space and re-derives every
sensory value through the simulator, never by interpolating sensor readings.

Datasets persist as line-delimited JSON with a schema header; floats are
64-bit and round-trip exactly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from gwr_reach import robot as rb

GAZE_BABBLE_DEG = 15.0
GAZE_DEPTH_RANGE = (30.0, 80.0)
GAZE_INTERP_POINTS = 5
ARM_INTERP_POINTS = 14
CENTER_TOL_PX = 3.0
MAX_CENTER_STEPS = 10

FORMAT_NAME = "gwr-reach-dataset"
FORMAT_VERSION = 1

_SCHEMAS = {
    "gaze": (("s_head", 2, "px"), ("m_delta_head_inv", 2, "deg")),
    "arm": (("s_arm", 3, "cm"), ("m_arm", 4, "deg")),
    "eyehand": (("s_arm", 3, "cm"), ("m_arm", 4, "deg"), ("m_head", 2, "deg")),
    "envchange": (("s_arm", 3, "cm"), ("m_arm", 4, "deg"), ("m_head", 2, "deg")),
}


@dataclass
class SensorimotorDataset:
    """Tagged sample columns for one collection stage."""

    stage: str
    fields: dict[str, np.ndarray]
    seed: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.stage not in _SCHEMAS:
            raise ValueError(f"unknown stage {self.stage!r}")
        schema = _SCHEMAS[self.stage]
        if tuple(self.fields) != tuple(name for name, _, _ in schema):
            raise ValueError(f"fields {tuple(self.fields)} do not match stage {self.stage!r}")
        n = {len(v) for v in self.fields.values()}
        if len(n) > 1:
            raise ValueError("field columns have mismatched lengths")
        for name, dim, _ in schema:
            col = np.asarray(self.fields[name], dtype=np.float64).reshape(-1, dim)
            self.fields[name] = col

    def __len__(self) -> int:
        return len(next(iter(self.fields.values())))

    def column(self, name: str) -> np.ndarray:
        return self.fields[name]

    def digest(self) -> str:
        """Content hash over stage, seed, and raw sample bytes."""
        h = hashlib.sha256(f"{self.stage}:{self.seed}:{len(self)}".encode())
        for name in self.fields:
            h.update(name.encode())
            h.update(self.fields[name].tobytes())
        return h.hexdigest()

    def save(self, path) -> None:
        schema = _SCHEMAS[self.stage]
        header = {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "stage": self.stage,
            "fields": [name for name, _, _ in schema],
            "dims": {name: dim for name, dim, _ in schema},
            "units": {name: unit for name, _, unit in schema},
            "seed": self.seed,
            "count": len(self),
            "meta": self.meta,
        }
        with open(path, "w") as fh:
            fh.write(json.dumps(header) + "\n")
            names = list(self.fields)
            for i in range(len(self)):
                rec = {name: self.fields[name][i].tolist() for name in names}
                fh.write(json.dumps(rec) + "\n")

    @classmethod
    def load(cls, path) -> "SensorimotorDataset":
        with open(path) as fh:
            header = json.loads(fh.readline())
            if header.get("format") != FORMAT_NAME:
                raise ValueError(f"{path}: not a {FORMAT_NAME} file")
            stage = header["stage"]
            names = header["fields"]
            rows = {name: [] for name in names}
            for line in fh:
                rec = json.loads(line)
                for name in names:
                    rows[name].append(rec[name])
        fields = {name: np.array(rows[name], dtype=np.float64).reshape(len(rows[name]), -1)
                  if rows[name] else np.zeros((0, header["dims"][name]))
                  for name in names}
        return cls(stage=stage, fields=fields, seed=header["seed"], meta=header.get("meta", {}))


# ----------------------------------------------------------------------
# strategy 1: gaze
# ----------------------------------------------------------------------

def _ball_on_axis(config: rb.SimConfig, state: rb.RobotState, depth: float) -> rb.Target:
    r_head, cam = rb.head_camera(config, state.head)
    return rb.Target(cam + depth * r_head[:, 0], radius=config.ball_radius)


def gen_gaze_dataset(config: rb.SimConfig, iterations: int = 1000, seed: int = 0,
                     audit: bool = False):
    """Centroid/inverse-delta pairs from random head babbling.

    Each iteration re-centers the ball analytically at a random depth,
    executes a uniform head delta within +-15 degrees per joint, and stores
    the post-move centroid with the additive inverse of the executed delta.
    Augmentation adds samples along the executed path (sub-deltas of the same
    move, percept re-rendered) plus a centered zero-delta anchor on every
    second iteration. Samples whose percept leaves the frame are discarded.

    With ``audit=True`` also returns per-sample replay context
    (start pose, ball position, executed sub-delta).
    """
    rng = np.random.default_rng(seed)
    state = rb.initial_state(config)
    s_rows, m_rows, audit_rows = [], [], []
    discarded = 0
    k = GAZE_INTERP_POINTS
    for i in range(iterations):
        depth = rng.uniform(*GAZE_DEPTH_RANGE)
        ball = _ball_on_axis(config, state, depth)
        if i % 2 == 0:
            percept = rb.perceive_target(config, state, ball)
            if percept is not None:
                s_rows.append([percept.u, percept.v])
                m_rows.append([0.0, 0.0])
                audit_rows.append((state.head.copy(), ball.position.copy(), np.zeros(2)))
        command = rng.uniform(-GAZE_BABBLE_DEG, GAZE_BABBLE_DEG, size=2)
        moved, _ = rb.apply_motor(state, command, "head")
        executed = moved.head - state.head
        for j in range(1, k + 2):
            sub = executed * (j / (k + 1))
            pose, _ = rb.apply_motor(state, state.head + sub, "head", mode="absolute")
            percept = rb.perceive_target(config, pose, ball)
            if percept is None:
                discarded += 1
                continue
            s_rows.append([percept.u, percept.v])
            m_rows.append((-sub).tolist())
            audit_rows.append((state.head.copy(), ball.position.copy(), sub.copy()))
        state = moved
    ds = SensorimotorDataset(
        stage="gaze",
        fields={"s_head": np.array(s_rows), "m_delta_head_inv": np.array(m_rows)},
        seed=seed,
        meta={"iterations": iterations, "discarded": discarded},
    )
    return (ds, audit_rows) if audit else ds


# ----------------------------------------------------------------------
# strategy 2: arm
# ----------------------------------------------------------------------

def gen_arm_dataset(config: rb.SimConfig, iterations: int = 1000, seed: int = 0) -> SensorimotorDataset:
    """Hand-position/arm-pose pairs from random in-limit arm babbling.

    Augmentation linearly interpolates joint vectors between consecutive
    babble poses and recomputes the hand position through forward kinematics
    at every interpolated pose.
    """
    rng = np.random.default_rng(seed)
    lims = np.array(config.arm_limits)
    k = ARM_INTERP_POINTS
    s_rows, m_rows = [], []

    def push(q):
        s_rows.append(rb.forward_kinematics(config, q))
        m_rows.append(q)

    prev = None
    for _ in range(iterations):
        q = rng.uniform(lims[:, 0], lims[:, 1])
        if prev is not None:
            for j in range(1, k + 1):
                push(prev + (q - prev) * (j / (k + 1)))
        push(q)
        prev = q
    return SensorimotorDataset(
        stage="arm",
        fields={"s_arm": np.array(s_rows), "m_arm": np.array(m_rows)},
        seed=seed,
        meta={"iterations": iterations},
    )


# ----------------------------------------------------------------------
# strategies 3 and 4: eye-hand triplets
# ----------------------------------------------------------------------

class GazeController(Protocol):
    """Anything that proposes a corrective head delta for an off-center percept."""

    def __call__(self, percept: rb.Percept) -> np.ndarray: ...


def center_on_target(config: rb.SimConfig, state: rb.RobotState, target: rb.Target,
                     controller: GazeController,
                     tol_px: float = CENTER_TOL_PX,
                     max_steps: int = MAX_CENTER_STEPS) -> tuple[rb.RobotState, float, bool]:
    """Drive the head until the target centroid sits within tol of the center.

    Falls back to a scan sweep whenever the target is out of view. Returns
    (state, final pixel error, success flag); failure means the step budget
    ran out or the target was never seen.
    """
    cx, cy = config.principal
    percept = rb.perceive_target(config, state, target)
    if percept is None:
        state, percept = rb.scan_for_target(config, state, target)
        if percept is None:
            return state, np.inf, False
    err = float(np.hypot(percept.u - cx, percept.v - cy))
    for _ in range(max_steps):
        if err <= tol_px:
            return state, err, True
        delta = controller(percept)
        if delta is None:  # controller has no answer for this percept
            return state, err, False
        state, _ = rb.apply_motor(state, delta, "head")
        percept = rb.perceive_target(config, state, target)
        if percept is None:
            state, percept = rb.scan_for_target(config, state, target)
            if percept is None:
                return state, np.inf, False
        err = float(np.hypot(percept.u - cx, percept.v - cy))
    return state, err, err <= tol_px


def gen_eyehand_dataset(config: rb.SimConfig, controller: GazeController,
                        iterations: int = 1000, seed: int = 0, locked: bool = False,
                        audit: bool = False):
    """Triplets (hand position, arm pose, head pose) from arm babbling.

    Per iteration: command a random arm pose, put the ball in the open grasp,
    let the gaze controller center it (scanning when it is out of view), and
    record the triplet. Iterations that cannot be centered within tolerance
    are cancelled and produce nothing.
    """
    rng = np.random.default_rng(seed)
    state = rb.initial_state(config)
    if locked:
        state = rb.lock_arm_joint(state, rb.ROTATION_JOINT, 0.0)
    lims = np.array(config.arm_limits)
    s_rows, ma_rows, mh_rows, errs = [], [], [], []
    cancelled = 0
    for _ in range(iterations):
        command = rng.uniform(lims[:, 0], lims[:, 1])
        state, _ = rb.apply_motor(state, command, "arm", mode="absolute")
        ball = rb.place_ball_in_hand(config, state)
        state, err, ok = center_on_target(config, state, ball, controller)
        if not ok:
            cancelled += 1
            continue
        s_rows.append(rb.forward_kinematics(config, state.arm))
        ma_rows.append(state.arm.copy())
        mh_rows.append(state.head.copy())
        errs.append(err)
    stage = "envchange" if locked else "eyehand"
    ds = SensorimotorDataset(
        stage=stage,
        fields={"s_arm": np.array(s_rows).reshape(-1, 3),
                "m_arm": np.array(ma_rows).reshape(-1, 4),
                "m_head": np.array(mh_rows).reshape(-1, 2)},
        seed=seed,
        meta={"iterations": iterations, "cancelled": cancelled},
    )
    return (ds, np.array(errs)) if audit else ds


def gen_envchange_dataset(config: rb.SimConfig, controller: GazeController,
                          iterations: int = 500, seed: int = 0, audit: bool = False):
    """Strategy 3 on the damaged robot: rotation joint locked at zero."""
    return gen_eyehand_dataset(config, controller, iterations=iterations, seed=seed,
                               locked=True, audit=audit)
