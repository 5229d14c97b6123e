"""Analytic kinematic stand-in for the simulated humanoid.

World frame: x forward out of the chest, y to the robot's left, z up, origin
at a fixed torso reference point, lengths in centimeters, angles in degrees.

Head: yaw about z then pitch about the yawed y axis (positive pitch looks
down), with a single pinhole camera mounted a few cm forward of the pitch
axis and tilted down toward the arm workspace, rendering an 80x60 frame.
Right arm: shoulder yaw (q1, about z), pitch (q0, about y), axial rotation
of the upper arm (q2), and elbow flexion (q3). At the zero pose the arm
points forward and slightly down. The axial-rotation joint q2 is the one
locked in the damaged-joint experiment: it moves nothing while the elbow is
straight, but selects the elbow's bending plane, so freezing it shrinks the
reachable volume. The default mount angles and joint ranges were chosen so
random babbling stays almost entirely inside the head's centerable cone.

RobotState is a value: every operation returns a fresh state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

ROTATION_JOINT = 2  # arm joint index locked in the damaged-joint experiment
IMAGE_W = 80
IMAGE_H = 60


@dataclass(frozen=True)
class SimConfig:
    """Kinematic link table, joint limits, and camera intrinsics.

    The defaults describe a seated child-sized humanoid; the paper-scale
    pieces (upper arm and forearm 15 cm, 80x60 image, 5 cm ball) are fixed,
    the remaining offsets are a documented stand-in.
    """

    neck_base: tuple = (-10.0, 0.0, 42.0)
    camera_forward: float = 5.0
    camera_yaw0: float = -3.0
    camera_pitch0: float = 40.0
    focal_px: float = 50.0
    principal: tuple = (40.0, 30.0)
    head_limits: tuple = ((-60.0, 60.0), (-45.0, 45.0))
    shoulder: tuple = (0.0, -13.0, 15.0)
    shoulder_yaw0: float = 0.0
    shoulder_pitch0: float = 10.0
    upper_arm_len: float = 15.0
    forearm_len: float = 15.0
    arm_limits: tuple = ((-55.0, 40.0), (-20.0, 65.0), (-65.0, 65.0), (0.0, 45.0))
    grasp_offset: tuple = (4.0, 0.0, 0.0)
    ball_radius: float = 2.5
    angle_noise_deg: float = 0.0

    def __post_init__(self):
        if self.upper_arm_len <= 0 or self.forearm_len <= 0:
            raise ValueError("link lengths must be positive")
        cx, cy = self.principal
        if not (0 <= cx < IMAGE_W and 0 <= cy < IMAGE_H):
            raise ValueError("principal point must lie inside the image")

    def to_dict(self) -> dict:
        return {
            "neck_base": list(self.neck_base),
            "camera_forward": self.camera_forward,
            "camera_yaw0": self.camera_yaw0,
            "camera_pitch0": self.camera_pitch0,
            "focal_px": self.focal_px,
            "principal": list(self.principal),
            "head_limits": [list(l) for l in self.head_limits],
            "shoulder": list(self.shoulder),
            "shoulder_yaw0": self.shoulder_yaw0,
            "shoulder_pitch0": self.shoulder_pitch0,
            "upper_arm_len": self.upper_arm_len,
            "forearm_len": self.forearm_len,
            "arm_limits": [list(l) for l in self.arm_limits],
            "grasp_offset": list(self.grasp_offset),
            "ball_radius": self.ball_radius,
            "angle_noise_deg": self.angle_noise_deg,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        def tup(v):
            return tuple(tuple(e) if isinstance(e, list) else e for e in v)

        return cls(
            neck_base=tuple(d["neck_base"]),
            camera_forward=d["camera_forward"],
            camera_yaw0=d.get("camera_yaw0", 0.0),
            camera_pitch0=d.get("camera_pitch0", 0.0),
            focal_px=d["focal_px"],
            principal=tuple(d["principal"]),
            head_limits=tup(d["head_limits"]),
            shoulder=tuple(d["shoulder"]),
            shoulder_yaw0=d.get("shoulder_yaw0", 0.0),
            shoulder_pitch0=d.get("shoulder_pitch0", 0.0),
            upper_arm_len=d["upper_arm_len"],
            forearm_len=d["forearm_len"],
            arm_limits=tup(d["arm_limits"]),
            grasp_offset=tuple(d["grasp_offset"]),
            ball_radius=d["ball_radius"],
            angle_noise_deg=d.get("angle_noise_deg", 0.0),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "SimConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def default_config() -> SimConfig:
    return SimConfig()


@dataclass(frozen=True)
class RobotState:
    """Head and arm joint angles (degrees) plus per-joint locks and limits."""

    head: np.ndarray
    arm: np.ndarray
    head_locks: np.ndarray
    arm_locks: np.ndarray
    head_limits: np.ndarray
    arm_limits: np.ndarray

    def __post_init__(self):
        for name in ("head", "arm", "head_locks", "arm_locks", "head_limits", "arm_limits"):
            arr = np.asarray(getattr(self, name))
            arr = arr.astype(bool if name.endswith("locks") else np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.head.shape != (2,) or self.arm.shape != (4,):
            raise ValueError("head must have 2 joints and arm 4")


def initial_state(config: SimConfig) -> RobotState:
    """All joints at zero, nothing locked."""
    return RobotState(
        head=np.zeros(2),
        arm=np.zeros(4),
        head_locks=np.zeros(2, dtype=bool),
        arm_locks=np.zeros(4, dtype=bool),
        head_limits=np.array(config.head_limits, dtype=np.float64),
        arm_limits=np.array(config.arm_limits, dtype=np.float64),
    )


def lock_arm_joint(state: RobotState, joint: int, value: float = 0.0) -> RobotState:
    """Freeze an arm joint at the given angle (the damaged-joint experiment)."""
    lo, hi = state.arm_limits[joint]
    if not (lo <= value <= hi):
        raise ValueError(f"lock value {value} outside limits [{lo}, {hi}] of joint {joint}")
    arm = state.arm.copy()
    arm[joint] = value
    locks = state.arm_locks.copy()
    locks[joint] = True
    return replace(state, arm=arm, arm_locks=locks)


@dataclass(frozen=True)
class Target:
    """A ball in the world, position in torso-frame centimeters."""

    position: np.ndarray
    radius: float = 2.5

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64)
        pos.setflags(write=False)
        object.__setattr__(self, "position", pos)


@dataclass(frozen=True)
class Percept:
    """Pixel-mass centroid of the thresholded target in the 80x60 frame."""

    u: float
    v: float


# ----------------------------------------------------------------------
# rotation helpers
# ----------------------------------------------------------------------

def _rot_x(deg: float) -> np.ndarray:
    r = np.deg2rad(deg)
    c, s = np.cos(r), np.sin(r)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_y(deg: float) -> np.ndarray:
    r = np.deg2rad(deg)
    c, s = np.cos(r), np.sin(r)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_z(deg: float) -> np.ndarray:
    r = np.deg2rad(deg)
    c, s = np.cos(r), np.sin(r)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


# ----------------------------------------------------------------------
# forward kinematics
# ----------------------------------------------------------------------

def _check_arm_limits(config: SimConfig, arm: np.ndarray) -> np.ndarray:
    arm = np.asarray(arm, dtype=np.float64)
    if arm.shape != (4,):
        raise ValueError(f"arm command must have 4 joints, got shape {arm.shape}")
    limits = np.array(config.arm_limits)
    if np.any(arm < limits[:, 0] - 1e-9) or np.any(arm > limits[:, 1] + 1e-9):
        raise ValueError(f"arm angles {arm} violate limits {config.arm_limits}")
    return arm


def arm_frames(config: SimConfig, arm: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Elbow position, hand position, and hand rotation for an arm pose."""
    arm = _check_arm_limits(config, arm)
    q0, q1, q2, q3 = arm
    # mount offsets reorient the workspace without changing commanded ranges
    r_sh = _rot_z(q1 + config.shoulder_yaw0) @ _rot_y(q0 + config.shoulder_pitch0) @ _rot_x(q2)
    elbow = np.array(config.shoulder) + r_sh @ np.array([config.upper_arm_len, 0.0, 0.0])
    r_hand = r_sh @ _rot_z(q3)
    hand = elbow + r_hand @ np.array([config.forearm_len, 0.0, 0.0])
    return elbow, hand, r_hand


def forward_kinematics(config: SimConfig, arm: np.ndarray) -> np.ndarray:
    """Hand position (x, y, z) in torso-frame centimeters."""
    return arm_frames(config, arm)[1]


def grasp_point(config: SimConfig, arm: np.ndarray) -> np.ndarray:
    """Point a ball held in the open grasp would occupy (hand + rigid offset)."""
    _, hand, r_hand = arm_frames(config, arm)
    return hand + r_hand @ np.array(config.grasp_offset)


def place_ball_in_hand(config: SimConfig, state: RobotState) -> Target:
    """Target centered at the grasp point of the current arm pose."""
    return Target(position=grasp_point(config, state.arm), radius=config.ball_radius)


# ----------------------------------------------------------------------
# camera
# ----------------------------------------------------------------------

def head_camera(config: SimConfig, head: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """World-from-head rotation and camera position for a head pose."""
    head = np.asarray(head, dtype=np.float64)
    if head.shape != (2,):
        raise ValueError(f"head pose must have 2 joints, got shape {head.shape}")
    yaw, pitch = head
    # fixed camera mount offsets sit between the head joints and the lens
    r_head = _rot_z(yaw + config.camera_yaw0) @ _rot_y(pitch + config.camera_pitch0)
    cam = np.array(config.neck_base) + r_head @ np.array([config.camera_forward, 0.0, 0.0])
    return r_head, cam


@lru_cache(maxsize=8)
def _ray_grid(focal: float, cx: float, cy: float) -> np.ndarray:
    """Unit ray directions through every pixel center, camera frame, (H, W, 3)."""
    u = np.arange(IMAGE_W, dtype=np.float64)
    v = np.arange(IMAGE_H, dtype=np.float64)
    uu, vv = np.meshgrid(u, v)
    dirs = np.stack([(uu - cx) / focal, (vv - cy) / focal, np.ones_like(uu)], axis=-1)
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    dirs.setflags(write=False)
    return dirs


def perceive_target(config: SimConfig, state: RobotState, target: Target) -> Percept | None:
    """Rasterize the ball into the frame, threshold, return the mask centroid.

    Returns None when no pixel is covered or the ball sits behind the camera.
    """
    r_head, cam = head_camera(config, state.head)
    d = target.position - cam
    # camera frame: x right (-head y), y down (-head z), z forward (head x)
    c = np.array([-r_head[:, 1] @ d, -r_head[:, 2] @ d, r_head[:, 0] @ d])
    dist2 = float(c @ c)
    if c[2] <= 0.0 or dist2 <= target.radius**2:
        return None
    dirs = _ray_grid(config.focal_px, *config.principal)
    t = dirs @ c
    mask = (t > 0.0) & (dist2 - t * t <= target.radius**2)
    if not mask.any():
        return None
    vs, us = np.nonzero(mask)
    return Percept(u=float(us.mean()), v=float(vs.mean()))


def pixel_servo_delta(config: SimConfig, percept: Percept) -> np.ndarray:
    """Bearing-only corrective head delta (degrees) that recenters a percept.

    Small-angle visual servoing straight from the camera model; used as an
    independent reference controller next to the learned gaze model.
    """
    cx, cy = config.principal
    dyaw = -np.rad2deg(np.arctan2(percept.u - cx, config.focal_px))
    dpitch = np.rad2deg(np.arctan2(percept.v - cy, config.focal_px))
    return np.array([dyaw, dpitch])


def aim_head_at(config: SimConfig, point: np.ndarray) -> tuple[float, float]:
    """Head angles (unclamped) that put a world point exactly on the optical axis."""
    d = np.asarray(point, dtype=np.float64) - np.array(config.neck_base)
    yaw = np.rad2deg(np.arctan2(d[1], d[0]))
    pitch = np.rad2deg(np.arctan2(-d[2], np.hypot(d[0], d[1])))
    return float(yaw), float(pitch)


# ----------------------------------------------------------------------
# motor execution
# ----------------------------------------------------------------------

def apply_motor(state: RobotState, command: np.ndarray, group: str, mode: str = "delta",
                rng: np.random.Generator | None = None,
                noise_deg: float = 0.0) -> tuple[RobotState, np.ndarray]:
    """Execute a head or arm command; locked joints ignore it, limits clamp it.

    Args:
        state: Current robot state.
        command: Joint deltas or absolute angles, degrees; length 2 for
            ``group="head"``, 4 for ``group="arm"``.
        group: ``"head"`` or ``"arm"``.
        mode: ``"delta"`` or ``"absolute"``.
        rng: Source for optional Gaussian angle noise; required when
            ``noise_deg`` > 0.
        noise_deg: Standard deviation of actuation noise per joint.

    Returns:
        (new state, clamped) where ``clamped`` flags joints truncated at a limit.
    """
    if group not in ("head", "arm"):
        raise ValueError(f"group must be 'head' or 'arm', got {group!r}")
    if mode not in ("delta", "absolute"):
        raise ValueError(f"mode must be 'delta' or 'absolute', got {mode!r}")
    angles = getattr(state, group)
    locks = getattr(state, f"{group}_locks")
    limits = getattr(state, f"{group}_limits")
    command = np.asarray(command, dtype=np.float64)
    if command.shape != angles.shape:
        raise ValueError(f"{group} command must have shape {angles.shape}, got {command.shape}")
    wanted = angles + command if mode == "delta" else command.copy()
    if noise_deg > 0.0:
        if rng is None:
            raise ValueError("noise_deg > 0 requires an rng")
        wanted = wanted + rng.normal(0.0, noise_deg, size=wanted.shape)
    wanted = np.where(locks, angles, wanted)
    clipped = np.clip(wanted, limits[:, 0], limits[:, 1])
    clamped = (clipped != wanted) & ~locks
    return replace(state, **{group: clipped}), clamped


# ----------------------------------------------------------------------
# search behavior
# ----------------------------------------------------------------------

_SCAN_YAWS = np.linspace(-60.0, 60.0, 7)
_SCAN_PITCHES = np.linspace(-45.0, 45.0, 7)


def scan_for_target(config: SimConfig, state: RobotState,
                    target: Target) -> tuple[RobotState, Percept | None]:
    """Sweep the head over a fixed pose grid until the target shows up.

    Checks the current pose first (zero moves when already in view), then
    visits grid poses ordered by distance from the current pose. On failure
    the original state is returned with None.
    """
    percept = perceive_target(config, state, target)
    if percept is not None:
        return state, percept
    here = state.head
    poses = [(float(y), float(p)) for y in _SCAN_YAWS for p in _SCAN_PITCHES]
    poses.sort(key=lambda yp: (np.hypot(yp[0] - here[0], yp[1] - here[1]), yp))
    for yaw, pitch in poses:
        candidate, _ = apply_motor(state, np.array([yaw, pitch]), "head", mode="absolute")
        percept = perceive_target(config, candidate, target)
        if percept is not None:
            return candidate, percept
    return state, None
