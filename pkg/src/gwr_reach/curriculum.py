"""Three-stage visuomotor curriculum plus continual adaptation.

Stage 1 trains a gaze model (centroid map + corrective head-delta map,
associated Hebbian-wise). Stage 2 trains an arm model (hand-position map +
arm-pose map). Stage 3 transfers the arm maps onto eye-hand triplets, trains
a fresh absolute-head-pose map, and associates head pose with hand position;
composing the pieces in reverse realizes reaching. Adaptation continues
training on damaged-robot triplets while the original models are preserved
for comparison.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from gwr_reach import robot as rb
from gwr_reach.datasets import (CENTER_TOL_PX, MAX_CENTER_STEPS, SensorimotorDataset,
                                center_on_target)
from gwr_reach.gwr import GwrNetwork, GwrParams
from gwr_reach.hebbian import AssociationTable, NoAssociationError, build_associations, recall

GRASP_TOL_CM = 3.0

# per-map growth thresholds; shared rates come from the training-parameter table
STAGE_PARAMS = {
    "gaze_sensory": GwrParams(a_t=0.5, h_t=0.7, max_neurons=6000),
    "gaze_motor": GwrParams(a_t=0.9, h_t=0.3, max_neurons=6000),
    "arm_sensory": GwrParams(a_t=0.5, h_t=0.7, max_neurons=6000),
    "arm_motor": GwrParams(a_t=0.1, h_t=0.5, max_neurons=6000),
    "eyehand_head": GwrParams(a_t=0.5, h_t=0.9, max_neurons=1000),
}


def derive_seed(master: int, label: str) -> int:
    """Stable per-role child seed from a master seed."""
    digest = hashlib.sha256(f"{master}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass
class StageModel:
    """Sensory map, motor map, and the cross-map table for one stage."""

    stage: str
    sensory: GwrNetwork
    motor: GwrNetwork
    table: AssociationTable
    provenance: dict = field(default_factory=dict)

    def save(self, bundle_dir) -> None:
        bundle = Path(bundle_dir)
        bundle.mkdir(parents=True, exist_ok=True)
        self.sensory.save(bundle / "sensory.gwr")
        self.motor.save(bundle / "motor.gwr")
        self.table.save(bundle / "association.tbl")
        with open(bundle / "provenance.json", "w") as fh:
            json.dump(self.provenance, fh, indent=2, sort_keys=True)
            fh.write("\n")
        self._write_weight_csv(bundle)

    def _write_weight_csv(self, bundle: Path) -> None:
        # flat metrics files so plots never need to parse binary bundles
        for name, net in (("sensory", self.sensory), ("motor", self.motor)):
            ids = net.live_ids()
            with open(bundle / f"weights_{name}.csv", "w") as fh:
                cols = ",".join(f"w{k}" for k in range(net.input_dim))
                fh.write(f"id,{cols}\n")
                for i in ids:
                    vals = ",".join(repr(float(v)) for v in net.weight(int(i)))
                    fh.write(f"{i},{vals}\n")

    @classmethod
    def load(cls, bundle_dir) -> "StageModel":
        bundle = Path(bundle_dir)
        if not (bundle / "provenance.json").exists():
            raise FileNotFoundError(f"missing model bundle at {bundle}")
        with open(bundle / "provenance.json") as fh:
            provenance = json.load(fh)
        return cls(
            stage=provenance["stage"],
            sensory=GwrNetwork.load(bundle / "sensory.gwr"),
            motor=GwrNetwork.load(bundle / "motor.gwr"),
            table=AssociationTable.load(bundle / "association.tbl"),
            provenance=provenance,
        )


def _distinct_seed_rows(data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    first = data[0]
    for row in data[1:]:
        if not np.array_equal(row, first):
            return first, row
    raise ValueError("dataset has no two distinct samples")


def _train_net(data: np.ndarray, params: GwrParams, seed: int) -> tuple[GwrNetwork, list[float]]:
    a, b = _distinct_seed_rows(data)
    net = GwrNetwork(data.shape[1], params, seed, [a, b])
    trace = net.train(data)
    return net, trace


def _provenance(stage: str, seed: int, datasets: dict[str, SensorimotorDataset],
                nets: dict[str, GwrNetwork], table: AssociationTable,
                extra: dict | None = None) -> dict:
    info = {
        "stage": stage,
        "seed": seed,
        "datasets": {name: {"digest": ds.digest(), "count": len(ds), "seed": ds.seed}
                     for name, ds in datasets.items()},
        "neurons": {name: net.n_neurons for name, net in nets.items()},
        "edges": {name: net.n_edges for name, net in nets.items()},
        "connected": dict(zip(("sensory", "motor"), table.connected_counts())),
        "entries": len(table.weights),
    }
    if extra:
        info.update(extra)
    return info


# ----------------------------------------------------------------------
# stage training
# ----------------------------------------------------------------------

def train_gaze(dataset: SensorimotorDataset, seed: int = 0) -> StageModel:
    """Gaze stage: centroid map, corrective-delta map, and their associations."""
    if len(dataset) == 0:
        raise ValueError("gaze dataset is empty")
    s = dataset.column("s_head")
    m = dataset.column("m_delta_head_inv")
    sensory, s_trace = _train_net(s, STAGE_PARAMS["gaze_sensory"], derive_seed(seed, "gaze_sensory"))
    motor, m_trace = _train_net(m, STAGE_PARAMS["gaze_motor"], derive_seed(seed, "gaze_motor"))
    table = build_associations(sensory, motor, zip(s, m), names=("gaze_sensory", "gaze_motor"))
    prov = _provenance("gaze", seed, {"gaze": dataset}, {"sensory": sensory, "motor": motor},
                       table, {"qe_trace": {"sensory": s_trace, "motor": m_trace}})
    return StageModel("gaze", sensory, motor, table, prov)


def train_arm(dataset: SensorimotorDataset, seed: int = 0) -> StageModel:
    """Arm stage: hand-position map, arm-pose map, and their associations."""
    if len(dataset) == 0:
        raise ValueError("arm dataset is empty")
    s = dataset.column("s_arm")
    m = dataset.column("m_arm")
    sensory, s_trace = _train_net(s, STAGE_PARAMS["arm_sensory"], derive_seed(seed, "arm_sensory"))
    motor, m_trace = _train_net(m, STAGE_PARAMS["arm_motor"], derive_seed(seed, "arm_motor"))
    table = build_associations(sensory, motor, zip(s, m), names=("arm_sensory", "arm_motor"))
    prov = _provenance("arm", seed, {"arm": dataset}, {"sensory": sensory, "motor": motor},
                       table, {"qe_trace": {"sensory": s_trace, "motor": m_trace}})
    return StageModel("arm", sensory, motor, table, prov)


def train_eyehand(triplets: SensorimotorDataset, arm_model: StageModel,
                  arm_dataset: SensorimotorDataset, seed: int = 0) -> tuple[StageModel, StageModel]:
    """Eye-hand stage via transfer learning on the arm maps.

    Continues training the arm model's two maps on the triplet fields, trains
    a fresh absolute-head-pose map, associates head pose with hand position,
    and rebuilds the arm association table (against the transferred maps)
    from the retained arm dataset plus the triplets. Inputs are not mutated;
    returns (eye-hand model, transferred arm model). The returned models
    share the hand-position map.
    """
    if len(triplets) == 0:
        raise ValueError("eye-hand triplet set is empty")
    if arm_model.stage != "arm":
        raise ValueError(f"expected an arm model, got stage {arm_model.stage!r}")
    s_arm = triplets.column("s_arm")
    m_arm = triplets.column("m_arm")
    m_head = triplets.column("m_head")

    cartesian = arm_model.sensory.copy()
    arm_motor = arm_model.motor.copy()
    cart_trace = cartesian.train(s_arm)
    motor_trace = arm_motor.train(m_arm)

    head, head_trace = _train_net(m_head, STAGE_PARAMS["eyehand_head"], derive_seed(seed, "eyehand_head"))

    pairs_s = np.concatenate([arm_dataset.column("s_arm"), s_arm])
    pairs_m = np.concatenate([arm_dataset.column("m_arm"), m_arm])
    arm_table = build_associations(cartesian, arm_motor, zip(pairs_s, pairs_m),
                                   names=("arm_sensory", "arm_motor"))
    eh_table = build_associations(cartesian, head, zip(s_arm, m_head),
                                  names=("arm_sensory", "eyehand_head"))

    arm_prov = _provenance("arm", seed, {"arm": arm_dataset, "eyehand": triplets},
                           {"sensory": cartesian, "motor": arm_motor}, arm_table,
                           {"transfer": True,
                            "qe_trace": {"sensory": cart_trace, "motor": motor_trace}})
    new_arm = StageModel("arm", cartesian, arm_motor, arm_table, arm_prov)
    eh_prov = _provenance("eyehand", seed, {"eyehand": triplets},
                          {"sensory": cartesian, "motor": head}, eh_table,
                          {"qe_trace": {"head": head_trace}})
    eyehand = StageModel("eyehand", cartesian, head, eh_table, eh_prov)
    return eyehand, new_arm


# ----------------------------------------------------------------------
# behaviors
# ----------------------------------------------------------------------

class GazeModelController:
    """Recall-driven corrective head deltas; None when the map has no answer."""

    def __init__(self, model: StageModel):
        if model.stage != "gaze":
            raise ValueError(f"expected a gaze model, got stage {model.stage!r}")
        self.model = model

    def __call__(self, percept: rb.Percept) -> np.ndarray | None:
        try:
            return recall(self.model.table, self.model.sensory, self.model.motor,
                          np.array([percept.u, percept.v]))
        except NoAssociationError:
            return None


def gaze_control(config: rb.SimConfig, model: StageModel, state: rb.RobotState,
                 target: rb.Target, tol_px: float = CENTER_TOL_PX,
                 max_steps: int = MAX_CENTER_STEPS) -> tuple[rb.RobotState, float, bool]:
    """Iteratively center a target with the learned gaze model.

    Returns (state, final pixel error, centered flag); infinite error means
    the target was never seen.
    """
    return center_on_target(config, state, target, GazeModelController(model),
                            tol_px=tol_px, max_steps=max_steps)


@dataclass(frozen=True)
class ReachOutcome:
    """Result of one reach attempt."""

    grasp: np.ndarray | None
    error_cm: float
    success: bool
    reason: str | None  # None on success; else missed / not-found / not-centered / no-association
    gaze_px_error: float
    state: rb.RobotState


def reach(config: rb.SimConfig, gaze_model: StageModel, eyehand_model: StageModel,
          arm_model: StageModel, state: rb.RobotState, target: rb.Target) -> ReachOutcome:
    """Center the target, then recall hand position and arm pose, then move.

    Success means the grasp point ends within 3 cm of the target center.
    """
    def fail(reason, st, px):
        g = rb.grasp_point(config, st.arm)
        return ReachOutcome(grasp=g, error_cm=float(np.linalg.norm(g - target.position)),
                            success=False, reason=reason, gaze_px_error=px, state=st)

    state, px_err, centered = gaze_control(config, gaze_model, state, target)
    if not centered:
        return fail("not-found" if np.isinf(px_err) else "not-centered", state, px_err)
    try:
        hand_hypothesis = recall(eyehand_model.table, eyehand_model.motor,
                                 eyehand_model.sensory, state.head, from_side="b")
        arm_pose = recall(arm_model.table, arm_model.sensory, arm_model.motor,
                          hand_hypothesis, from_side="a")
    except NoAssociationError:
        return fail("no-association", state, px_err)
    state, _ = rb.apply_motor(state, arm_pose, "arm", mode="absolute")
    grasp = rb.grasp_point(config, state.arm)
    error = float(np.linalg.norm(grasp - target.position))
    success = error <= GRASP_TOL_CM
    return ReachOutcome(grasp=grasp, error_cm=error, success=success,
                        reason=None if success else "missed",
                        gaze_px_error=px_err, state=state)


# ----------------------------------------------------------------------
# adaptation
# ----------------------------------------------------------------------

def adapt(eyehand_model: StageModel, arm_model: StageModel,
          env_triplets: SensorimotorDataset, seed: int = 0) -> tuple[StageModel, StageModel]:
    """Continue training on damaged-robot triplets; originals stay untouched.

    The maps keep everything they learned and keep growing/adapting on the
    new data; association tables drop entries whose endpoints were pruned,
    then continue strengthening on the new triplets.
    """
    if len(env_triplets) == 0:
        raise ValueError("adaptation dataset is empty")
    if eyehand_model.sensory.n_neurons != arm_model.sensory.n_neurons or \
            eyehand_model.sensory.next_id != arm_model.sensory.next_id:
        raise ValueError("eye-hand and arm models do not share a hand-position map")
    s_arm = env_triplets.column("s_arm")
    m_arm = env_triplets.column("m_arm")
    m_head = env_triplets.column("m_head")

    cartesian = eyehand_model.sensory.copy()
    arm_motor = arm_model.motor.copy()
    head = eyehand_model.motor.copy()
    cartesian.train(s_arm)
    arm_motor.train(m_arm)
    head.train(m_head)

    arm_table = arm_model.table.copy()
    eh_table = eyehand_model.table.copy()
    arm_table.drop_dead_entries(cartesian, arm_motor)
    eh_table.drop_dead_entries(cartesian, head)
    build_associations(cartesian, arm_motor, zip(s_arm, m_arm), table=arm_table)
    build_associations(cartesian, head, zip(s_arm, m_head), table=eh_table)

    arm_prov = _provenance("arm", seed, {"envchange": env_triplets},
                           {"sensory": cartesian, "motor": arm_motor}, arm_table,
                           {"adapted": True})
    eh_prov = _provenance("eyehand", seed, {"envchange": env_triplets},
                          {"sensory": cartesian, "motor": head}, eh_table,
                          {"adapted": True})
    return (StageModel("eyehand", cartesian, head, eh_table, eh_prov),
            StageModel("arm", cartesian, arm_motor, arm_table, arm_prov))
