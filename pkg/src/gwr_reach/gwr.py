"""Grow-when-required (GWR) network: online topology-learning vector quantization.

A GWR network keeps a growing set of neurons, each with a weight vector and a
habituation counter in [0, 1], plus aged lateral edges between neurons that
won together. A new neuron is inserted whenever the best matching unit (BMU)
both matches the input poorly (low activity) and is already well trained
(low habituation). Neuron ids are stable for the lifetime of a network and
never reused, so external structures keyed by id (e.g. cross-map association
tables) stay valid across growth and pruning.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

_HABIT_OVERSHOOT = 1.05  # habituation drive; fixed point h* = 1 - 1/1.05


@dataclass(frozen=True)
class GwrParams:
    """Hyperparameters governing growth and adaptation of one network.

    Attributes:
        epochs: Full passes over the dataset per training call.
        max_age: Edges older than this are pruned at the end of a step.
        max_neurons: Hard cap on live neuron count; at the cap, insertion is
            suppressed and the step falls through to weight adaptation.
        eps_b: BMU learning rate, 0 < eps_n < eps_b < 1.
        eps_n: Neighbor learning rate.
        tau_b: BMU habituation rate, tau_n < tau_b.
        tau_n: Neighbor habituation rate.
        a_t: Activity threshold in (0, 0.9]; insertion requires activity below it.
        h_t: Habituation threshold in (0, 0.9]; insertion requires BMU
            habituation below it.
    """

    epochs: int = 40
    max_age: int = 5
    max_neurons: int = 6000
    eps_b: float = 0.5
    eps_n: float = 0.01
    tau_b: float = 0.3
    tau_n: float = 0.1
    a_t: float = 0.5
    h_t: float = 0.7

    def __post_init__(self):
        if not (0.0 < self.eps_n < self.eps_b < 1.0):
            raise ValueError(f"need 0 < eps_n < eps_b < 1, got eps_n={self.eps_n}, eps_b={self.eps_b}")
        if not self.tau_n < self.tau_b:
            raise ValueError(f"need tau_n < tau_b, got tau_n={self.tau_n}, tau_b={self.tau_b}")
        if not (0.0 < self.a_t <= 0.9):
            raise ValueError(f"a_t must be in (0, 0.9], got {self.a_t}")
        if not (0.0 < self.h_t <= 0.9):
            raise ValueError(f"h_t must be in (0, 0.9], got {self.h_t}")
        if self.epochs < 1 or self.max_age < 0 or self.max_neurons < 2:
            raise ValueError("epochs >= 1, max_age >= 0, max_neurons >= 2 required")


def habituation_fixed_point() -> float:
    """Habituation value that maps to itself under the update rule."""
    return 1.0 - 1.0 / _HABIT_OVERSHOOT


@dataclass
class StepReport:
    """What a single training step did."""

    bmu: int
    second: int
    bmu_distance: float
    inserted: bool
    new_id: int | None = None


class NoSuchNeuronError(KeyError):
    """Raised when an operation addresses a dead or never-allocated neuron id."""


class GwrNetwork:
    """One growing network hosting a single modality.

    Weights, habituation and liveness are stored in flat arrays indexed by
    neuron id; dead ids keep their slots (weights masked out of BMU searches)
    so ids stay stable. Edges live in a symmetric adjacency dict id -> {id: age}.
    """

    def __init__(self, input_dim: int, params: GwrParams, seed: int,
                 init_samples: Sequence[np.ndarray]):
        """Create a 2-neuron network seeded with two distinct samples.

        Args:
            input_dim: Dimension d of every input vector.
            params: Growth/adaptation hyperparameters.
            seed: Seed for the per-epoch shuffle RNG.
            init_samples: Exactly two distinct d-dimensional vectors used as
                the initial neuron weights.

        Raises:
            ValueError: On dimension mismatch or identical init samples (a
                BMU/second-BMU tie at birth).
        """
        if len(init_samples) != 2:
            raise ValueError(f"need exactly 2 init samples, got {len(init_samples)}")
        a = np.asarray(init_samples[0], dtype=np.float64)
        b = np.asarray(init_samples[1], dtype=np.float64)
        if a.shape != (input_dim,) or b.shape != (input_dim,):
            raise ValueError(f"init samples must have dimension {input_dim}, got shapes {a.shape}, {b.shape}")
        if np.array_equal(a, b):
            raise ValueError("init samples are identical; BMU and second BMU would tie at birth")
        self.input_dim = input_dim
        self.params = params
        self.rng_seed = int(seed)
        self._rng = np.random.default_rng(self.rng_seed)
        cap = 16
        self._weights = np.zeros((cap, input_dim), dtype=np.float64)
        self._habit = np.zeros(cap, dtype=np.float64)
        self._alive = np.zeros(cap, dtype=bool)
        self.next_id = 0
        self._adj: dict[int, dict[int, int]] = {}
        self._alloc(a)
        self._alloc(b)

    # ------------------------------------------------------------------
    # storage
    # ------------------------------------------------------------------

    def _alloc(self, weight: np.ndarray) -> int:
        i = self.next_id
        if i == self._weights.shape[0]:
            grow = self._weights.shape[0]
            self._weights = np.concatenate([self._weights, np.zeros((grow, self.input_dim))])
            self._habit = np.concatenate([self._habit, np.zeros(grow)])
            self._alive = np.concatenate([self._alive, np.zeros(grow, dtype=bool)])
        self._weights[i] = weight
        self._habit[i] = 1.0
        self._alive[i] = True
        self._adj[i] = {}
        self.next_id += 1
        return i

    def _kill(self, i: int) -> None:
        self._alive[i] = False
        self._habit[i] = 0.0
        del self._adj[i]

    @property
    def n_neurons(self) -> int:
        return int(self._alive[: self.next_id].sum())

    @property
    def n_edges(self) -> int:
        return sum(len(nbrs) for nbrs in self._adj.values()) // 2

    def live_ids(self) -> np.ndarray:
        return np.nonzero(self._alive[: self.next_id])[0]

    def is_live(self, i: int) -> bool:
        return 0 <= i < self.next_id and bool(self._alive[i])

    def weight(self, i: int) -> np.ndarray:
        """Weight vector of live neuron i (a copy)."""
        self._check_live(i)
        return self._weights[i].copy()

    def habituation(self, i: int) -> float:
        self._check_live(i)
        return float(self._habit[i])

    def neighbors(self, i: int) -> list[int]:
        self._check_live(i)
        return list(self._adj[i])

    def edge_list(self) -> list[tuple[int, int, int]]:
        """All edges as sorted (i, j, age) triples with i < j."""
        out = []
        for i, nbrs in self._adj.items():
            for j, age in nbrs.items():
                if i < j:
                    out.append((i, j, age))
        out.sort()
        return out

    def _check_live(self, i: int) -> None:
        if not self.is_live(i):
            raise NoSuchNeuronError(f"neuron {i} is not live")

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.input_dim,):
            raise ValueError(f"input has shape {x.shape}, expected ({self.input_dim},)")
        return x

    # ------------------------------------------------------------------
    # queries
    # ------------------------------------------------------------------

    def _sq_dists(self, x: np.ndarray) -> np.ndarray:
        diff = self._weights[: self.next_id] - x
        d2 = np.einsum("ij,ij->i", diff, diff)
        d2[~self._alive[: self.next_id]] = np.inf
        return d2

    def find_bmus(self, x: np.ndarray) -> tuple[int, int]:
        """Best and second-best matching unit for x; ties go to the lowest id."""
        if self.n_neurons < 2:
            raise ValueError("find_bmus needs at least 2 live neurons")
        x = self._check_input(x)
        d2 = self._sq_dists(x)
        b = int(np.argmin(d2))
        d2[b] = np.inf
        s = int(np.argmin(d2))
        return b, s

    def activity(self, b: int, x: np.ndarray) -> float:
        """Match quality exp(-||x - w_b||), in (0, 1]."""
        self._check_live(b)
        x = self._check_input(x)
        return float(np.exp(-np.linalg.norm(x - self._weights[b])))

    def query_nearest(self, x: np.ndarray) -> tuple[int, float]:
        """Nearest live neuron to x and its activity."""
        if self.n_neurons == 0:
            raise ValueError("query_nearest on an empty network")
        x = self._check_input(x)
        d2 = self._sq_dists(x)
        b = int(np.argmin(d2))
        return b, float(np.exp(-np.sqrt(d2[b])))

    def quantization_error(self, data: np.ndarray) -> float:
        """Mean BMU distance over rows of data (no mutation)."""
        data = np.asarray(data, dtype=np.float64)
        total = 0.0
        for x in data:
            d2 = self._sq_dists(self._check_input(x))
            total += np.sqrt(d2.min())
        return total / len(data)

    # ------------------------------------------------------------------
    # learning
    # ------------------------------------------------------------------

    def habituate(self, b: int) -> None:
        """Decay habituation of b (rate tau_b) and of its edge-neighbors (tau_n).

        The update h += tau * (1.05 * (1 - h) - 1) has fixed point
        h* = 1 - 1/1.05 ~= 0.0476; results are clamped to [0, 1].
        """
        self._check_live(b)
        p = self.params
        self._habituate_one(b, p.tau_b)
        for n in self._adj[b]:
            self._habituate_one(n, p.tau_n)

    def _habituate_one(self, i: int, tau: float) -> None:
        h = self._habit[i]
        h = h + tau * (_HABIT_OVERSHOOT * (1.0 - h) - 1.0)
        self._habit[i] = min(1.0, max(0.0, h))

    def train_step(self, x: np.ndarray) -> StepReport:
        """One online step: match, maybe grow, else adapt; then age and prune.

        Order of operations:
          1. find BMU b and second BMU s; create edge (b, s) or reset its age.
          2. activity a_b = exp(-||x - w_b||).
          3. if a_b < a_t and h_b < h_t and the network is below the neuron
             cap: insert a new neuron at the midpoint of w_b and x with
             habituation 1, wire it to b and s, drop edge (b, s), and skip
             adaptation for this sample.
          4. otherwise move b by eps_b*h_b*(x - w_b) and each neighbor n by
             eps_n*h_n*(x - w_n), then habituate b and its neighbors.
          5. age every edge incident to b except (b, s); prune edges older
             than max_age and any neuron this isolates.
        """
        x = self._check_input(x)
        p = self.params
        b, s = self.find_bmus(x)
        self._adj[b][s] = 0  # create the (b, s) edge, or reset its age
        self._adj[s][b] = 0
        dist = float(np.linalg.norm(x - self._weights[b]))
        a_b = float(np.exp(-dist))
        inserted = a_b < p.a_t and self._habit[b] < p.h_t and self.n_neurons < p.max_neurons
        new_id = None
        if inserted:
            new_id = self._alloc((self._weights[b] + x) / 2.0)
            self._adj[new_id][b] = 0
            self._adj[b][new_id] = 0
            self._adj[new_id][s] = 0
            self._adj[s][new_id] = 0
            del self._adj[b][s]
            del self._adj[s][b]
        else:
            self._weights[b] += p.eps_b * self._habit[b] * (x - self._weights[b])
            for n in self._adj[b]:
                self._weights[n] += p.eps_n * self._habit[n] * (x - self._weights[n])
            self.habituate(b)
        # age all edges at b except the just-refreshed (b, s) pair
        stale: list[tuple[int, int]] = []
        for j in self._adj[b]:
            if j == s and not inserted:
                continue
            age = self._adj[b][j] + 1
            self._adj[b][j] = age
            self._adj[j][b] = age
            if age > p.max_age:
                stale.append((b, j))
        for i, j in stale:
            del self._adj[i][j]
            del self._adj[j][i]
        for i, j in stale:
            for k in (i, j):
                if k in self._adj and not self._adj[k]:
                    self._kill(k)
        return StepReport(bmu=b, second=s, bmu_distance=dist, inserted=inserted, new_id=new_id)

    def train(self, dataset: np.ndarray) -> list[float]:
        """Run params.epochs shuffled passes over dataset.

        Each epoch visits every row once in an order drawn from the network's
        seeded RNG. Returns the mean pre-update BMU distance per epoch.

        Raises:
            ValueError: Empty dataset or wrong row dimension.
        """
        data = np.asarray(dataset, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] == 0:
            raise ValueError("dataset must be a nonempty (n, d) array")
        if data.shape[1] != self.input_dim:
            raise ValueError(f"dataset rows have dimension {data.shape[1]}, expected {self.input_dim}")
        trace = []
        for _ in range(self.params.epochs):
            order = self._rng.permutation(len(data))
            total = 0.0
            for idx in order:
                total += self.train_step(data[idx]).bmu_distance
            trace.append(total / len(data))
        return trace

    # ------------------------------------------------------------------
    # serialization: versioned flat binary, bit-exact round trip
    # ------------------------------------------------------------------

    _MAGIC = b"GWRNET01"

    def save(self, path) -> None:
        """Write the network to a flat binary file (bit-exact round trip)."""
        ids = self.live_ids()
        edges = self.edge_list()
        p = self.params
        header = np.array(
            [self.input_dim, self.rng_seed, self.next_id, len(ids), len(edges),
             p.epochs, p.max_age, p.max_neurons],
            dtype=np.int64,
        )
        fparams = np.array([p.eps_b, p.eps_n, p.tau_b, p.tau_n, p.a_t, p.h_t], dtype=np.float64)
        with open(path, "wb") as fh:
            fh.write(self._MAGIC)
            fh.write(header.tobytes())
            fh.write(fparams.tobytes())
            fh.write(ids.astype(np.int64).tobytes())
            fh.write(self._weights[ids].tobytes())
            fh.write(self._habit[ids].tobytes())
            fh.write(np.array(edges, dtype=np.int64).tobytes())

    @classmethod
    def load(cls, path) -> "GwrNetwork":
        with open(path, "rb") as fh:
            magic = fh.read(len(cls._MAGIC))
            if magic != cls._MAGIC:
                raise ValueError(f"not a network file: bad magic {magic!r}")
            header = np.frombuffer(fh.read(8 * 8), dtype=np.int64)
            d, seed, next_id, n_alive, n_edges, epochs, max_age, max_neurons = (int(v) for v in header)
            eps_b, eps_n, tau_b, tau_n, a_t, h_t = np.frombuffer(fh.read(6 * 8), dtype=np.float64)
            ids = np.frombuffer(fh.read(8 * n_alive), dtype=np.int64)
            weights = np.frombuffer(fh.read(8 * n_alive * d), dtype=np.float64).reshape(n_alive, d)
            habit = np.frombuffer(fh.read(8 * n_alive), dtype=np.float64)
            edges = np.frombuffer(fh.read(8 * 3 * n_edges), dtype=np.int64).reshape(n_edges, 3)
        params = GwrParams(epochs=epochs, max_age=max_age, max_neurons=max_neurons,
                           eps_b=float(eps_b), eps_n=float(eps_n), tau_b=float(tau_b),
                           tau_n=float(tau_n), a_t=float(a_t), h_t=float(h_t))
        return cls.from_state(d, params, seed, ids, weights, habit,
                              [(int(i), int(j), int(a)) for i, j, a in edges], next_id=next_id)

    @classmethod
    def from_state(cls, input_dim: int, params: GwrParams, seed: int,
                   ids: Iterable[int], weights: np.ndarray, habituations: np.ndarray,
                   edges: Iterable[tuple[int, int, int]] = (), next_id: int | None = None) -> "GwrNetwork":
        """Rebuild a network from explicit neuron/edge tables (deserialization core)."""
        ids = [int(i) for i in ids]
        weights = np.asarray(weights, dtype=np.float64).reshape(len(ids), input_dim)
        habituations = np.asarray(habituations, dtype=np.float64)
        net = cls.__new__(cls)
        net.input_dim = input_dim
        net.params = params
        net.rng_seed = int(seed)
        net._rng = np.random.default_rng(net.rng_seed)
        top = (max(ids) + 1) if ids else 0
        net.next_id = max(top, next_id if next_id is not None else 0)
        cap = max(16, net.next_id)
        net._weights = np.zeros((cap, input_dim), dtype=np.float64)
        net._habit = np.zeros(cap, dtype=np.float64)
        net._alive = np.zeros(cap, dtype=bool)
        net._adj = {}
        for i, w, h in zip(ids, weights, habituations):
            net._weights[i] = w
            net._habit[i] = h
            net._alive[i] = True
            net._adj[i] = {}
        for i, j, age in edges:
            if not (net.is_live(i) and net.is_live(j)):
                raise ValueError(f"edge ({i}, {j}) references a dead neuron")
            net._adj[i][j] = age
            net._adj[j][i] = age
        return net

    def copy(self) -> "GwrNetwork":
        """Deep copy sharing nothing; the RNG restarts from the stored seed."""
        ids = self.live_ids()
        return GwrNetwork.from_state(self.input_dim, self.params, self.rng_seed,
                                     ids, self._weights[ids], self._habit[ids],
                                     self.edge_list(), next_id=self.next_id)


def new_network(input_dim: int, params: GwrParams, seed: int,
                init_samples: Sequence[np.ndarray]) -> GwrNetwork:
    """Construct a fresh 2-neuron network (see GwrNetwork.__init__)."""
    return GwrNetwork(input_dim, params, seed, init_samples)
