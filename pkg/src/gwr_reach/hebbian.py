"""Hebbian cross-map associations between two trained GWR networks.

The table stores sparse nonnegative weights on (neuron id, neuron id) pairs,
one id per side. A build pass walks paired training samples, finds the BMU in
each map, and strengthens that pair in proportion to the product of the two
BMU activities. Recall maps an input on one side to the weight vector of the
most strongly co-activated neuron on the other side. Weights are undirected:
recall works from either side.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from gwr_reach.gwr import GwrNetwork

DEFAULT_ALPHA = 0.5


class NoAssociationError(LookupError):
    """The queried BMU has no cross-map connections; the caller decides the fallback."""


@dataclass
class AssociationTable:
    """Sparse Hebbian weights linking neuron ids of two networks.

    Side capacities are the id capacity (``next_id``) of each network at
    construction; every stored index must stay below them. Absent pairs mean
    weight zero; stored weights are strictly positive.
    """

    name_a: str
    name_b: str
    n_a: int
    n_b: int
    alpha: float = DEFAULT_ALPHA
    weights: dict[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        self._reindex()

    def _reindex(self) -> None:
        # per-side adjacency mirrors of `weights`, kept so recall stays O(row)
        self._by_a: dict[int, dict[int, float]] = {}
        self._by_b: dict[int, dict[int, float]] = {}
        for (a, b), w in self.weights.items():
            self._by_a.setdefault(a, {})[b] = w
            self._by_b.setdefault(b, {})[a] = w

    def strengthen(self, a: int, b: int, act_a: float, act_b: float) -> None:
        """Add alpha * act_a * act_b to the (a, b) weight.

        Activities must lie in (0, 1]; indices must be within the side
        capacities recorded at construction.
        """
        if not (0 <= a < self.n_a and 0 <= b < self.n_b):
            raise IndexError(f"pair ({a}, {b}) outside table sides ({self.n_a}, {self.n_b})")
        if not (0.0 < act_a <= 1.0 and 0.0 < act_b <= 1.0):
            raise ValueError(f"activities must be in (0, 1], got {act_a}, {act_b}")
        w = self.weights.get((a, b), 0.0) + self.alpha * act_a * act_b
        self.weights[(a, b)] = w
        self._by_a.setdefault(a, {})[b] = w
        self._by_b.setdefault(b, {})[a] = w

    def row_a(self, a: int) -> dict[int, float]:
        """All partners of side-a neuron a with their weights."""
        return dict(self._by_a.get(a, {}))

    def row_b(self, b: int) -> dict[int, float]:
        return dict(self._by_b.get(b, {}))

    def strongest_partner(self, index: int, side: str = "a") -> int:
        """Other-side neuron with the largest weight; ties go to the lowest id."""
        row = self._by_a.get(index, {}) if side == "a" else self._by_b.get(index, {})
        if not row:
            raise NoAssociationError(f"neuron {index} on side {side!r} has no associations")
        return min(row, key=lambda k: (-row[k], k))

    def connected_counts(self) -> tuple[int, int]:
        """Number of distinct ids on each side that have at least one connection."""
        return (len({a for a, _ in self.weights}), len({b for _, b in self.weights}))

    def copy(self) -> "AssociationTable":
        return AssociationTable(name_a=self.name_a, name_b=self.name_b,
                                n_a=self.n_a, n_b=self.n_b, alpha=self.alpha,
                                weights=dict(self.weights))

    def drop_dead_entries(self, net_a: GwrNetwork, net_b: GwrNetwork) -> int:
        """Remove entries whose endpoint neuron no longer exists; returns count removed."""
        dead = [k for k in self.weights if not (net_a.is_live(k[0]) and net_b.is_live(k[1]))]
        for k in dead:
            del self.weights[k]
        if dead:
            self._reindex()
        return len(dead)

    # ------------------------------------------------------------------
    # serialization: header + triplet records, bit-exact round trip
    # ------------------------------------------------------------------

    _MAGIC = b"ASSOC001"

    def save(self, path) -> None:
        name_a = self.name_a.encode("utf-8")
        name_b = self.name_b.encode("utf-8")
        keys = sorted(self.weights)
        with open(path, "wb") as fh:
            fh.write(self._MAGIC)
            fh.write(np.array([len(name_a), len(name_b), self.n_a, self.n_b, len(keys)],
                              dtype=np.int64).tobytes())
            fh.write(np.array([self.alpha], dtype=np.float64).tobytes())
            fh.write(name_a)
            fh.write(name_b)
            fh.write(np.array(keys, dtype=np.int64).tobytes())
            fh.write(np.array([self.weights[k] for k in keys], dtype=np.float64).tobytes())

    @classmethod
    def load(cls, path) -> "AssociationTable":
        with open(path, "rb") as fh:
            if fh.read(len(cls._MAGIC)) != cls._MAGIC:
                raise ValueError("not an association table file")
            la, lb, n_a, n_b, n = (int(v) for v in np.frombuffer(fh.read(5 * 8), dtype=np.int64))
            alpha = float(np.frombuffer(fh.read(8), dtype=np.float64)[0])
            name_a = fh.read(la).decode("utf-8")
            name_b = fh.read(lb).decode("utf-8")
            keys = np.frombuffer(fh.read(8 * 2 * n), dtype=np.int64).reshape(n, 2)
            vals = np.frombuffer(fh.read(8 * n), dtype=np.float64)
        weights = {(int(i), int(j)): float(w) for (i, j), w in zip(keys, vals)}
        return cls(name_a=name_a, name_b=name_b, n_a=n_a, n_b=n_b, alpha=alpha, weights=weights)


def build_associations(net_a: GwrNetwork, net_b: GwrNetwork,
                       pairs: Iterable[tuple[np.ndarray, np.ndarray]],
                       alpha: float = DEFAULT_ALPHA,
                       names: tuple[str, str] = ("a", "b"),
                       table: AssociationTable | None = None) -> AssociationTable:
    """One pass over paired samples, strengthening the BMU pair per sample.

    For each (xa, xb) pair the BMU is found in each network, its activity
    exp(-distance) computed, and the pair weight increased by
    alpha * act_a * act_b. Neither network is mutated. Pass an existing
    ``table`` to continue strengthening it in place (its alpha is kept).

    Raises:
        ValueError: Empty pair sequence or dimension mismatch.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("cannot build associations from an empty pair sequence")
    if table is None:
        table = AssociationTable(name_a=names[0], name_b=names[1],
                                 n_a=net_a.next_id, n_b=net_b.next_id, alpha=alpha)
    else:
        table.n_a = max(table.n_a, net_a.next_id)
        table.n_b = max(table.n_b, net_b.next_id)
    for xa, xb in pairs:
        a, act_a = net_a.query_nearest(xa)
        b, act_b = net_b.query_nearest(xb)
        table.strengthen(a, b, act_a, act_b)
    return table


def recall(table: AssociationTable, net_from: GwrNetwork, net_to: GwrNetwork,
           x: np.ndarray, from_side: str = "a") -> np.ndarray:
    """Map an input on one side to the other side's most co-activated weight vector.

    Finds the BMU of x in ``net_from``, takes the argmax of that neuron's
    stored association weights (ties to the lowest id), and returns the weight
    vector of the winning neuron in ``net_to``.

    Raises:
        NoAssociationError: The BMU has no stored connections.
    """
    if from_side not in ("a", "b"):
        raise ValueError(f"from_side must be 'a' or 'b', got {from_side!r}")
    bmu, _ = net_from.query_nearest(x)
    partner = table.strongest_partner(bmu, side=from_side)
    return net_to.weight(partner)
