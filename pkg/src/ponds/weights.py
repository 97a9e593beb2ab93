"""Edge weight fields: the shared randomness behind invasion and Bernoulli views.

A pseudorandom field maps a 64-bit seed and a canonical edge id to a
Uniform[0,1) weight through a counter-based hash (splitmix-style avalanche),
so any edge's weight is computable on demand, bit-identically, from any worker.
An explicit field is a plain id-to-weight table for fixtures and oracles.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k
from .lattice import Edge, edge_between, edge_id


class MissingWeightError(KeyError):
    """An explicit field was asked for an edge it does not contain."""


@dataclass(frozen=True)
class WeightField:
    """Deterministic edge-weight source; immutable, safe to share across workers."""

    mode: str                      # "pseudorandom" | "explicit"
    seed: int = 0
    table: dict[int, float] = field(default_factory=dict)

    @classmethod
    def pseudorandom(cls, seed: int) -> "WeightField":
        return cls(mode="pseudorandom", seed=int(seed))

    @classmethod
    def explicit(cls, weights: dict) -> "WeightField":
        """Build from {Edge|eid|(u,v): weight}; all weights must lie in [0,1)."""
        table: dict[int, float] = {}
        for k, w in weights.items():
            if isinstance(k, Edge):
                eid = k.eid
            elif isinstance(k, tuple) and len(k) == 2 and isinstance(k[0], tuple):
                eid = edge_id(k[0], k[1])
            else:
                eid = int(k)
            w = float(w)
            if not 0.0 <= w < 1.0:
                raise ValueError(f"weight {w} outside [0,1)")
            table[eid] = w
        return cls(mode="explicit", table=table)

    @classmethod
    def from_json(cls, text: str) -> "WeightField":
        """Explicit table from {"edges": [{"u": [x,y], "v": [x,y], "tau": w}, ...]}."""
        doc = json.loads(text)
        table: dict[int, float] = {}
        for rec in doc["edges"]:
            u = (int(rec["u"][0]), int(rec["u"][1]))
            v = (int(rec["v"][0]), int(rec["v"][1]))
            eid = edge_id(u, v)
            w = float(rec["tau"])
            if not 0.0 <= w < 1.0:
                raise ValueError(f"weight {w} outside [0,1)")
            if eid in table and table[eid] != w:
                raise ValueError(f"conflicting weights for edge {u}-{v}")
            table[eid] = w
        return cls(mode="explicit", table=table)

    def weight_by_id(self, eid: int) -> float:
        if self.mode == "pseudorandom":
            return float(_k.edge_weight_from_seed(self.seed, eid))
        try:
            return self.table[eid]
        except KeyError:
            raise MissingWeightError(f"no explicit weight for edge id {eid}") from None

    def weight(self, e: Edge) -> float:
        return self.weight_by_id(e.eid)

    def weights_by_ids(self, eids: np.ndarray) -> np.ndarray:
        if self.mode == "pseudorandom":
            return _k.edge_weights_from_seed_bulk(self.seed, np.asarray(eids, np.int64))
        return np.array([self.weight_by_id(int(e)) for e in eids])


def weight(f: WeightField, e: Edge) -> float:
    return f.weight(e)


def is_p_open(f: WeightField, e: Edge, p: float) -> bool:
    """An edge is p-open when its weight is strictly below p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p = {p} outside [0,1]")
    return f.weight(e) < p


def derive_seed(master: int, *indices: int) -> int:
    """Derived 63-bit stream seed; pure function of (master, indices).

    Used for per-sample and per-component streams so parallel workers draw
    reproducible, non-overlapping randomness.
    """
    s = int(master)
    for i in indices:
        s = int(_k.child_seed(s, int(i)))
    return s


def sample_field(master: int, index: int) -> WeightField:
    """Field for sample `index` of the stream rooted at `master`."""
    return WeightField.pseudorandom(derive_seed(master, index))
