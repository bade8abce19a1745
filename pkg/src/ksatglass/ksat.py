"""Random K-sat instances, their Hamiltonian, and exact ground states.

An instance holds ``m ~ Poisson(alpha * N)`` clauses. Clause ``j`` has ``K``
variable indices drawn uniformly from ``1..N`` with replacement and ``K``
symmetric random signs; it is unsatisfied exactly when every referenced spin
equals its sign. The Hamiltonian is minus the number of unsatisfied clauses.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import seeding
from ._kernels import ksat_gray, ksat_local_search
from .seeding import SeedLike

DEFAULT_LIMIT = 26
_INVERSION_MAX_MEAN = 30.0


class CapacityError(ValueError):
    """Raised when an exact enumeration would exceed its configured cap."""


@dataclass(frozen=True)
class Clause:
    indices: tuple[int, ...]
    signs: tuple[int, ...]

    def __post_init__(self):
        if len(self.indices) != len(self.signs):
            raise ValueError("indices and signs must have the same length")
        if any(s not in (-1, 1) for s in self.signs):
            raise ValueError("signs must be -1 or +1")
        if any(i < 1 for i in self.indices):
            raise ValueError("indices are 1-based")


@dataclass(frozen=True, eq=False)
class KSatInstance:
    """A realized draw of the K-sat disorder.

    ``indices`` and ``signs`` are read-only ``(m, K)`` integer arrays with
    1-based indices. Use :meth:`from_clauses` to build one by hand.
    """

    n: int
    k: int
    alpha: float
    indices: np.ndarray
    signs: np.ndarray
    seed: str | None = None

    def __post_init__(self):
        idx = np.array(self.indices, dtype=np.int64).reshape(-1, self.k)
        sg = np.array(self.signs, dtype=np.int8).reshape(-1, self.k)
        if idx.shape != sg.shape:
            raise ValueError("indices and signs must have matching shapes")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.k < 2:
            raise ValueError(f"k must be >= 2, got {self.k}")
        if idx.size and (idx.min() < 1 or idx.max() > self.n):
            raise ValueError(f"clause index out of range 1..{self.n}")
        if sg.size and not np.all(np.abs(sg) == 1):
            raise ValueError("signs must be -1 or +1")
        idx.flags.writeable = False
        sg.flags.writeable = False
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "signs", sg)

    @classmethod
    def from_clauses(cls, n: int, k: int, clauses: Iterable[Clause], alpha: float = 0.0,
                     seed: str | None = None) -> "KSatInstance":
        clauses = list(clauses)
        for c in clauses:
            if len(c.indices) != k:
                raise ValueError(f"clause {c} does not have {k} literals")
        idx = np.array([c.indices for c in clauses], dtype=np.int64).reshape(-1, k)
        sg = np.array([c.signs for c in clauses], dtype=np.int8).reshape(-1, k)
        return cls(n, k, alpha, idx, sg, seed)

    @property
    def m(self) -> int:
        return self.indices.shape[0]

    @property
    def clauses(self) -> list[Clause]:
        return [Clause(tuple(int(i) for i in row), tuple(int(s) for s in sgn))
                for row, sgn in zip(self.indices, self.signs)]

    @cached_property
    def canonical(self):
        """Clauses reduced to distinct variables and merged with multiplicity.

        A clause naming one variable with both signs can never be unsatisfied
        and is dropped. Returns ``(var_ptr, var_clause, var_req, size, weight)``
        in the compressed incidence layout used by the compiled kernels.
        """
        if self.n <= 62:
            keys, weight = self._merge_bitmask()
        else:
            keys, weight = self._merge_generic()
        size = np.array([len(key) for key in keys], dtype=np.int64)
        per_var: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        for c, key in enumerate(keys):
            for i, s in key:
                per_var[i].append((c, s))
        var_ptr = np.zeros(self.n + 1, dtype=np.int64)
        var_ptr[1:] = np.cumsum([len(v) for v in per_var])
        flat = [e for v in per_var for e in v]
        var_clause = np.array([c for c, _ in flat], dtype=np.int64)
        var_req = np.array([s for _, s in flat], dtype=np.int8)
        return var_ptr, var_clause, var_req, size, weight

    def _merge_bitmask(self):
        if self.m == 0:
            return [], np.zeros(0, dtype=np.int64)
        bits = np.left_shift(np.int64(1), self.indices - 1)
        pos = np.bitwise_or.reduce(np.where(self.signs > 0, bits, 0), axis=1)
        neg = np.bitwise_or.reduce(np.where(self.signs < 0, bits, 0), axis=1)
        keep = (pos & neg) == 0
        pairs, counts = np.unique(np.stack([pos[keep], neg[keep]], axis=1), axis=0, return_counts=True)
        keys = []
        for p, q in pairs.tolist():
            keys.append(tuple(sorted([(i, 1) for i in range(self.n) if p >> i & 1]
                                     + [(i, -1) for i in range(self.n) if q >> i & 1])))
        return keys, counts.astype(np.int64)

    def _merge_generic(self):
        merged: dict[tuple, int] = {}
        for row, sgn in zip(self.indices.tolist(), self.signs.tolist()):
            req: dict[int, int] = {}
            ok = True
            for i, s in zip(row, sgn):
                if req.setdefault(i - 1, s) != s:
                    ok = False
                    break
            if ok:
                key = tuple(sorted(req.items()))
                merged[key] = merged.get(key, 0) + 1
        return list(merged), np.array(list(merged.values()), dtype=np.int64)

    def to_json(self) -> str:
        return json.dumps({
            "n": self.n,
            "k": self.k,
            "alpha": self.alpha,
            "seed": self.seed,
            "clauses": [[row, sgn] for row, sgn in zip(self.indices.tolist(), self.signs.tolist())],
        })

    @classmethod
    def from_json(cls, text: str) -> "KSatInstance":
        data = json.loads(text)
        try:
            n, k = int(data["n"]), int(data["k"])
            alpha = float(data.get("alpha", 0.0))
            seed = data.get("seed")
            pairs = data["clauses"]
            idx = np.array([p[0] for p in pairs], dtype=np.int64).reshape(-1, k)
            sg = np.array([p[1] for p in pairs], dtype=np.int64).reshape(-1, k)
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            raise ValueError(f"malformed instance JSON: {exc}") from exc
        return cls(n, k, alpha, idx, sg, None if seed is None else str(seed))


def _poisson(rng: np.random.Generator, mean: float) -> int:
    if mean == 0.0:
        return 0
    if mean >= _INVERSION_MAX_MEAN:
        return int(rng.poisson(mean))
    # inversion: monotone in the mean for a fixed uniform
    u = rng.random()
    k = 0
    p = math.exp(-mean)
    cdf = p
    while u > cdf:
        k += 1
        p *= mean / k
        cdf += p
        if p == 0.0:
            break
    return k


def sample_instance(n: int, k: int, alpha: float, seed: SeedLike) -> KSatInstance:
    """Draw a K-sat instance at clause density ``alpha``.

    The clause count, the indices and the signs come from three independent
    child streams of ``seed``, so two draws with the same seed share their
    leading clauses even when their densities differ.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if not alpha >= 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    m = _poisson(seeding.rng(seed, 0), alpha * n)
    idx = seeding.rng(seed, 1).integers(1, n + 1, size=(m, k), dtype=np.int64)
    sg = (2 * seeding.rng(seed, 2).integers(0, 2, size=(m, k), dtype=np.int64) - 1).astype(np.int8)
    return KSatInstance(n, k, float(alpha), idx, sg, str(seed))


def as_assignment(spins: Sequence[int] | np.ndarray, n: int | None = None) -> np.ndarray:
    """Validate a spin vector and return it as an ``int8`` array."""
    a = np.asarray(spins)
    if a.ndim != 1:
        raise ValueError("an assignment is a 1-d vector of spins")
    if n is not None and a.shape[0] != n:
        raise ValueError(f"assignment has length {a.shape[0]}, expected {n}")
    if not np.all((a == 1) | (a == -1)):
        raise ValueError("spins must be -1 or +1")
    return a.astype(np.int8)


def state_to_assignment(state: int, n: int) -> np.ndarray:
    """Spin vector of a bitmask state (bit ``i`` set means spin ``i + 1`` is -1)."""
    bits = (state >> np.arange(n)) & 1
    return (1 - 2 * bits).astype(np.int8)


def clause_unsat(clause: Clause, a: np.ndarray) -> int:
    """1 if every referenced spin equals its sign, else 0."""
    a = np.asarray(a)
    for i, s in zip(clause.indices, clause.signs):
        if not 1 <= i <= a.shape[0]:
            raise IndexError(f"clause index {i} out of range 1..{a.shape[0]}")
        if a[i - 1] != s:
            return 0
    return 1


def unsat_count(inst: KSatInstance, a: np.ndarray) -> int:
    a = as_assignment(a, inst.n)
    if inst.m == 0:
        return 0
    return int(np.all(a[inst.indices - 1] == inst.signs, axis=1).sum())


def hamiltonian(inst: KSatInstance, a: np.ndarray) -> int:
    return -unsat_count(inst, a)


def _check_cap(n: int, limit: int):
    if n > limit:
        raise CapacityError(f"n={n} exceeds the enumeration cap {limit}")


def ground_state(inst: KSatInstance, limit: int = DEFAULT_LIMIT) -> tuple[int, np.ndarray]:
    """Exact minimum unsatisfied count by Gray-code enumeration.

    Returns ``(min_unsat, argmin)`` where ``argmin`` is the first minimizer
    met along the traversal from the all-(+1) state.
    """
    _check_cap(inst.n, limit)
    var_ptr, var_clause, var_req, size, weight = inst.canonical
    best, state = ksat_gray(inst.n, var_ptr, var_clause, var_req, size, weight,
                            np.empty(0, dtype=np.int64), False)
    return int(best), state_to_assignment(int(state), inst.n)


def unsat_table(inst: KSatInstance, limit: int = DEFAULT_LIMIT) -> np.ndarray:
    """Unsatisfied count of every state, indexed by bitmask state."""
    _check_cap(inst.n, limit)
    var_ptr, var_clause, var_req, size, weight = inst.canonical
    table = np.empty(1 << inst.n, dtype=np.int64)
    ksat_gray(inst.n, var_ptr, var_clause, var_req, size, weight, table, True)
    return table


def m_n_alpha(inst: KSatInstance, limit: int = DEFAULT_LIMIT) -> float:
    """Normalized maximum of the Hamiltonian, ``-min_unsat / N``."""
    best, _ = ground_state(inst, limit)
    return -best / inst.n


def local_search(inst: KSatInstance, restarts: int = 10, steps: int = 1000,
                 seed: SeedLike = 0) -> int:
    """Upper bound on the minimum unsatisfied count by randomized hill climbing."""
    if restarts < 1 or steps < 1:
        raise ValueError("restarts and steps must be >= 1")
    var_ptr, var_clause, var_req, size, weight = inst.canonical
    if size.shape[0] == 0:
        return 0
    gen = seeding.rng(seed)
    starts = (2 * gen.integers(0, 2, size=(restarts, inst.n)) - 1).astype(np.int8)
    ties = gen.random((restarts, steps))
    return int(ksat_local_search(inst.n, var_ptr, var_clause, var_req, size, weight, starts, ties))
