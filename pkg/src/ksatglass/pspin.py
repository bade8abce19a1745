"""The mixed p-spin Gaussian model matched to K-sat.

    H(s) = sum_{p=1..K} sqrt(C(K, p) / N**(p-1)) * sum_{i_1..i_p} g_{i_1..i_p} s_{i_1}...s_{i_p}

with the inner sum over all ordered p-tuples, diagonal tuples included. Its
covariance is ``N * xi(R)`` with ``xi(x) = (1 + x)**K - 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from . import seeding
from ._kernels import REANCHOR_EVERY, pspin_gray
from .ksat import CapacityError, as_assignment, state_to_assignment
from .seeding import SeedLike

DEFAULT_LIMITS = {2: 20, 3: 20, 4: 16}
DEFAULT_FALLBACK_LIMIT = 12
DEFAULT_MAX_ENTRIES = 50_000_000


def xi(x, k: int):
    return (1.0 + np.asarray(x, dtype=float)) ** k - 1.0


def xi_prime(x, k: int):
    return k * (1.0 + np.asarray(x, dtype=float)) ** (k - 1)


def xi_second(x, k: int):
    return k * (k - 1) * (1.0 + np.asarray(x, dtype=float)) ** (k - 2)


@dataclass(frozen=True)
class MixtureSpec:
    k: int

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"k must be >= 2, got {self.k}")

    @property
    def coefficients(self) -> tuple[int, ...]:
        """``c_p = C(K, p)`` for ``p = 1..K``."""
        return tuple(math.comb(self.k, p) for p in range(1, self.k + 1))

    def xi(self, x):
        return xi(x, self.k)

    def xi_power_sum(self, x):
        x = np.asarray(x, dtype=float)
        return sum(c * x ** p for p, c in enumerate(self.coefficients, start=1))

    def xi_prime(self, x):
        return xi_prime(x, self.k)

    def xi_second(self, x):
        return xi_second(x, self.k)


def default_limit(k: int) -> int:
    return DEFAULT_LIMITS.get(k, DEFAULT_FALLBACK_LIMIT)


@lru_cache(maxsize=32)
def _monomials(n: int, p: int):
    """Map every ordered p-tuple to the set of indices of odd multiplicity.

    Returns ``(masks, inverse)``: the distinct bitmasks and, per flattened
    tuple, the position of its mask.
    """
    masks = np.zeros(n ** p, dtype=np.int64)
    grids = np.indices((n,) * p).reshape(p, -1)
    for axis in range(p):
        masks ^= np.left_shift(np.int64(1), grids[axis])
    uniq, inverse = np.unique(masks, return_inverse=True)
    uniq.flags.writeable = False
    inverse.flags.writeable = False
    return uniq, inverse


@lru_cache(maxsize=16)
def _structure(n: int, k: int):
    """Disorder-independent multilinear layout shared by every sample at (n, k)."""
    per_level = [_monomials(n, p) for p in range(1, k + 1)]
    all_masks = np.unique(np.concatenate([m for m, _ in per_level]))
    level_pos = [np.searchsorted(all_masks, m)[inv] for m, inv in per_level]
    nonzero = all_masks != 0
    terms = all_masks[nonzero]
    # position of each global mask among the non-constant terms, -1 for the constant
    slot = np.full(all_masks.shape[0], -1, dtype=np.int64)
    slot[nonzero] = np.arange(terms.shape[0])
    var_lists = [np.nonzero((terms >> i) & 1)[0] for i in range(n)]
    var_ptr = np.zeros(n + 1, dtype=np.int64)
    var_ptr[1:] = np.cumsum([len(v) for v in var_lists])
    var_term = np.concatenate(var_lists).astype(np.int64) if n else np.zeros(0, np.int64)
    return [slot[pos] for pos in level_pos], terms.shape[0], var_ptr, var_term


@dataclass(frozen=True, eq=False)
class PSpinSample:
    """One draw of the Gaussian couplings; ``couplings[p - 1]`` has shape ``(N,) * p``."""

    n: int
    spec: MixtureSpec
    couplings: tuple
    seed: str | None = None

    @property
    def k(self) -> int:
        return self.spec.k

    def weights(self) -> list[float]:
        return [math.sqrt(c / self.n ** (p - 1)) for p, c in enumerate(self.spec.coefficients, start=1)]

    def scaled(self, factor: float) -> "PSpinSample":
        return PSpinSample(self.n, self.spec, tuple(factor * g for g in self.couplings), self.seed)

    @cached_property
    def multilinear(self) -> tuple[float, np.ndarray]:
        """``(constant, coef)`` of H as a multilinear polynomial in the spins."""
        slots, n_terms, _, _ = _structure(self.n, self.k)
        coef = np.zeros(n_terms)
        constant = 0.0
        for w, g, slot in zip(self.weights(), self.couplings, slots):
            flat = w * g.ravel()
            is_const = slot < 0
            constant += math.fsum(flat[is_const])
            coef += np.bincount(slot[~is_const], weights=flat[~is_const], minlength=n_terms)
        return constant, coef


def sample_pspin(n: int, k: int, seed: SeedLike, max_entries: int = DEFAULT_MAX_ENTRIES) -> PSpinSample:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    spec = MixtureSpec(k)
    total = sum(n ** p for p in range(1, k + 1))
    if total > max_entries:
        raise CapacityError(f"{total} couplings exceed the memory cap of {max_entries}")
    gen = seeding.rng(seed)
    couplings = []
    for p in range(1, k + 1):
        g = gen.standard_normal((n,) * p)
        g.flags.writeable = False
        couplings.append(g)
    return PSpinSample(n, spec, tuple(couplings), str(seed))


def _tensor_terms(g: np.ndarray, a: np.ndarray) -> np.ndarray:
    out = g.astype(float)
    for axis in range(g.ndim):
        shape = [1] * g.ndim
        shape[axis] = a.shape[0]
        out = out * a.reshape(shape)
    return out.ravel()


def evaluate(h: PSpinSample, a) -> float:
    """H(a) with compensated summation over every ordered tuple."""
    a = as_assignment(a, h.n).astype(float)
    terms = [w * _tensor_terms(g, a) for w, g in zip(h.weights(), h.couplings)]
    return math.fsum(np.concatenate(terms))


def features(a, n: int, k: int) -> np.ndarray:
    """Weighted tensor powers of ``a`` so that ``H(a) = flat_couplings @ features``."""
    a = as_assignment(a, n).astype(float)
    parts = []
    for p, c in enumerate(MixtureSpec(k).coefficients, start=1):
        t = np.ones(1)
        for _ in range(p):
            t = np.multiply.outer(t, a).ravel()
        parts.append(math.sqrt(c / n ** (p - 1)) * t)
    return np.concatenate(parts)


def flat_couplings(h: PSpinSample) -> np.ndarray:
    return np.concatenate([g.ravel() for g in h.couplings])


def _gray(h: PSpinSample, limit: int | None, record: bool):
    limit = default_limit(h.k) if limit is None else limit
    if h.n > limit:
        raise CapacityError(f"n={h.n} exceeds the enumeration cap {limit}")
    _, _, var_ptr, var_term = _structure(h.n, h.k)
    constant, coef = h.multilinear
    table = np.empty(1 << h.n if record else 0)
    best, state = pspin_gray(h.n, var_ptr, var_term, coef, constant, table, record, REANCHOR_EVERY)
    return best, state, table


def max_pspin(h: PSpinSample, limit: int | None = None) -> tuple[float, np.ndarray]:
    """``(M_N, argmax)`` by Gray-code enumeration with incremental flip deltas."""
    best, state, _ = _gray(h, limit, False)
    return best / h.n, state_to_assignment(int(state), h.n)


def energy_table(h: PSpinSample, limit: int | None = None) -> np.ndarray:
    """H of every state, indexed by bitmask state (bit ``i`` set: spin ``i + 1`` is -1)."""
    return _gray(h, limit, True)[2]


def overlap(a1, a2) -> float:
    a1 = as_assignment(a1)
    a2 = as_assignment(a2, a1.shape[0])
    return float(np.dot(a1.astype(np.int64), a2.astype(np.int64))) / a1.shape[0]


@dataclass(frozen=True)
class CovarianceReport:
    overlap: float
    empirical: float
    expected: float
    stderr: float

    @property
    def z_score(self) -> float:
        return (self.empirical - self.expected) / self.stderr if self.stderr > 0 else math.inf


def covariance_check(n: int, k: int, pairs, samples: int, seed: SeedLike) -> list[CovarianceReport]:
    """Compare the empirical ``E H(a1) H(a2)`` with ``N xi(R)`` over fresh draws."""
    if samples < 2:
        raise ValueError("samples must be >= 2")
    pairs = [(as_assignment(a1, n), as_assignment(a2, n)) for a1, a2 in pairs]
    left = np.stack([features(a1, n, k) for a1, _ in pairs], axis=1)
    right = np.stack([features(a2, n, k) for _, a2 in pairs], axis=1)
    products = np.empty((samples, len(pairs)))
    for i in range(samples):
        g = flat_couplings(sample_pspin(n, k, seeding.child_seed(seed, i)))
        products[i] = (g @ left) * (g @ right)
    reports = []
    for j, (a1, a2) in enumerate(pairs):
        r = overlap(a1, a2)
        col = products[:, j]
        reports.append(CovarianceReport(
            overlap=r,
            empirical=math.fsum(col) / samples,
            expected=n * float(xi(r, k)),
            stderr=float(np.std(col, ddof=1) / math.sqrt(samples)),
        ))
    return reports
