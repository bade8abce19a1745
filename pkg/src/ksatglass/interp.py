"""Exact small-N diagnostics of the K-sat / p-spin interpolation.

Along ``t in [0, 1]`` the interpolating Hamiltonian is

    H(t, s) = delta * H_{alpha (1 - t)}(s) + sqrt(t) * beta * H(s),

with a K-sat part drawn at density ``alpha (1 - t)`` and the Gaussian part
of :mod:`ksatglass.pspin`. Everything here enumerates all ``2**N`` states, so
Gibbs averages over any number of independent replicas are exact for a
single disorder draw; averages over disorder are plain sample means.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import ksat, pspin, seeding
from .ksat import CapacityError, KSatInstance
from .pspin import PSpinSample, xi
from .seeding import SeedLike

DEFAULT_LIMIT = 14
DEFAULT_TRUNCATION = 8
FD_STEP = 0.05
_CHUNK = 2048


def beta_of(alpha: float, delta: float, k: int) -> float:
    """Gaussian inverse temperature that cancels the overlap terms."""
    if alpha < 0 or delta <= 0:
        raise ValueError("need alpha >= 0 and delta > 0")
    return math.sqrt(alpha) * (-math.expm1(-delta)) / 2 ** k


def iii_bound(alpha: float, delta: float) -> float:
    """``alpha * sum_{n >= 3} x**n / n`` with ``x = 1 - exp(-delta)``."""
    x = -math.expm1(-delta)
    return alpha * (delta - x - 0.5 * x * x)


@dataclass(frozen=True)
class InterpolationPoint:
    t: float
    alpha: float
    delta: float
    beta: float
    k: int
    n: int

    def __post_init__(self):
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"t must lie in [0, 1], got {self.t}")
        if self.alpha < 0 or self.delta <= 0 or self.beta < 0:
            raise ValueError("need alpha >= 0, delta > 0, beta >= 0")

    @classmethod
    def matched(cls, t: float, alpha: float, delta: float, k: int, n: int) -> "InterpolationPoint":
        """Point whose ``beta`` comes from :func:`beta_of`."""
        return cls(t, alpha, delta, beta_of(alpha, delta, k), k, n)

    @property
    def ksat_density(self) -> float:
        return self.alpha * (1.0 - self.t)


def _shared_n(ksat_part, pspin_part, n):
    ns = {p.n for p in (ksat_part, pspin_part) if p is not None}
    if n is not None:
        ns.add(n)
    if len(ns) != 1:
        raise ValueError(f"disorder parts disagree on N: {sorted(ns)}")
    return ns.pop()


def interpolating_hamiltonian(t: float, delta: float, beta: float, ksat_part: KSatInstance | None,
                              pspin_part: PSpinSample | None, a) -> float:
    n = _shared_n(ksat_part, pspin_part, None)
    a = ksat.as_assignment(a, n)
    value = 0.0
    if ksat_part is not None:
        value += delta * ksat.hamiltonian(ksat_part, a)
    if pspin_part is not None and t > 0:
        value += math.sqrt(t) * beta * pspin.evaluate(pspin_part, a)
    return value


def all_states(n: int) -> np.ndarray:
    """Spin vectors of every bitmask state, shape ``(2**n, n)``."""
    states = np.arange(1 << n)[:, None]
    return (1 - 2 * ((states >> np.arange(n)) & 1)).astype(np.int8)


@dataclass(frozen=True, eq=False)
class GibbsTable:
    """Energies and Gibbs weights of one disorder draw at one ``t``.

    ``log_partition = max_energy + log(shifted_sum)`` where ``shifted_sum``
    is the sum of ``exp(energy - max_energy)``.
    """

    energies: np.ndarray
    weights: np.ndarray
    max_energy: float
    shifted_sum: float

    @property
    def n(self) -> int:
        return int(self.energies.shape[0]).bit_length() - 1

    @property
    def log_partition(self) -> float:
        return self.max_energy + math.log(self.shifted_sum)


def energy_table(t: float, delta: float, beta: float, ksat_part: KSatInstance | None,
                 pspin_part: PSpinSample | None, n: int | None = None,
                 limit: int = DEFAULT_LIMIT) -> np.ndarray:
    n = _shared_n(ksat_part, pspin_part, n)
    if n > limit:
        raise CapacityError(f"n={n} exceeds the exact-enumeration cap {limit}")
    energies = np.zeros(1 << n)
    if ksat_part is not None:
        energies -= delta * ksat.unsat_table(ksat_part)
    if pspin_part is not None and t > 0:
        energies += math.sqrt(t) * beta * pspin.energy_table(pspin_part, limit=max(limit, n))
    return energies


def gibbs_table(energies: np.ndarray) -> GibbsTable:
    top = float(energies.max())
    shifted = np.exp(energies - top)
    total = math.fsum(shifted)
    return GibbsTable(energies, shifted / total, top, total)


def free_energy(t: float, delta: float, beta: float, ksat_part: KSatInstance | None,
                pspin_part: PSpinSample | None, n: int | None = None,
                limit: int = DEFAULT_LIMIT) -> tuple[float, GibbsTable]:
    """``(1/N) log sum_s exp H(t, s)`` for one draw, with its Gibbs table."""
    table = gibbs_table(energy_table(t, delta, beta, ksat_part, pspin_part, n, limit))
    n = table.n
    return table.log_partition / n, table


def sandwich_check(table: GibbsTable, n: int) -> tuple[bool, bool]:
    """Check ``max H / N <= phi <= log 2 + max H / N`` for one table.

    In terms of the shifted sum the two sides read ``shifted_sum >= 1`` and
    ``shifted_sum <= 2**N``; both are tested on the computed sum so floating
    rounding in ``log`` cannot produce a spurious failure.
    """
    phi = table.log_partition / n
    lower = phi >= table.max_energy / n and table.shifted_sum >= 1.0
    upper = math.log2(table.shifted_sum) <= n
    return bool(lower), bool(upper)


def multi_overlap(replicas) -> float:
    """``(1/N) sum_i Av_eps prod_l (1 + eps s_i^l) / 2`` over ``n`` replicas."""
    reps = [ksat.as_assignment(r) for r in replicas]
    if not reps:
        raise ValueError("need at least one replica")
    n = reps[0].shape[0]
    stack = np.stack([ksat.as_assignment(r, n) for r in reps]).astype(np.int64)
    plus = np.all(stack == 1, axis=0)
    minus = np.all(stack == -1, axis=0)
    return float(0.5 * (plus.sum() + minus.sum())) / n


def _moment_tensor(weights: np.ndarray, columns: np.ndarray, order: int) -> np.ndarray:
    """``sum_s w_s columns[s, a_1] ... columns[s, a_order]``, chunked over states."""
    width = columns.shape[1]
    out = np.zeros((width,) * order)
    for start in range(0, columns.shape[0], _CHUNK):
        block = columns[start:start + _CHUNK]
        acc = weights[start:start + _CHUNK, None] * block
        for _ in range(order - 1):
            acc = (acc[..., None] * block.reshape((block.shape[0],) + (1,) * (acc.ndim - 1) + (width,)))
        out += acc.sum(axis=0)
    return out


def mean_xi_overlap(table: GibbsTable, k: int) -> float:
    """``<xi(R_12)>`` from the spin correlation tensors of the Gibbs measure."""
    n = table.n
    spins = all_states(n).astype(float)
    total = 0.0
    for p, c in enumerate(pspin.MixtureSpec(k).coefficients, start=1):
        corr = _moment_tensor(table.weights, spins, p)
        total += c * float(np.sum(corr * corr)) / n ** p
    return total


def multi_overlap_moments(table: GibbsTable, k: int, max_replicas: int) -> np.ndarray:
    """``<Q_{1..n}**K>`` for ``n = 1..max_replicas``.

    With ``G_a`` the Gibbs probability that the K literals ``a`` all hold,
    ``<Q**K> = (2N)**-K * sum_a G_a**n`` because replicas are independent.
    """
    n = table.n
    spins = all_states(n)
    literals = np.concatenate([spins == 1, spins == -1], axis=1).astype(float)
    joint = _moment_tensor(table.weights, literals, k).ravel()
    scale = (2 * n) ** k
    return np.array([math.fsum(joint ** r) / scale for r in range(1, max_replicas + 1)])


@dataclass(frozen=True)
class DerivativeTerms:
    gaussian: float
    poisson_truncated: float
    remainder_bound: float

    @property
    def total(self) -> float:
        return self.gaussian + self.poisson_truncated


def derivative_terms(point: InterpolationPoint, ksat_part: KSatInstance | None,
                     pspin_part: PSpinSample | None, truncation: int = DEFAULT_TRUNCATION,
                     limit: int = DEFAULT_LIMIT) -> DerivativeTerms:
    """Gaussian term, truncated Poisson series, and the remainder bound for one draw."""
    if truncation < 2:
        raise ValueError("truncation must be >= 2")
    _, table = free_energy(point.t, point.delta, point.beta, ksat_part, pspin_part, point.n, limit)
    gaussian = 0.5 * point.beta ** 2 * (float(xi(1.0, point.k)) - mean_xi_overlap(table, point.k))
    x = -math.expm1(-point.delta)
    moments = multi_overlap_moments(table, point.k, truncation)
    series = math.fsum(x ** r / r * moments[r - 1] for r in range(1, truncation + 1))
    return DerivativeTerms(gaussian, point.alpha * series, iii_bound(point.alpha, point.delta))


def draw_parts(point: InterpolationPoint, seed: SeedLike, index: int = 0,
               t: float | None = None) -> tuple[KSatInstance, PSpinSample]:
    """Disorder for draw ``index``; the same seeds serve every ``t`` (common random numbers)."""
    t = point.t if t is None else t
    ksat_part = ksat.sample_instance(point.n, point.k, point.alpha * (1.0 - t),
                                     seeding.child_seed(seed, index, 1))
    pspin_part = pspin.sample_pspin(point.n, point.k, seeding.child_seed(seed, index, 2))
    return ksat_part, pspin_part


@dataclass(frozen=True)
class DerivativeCheck:
    fd_mean: float
    fd_stderr: float
    terms_mean: float
    terms_stderr: float
    remainder_bound: float
    draws: int
    step: float

    @property
    def gap(self) -> float:
        return abs(self.fd_mean - self.terms_mean)

    @property
    def combined_stderr(self) -> float:
        return math.hypot(self.fd_stderr, self.terms_stderr)

    def passed(self, n_sigma: float = 4.0) -> bool:
        return self.gap <= self.remainder_bound + n_sigma * self.combined_stderr


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    mean = math.fsum(values) / values.shape[0]
    se = float(np.std(values, ddof=1) / math.sqrt(values.shape[0])) if values.shape[0] > 1 else 0.0
    return mean, se


def derivative_check(point: InterpolationPoint, draws: int, seed: SeedLike, step: float = FD_STEP,
                     truncation: int = DEFAULT_TRUNCATION) -> DerivativeCheck:
    """Symmetric difference of the disorder-averaged free energy against I + II.

    Draw ``i`` uses the same seeds at ``t - step``, ``t + step`` and ``t``.
    """
    if not 0.0 <= point.t - step and point.t + step <= 1.0:
        raise ValueError("t +/- step must stay inside [0, 1]")
    fd = np.empty(draws)
    terms = np.empty(draws)
    for i in range(draws):
        phis = []
        for t in (point.t - step, point.t + step):
            kp, pp = draw_parts(point, seed, i, t)
            phis.append(free_energy(t, point.delta, point.beta, kp, pp, point.n)[0])
        fd[i] = (phis[1] - phis[0]) / (2.0 * step)
        kp, pp = draw_parts(point, seed, i)
        terms[i] = derivative_terms(point, kp, pp, truncation).total
    fd_mean, fd_se = _mean_se(fd)
    t_mean, t_se = _mean_se(terms)
    return DerivativeCheck(fd_mean, fd_se, t_mean, t_se, iii_bound(point.alpha, point.delta), draws, step)
