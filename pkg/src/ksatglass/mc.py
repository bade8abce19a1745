"""Disorder averages of the two ground-state energies and the expansion residual.

Sample ``i`` of every estimate uses the seed ``child_seed(seed, i, stream)``,
so an estimate depends only on its arguments: running with more workers,
in another order, or with more samples leaves the first samples unchanged.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import ksat, pspin, seeding
from .seeding import SeedLike

KSAT_STREAM = 1
PSPIN_STREAM = 2
CSV_FIELDS = ("alpha", "n", "mean_mna", "se_mna", "mean_mn", "se_mn", "residual", "residual_se")


@dataclass(frozen=True)
class EstimateResult:
    mean: float
    stderr: float
    n_samples: int
    seed: str
    values: np.ndarray = field(repr=False, compare=False)


def _estimate(fn: Callable[[str], float], n_samples: int, seed: SeedLike, stream: int,
              threads: int) -> EstimateResult:
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    seeds = [seeding.child_seed(seed, i, stream) for i in range(n_samples)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            values = np.array(list(pool.map(fn, seeds)), dtype=float)
    else:
        values = np.array([fn(s) for s in seeds], dtype=float)
    mean = math.fsum(values) / n_samples
    # a single sample has no spread estimate; report zero
    stderr = float(np.std(values, ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    values.flags.writeable = False
    return EstimateResult(mean, stderr, n_samples, str(seed), values)


def estimate_m_n_alpha(n: int, k: int, alpha: float, n_samples: int, seed: SeedLike,
                       threads: int = 1, limit: int = ksat.DEFAULT_LIMIT) -> EstimateResult:
    """Mean of ``M_{N,alpha}`` over independent K-sat instances."""
    if n > limit:
        raise ksat.CapacityError(f"n={n} exceeds the enumeration cap {limit}")

    def one(s):
        return ksat.m_n_alpha(ksat.sample_instance(n, k, alpha, s), limit)

    return _estimate(one, n_samples, seed, KSAT_STREAM, threads)


def estimate_m_n(n: int, k: int, n_samples: int, seed: SeedLike, threads: int = 1,
                 limit: int | None = None) -> EstimateResult:
    """Mean of ``M_N`` over independent Gaussian disorder draws."""
    cap = pspin.default_limit(k) if limit is None else limit
    if n > cap:
        raise ksat.CapacityError(f"n={n} exceeds the enumeration cap {cap}")

    def one(s):
        return pspin.max_pspin(pspin.sample_pspin(n, k, s), cap)[0]

    return _estimate(one, n_samples, seed, PSPIN_STREAM, threads)


@dataclass(frozen=True)
class ResidualRecord:
    alpha: float
    k: int
    est_m_n_alpha: EstimateResult
    est_m_n: EstimateResult

    @property
    def residual(self) -> float:
        return residual_of(self.alpha, self.k, self.est_m_n_alpha.mean, self.est_m_n.mean)

    @property
    def residual_stderr(self) -> float:
        return math.sqrt(self.est_m_n_alpha.stderr ** 2
                         + self.alpha / 4 ** self.k * self.est_m_n.stderr ** 2)

    @property
    def prediction(self) -> float:
        """``-alpha / 2**K + sqrt(alpha) / 2**K * E M_N``."""
        return (-self.alpha + math.sqrt(self.alpha) * self.est_m_n.mean) / 2 ** self.k


def residual_of(alpha: float, k: int, mean_mna: float, mean_mn: float) -> float:
    return mean_mna + alpha / 2 ** k - math.sqrt(alpha) / 2 ** k * mean_mn


def theorem1_residual(n: int, k: int, alpha: float, n_samples: int, seed: SeedLike, threads: int = 1,
                      est_m_n: EstimateResult | None = None) -> ResidualRecord:
    """Residual of the large-density expansion at one ``alpha``.

    ``est_m_n`` may be passed in to reuse one Gaussian estimate across a sweep;
    it must come from the same ``n`` and ``k``.
    """
    if alpha == 0:
        zero = EstimateResult(0.0, 0.0, n_samples, str(seed), np.zeros(0))
        est_mna = zero
    else:
        est_mna = estimate_m_n_alpha(n, k, alpha, n_samples, seed, threads)
    if est_m_n is None:
        est_m_n = estimate_m_n(n, k, n_samples, seed, threads)
    return ResidualRecord(float(alpha), k, est_mna, est_m_n)


@dataclass(frozen=True)
class SweepResult:
    n: int
    k: int
    records: list[ResidualRecord]
    exponent: float | None
    intercept: float | None
    exponent_stderr: float | None
    fit_alphas: tuple[float, ...]

    @property
    def fit_omitted(self) -> bool:
        return self.exponent is None

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for r in self.records:
            row = (r.alpha, r.est_m_n_alpha.n_samples, r.est_m_n_alpha.mean, r.est_m_n_alpha.stderr,
                   r.est_m_n.mean, r.est_m_n.stderr, r.residual, r.residual_stderr)
            writer.writerow([_fmt(v) for v in row])
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def fit_exponent(alphas: Sequence[float], residuals: Sequence[float], stderrs: Sequence[float],
                 n_sigma: float = 3.0, bootstrap: int = 200, seed: SeedLike = 0):
    """Least-squares slope of ``log|R|`` against ``log alpha``.

    Only points with ``|R| > n_sigma * stderr`` enter the fit. Returns
    ``(slope, intercept, slope_stderr, used_alphas)``, or ``None`` for the
    first three when fewer than two points qualify. The slope error comes
    from a parametric bootstrap that redraws each residual from a normal
    with its standard error.
    """
    a = np.asarray(alphas, dtype=float)
    r = np.asarray(residuals, dtype=float)
    se = np.asarray(stderrs, dtype=float)
    use = np.abs(r) > n_sigma * se
    if use.sum() < 2:
        return None, None, None, ()
    x = np.log(a[use])
    slope, intercept = np.polyfit(x, np.log(np.abs(r[use])), 1)
    gen = seeding.rng(seed)
    boots = []
    for _ in range(bootstrap):
        draw = np.abs(r[use] + se[use] * gen.standard_normal(use.sum()))
        if np.all(draw > 0):
            boots.append(np.polyfit(x, np.log(draw), 1)[0])
    slope_se = float(np.std(boots, ddof=1)) if len(boots) > 1 else None
    return float(slope), float(intercept), slope_se, tuple(float(v) for v in a[use])


def residual_sweep(n: int, k: int, alphas: Sequence[float], n_samples: int, seed: SeedLike,
                   threads: int = 1) -> SweepResult:
    """Residual records over ``alphas`` plus the fitted log-log exponent.

    One Gaussian estimate at ``(n, k)`` is shared by every ``alpha``.
    """
    if not alphas:
        raise ValueError("alphas must not be empty")
    est_m_n = estimate_m_n(n, k, n_samples, seed, threads)
    records = [theorem1_residual(n, k, a, n_samples, seed, threads, est_m_n) for a in alphas]
    slope, intercept, slope_se, used = fit_exponent(
        [r.alpha for r in records], [r.residual for r in records],
        [r.residual_stderr for r in records], seed=seed)
    return SweepResult(n, k, records, slope, intercept, slope_se, used)


@dataclass(frozen=True)
class ScalingChecks:
    ratio_decreasing: bool
    exponent_below_half: bool
    relative_error_top: float
    top_within_tolerance: bool

    @property
    def passed(self) -> bool:
        return self.ratio_decreasing and self.exponent_below_half and self.top_within_tolerance


def scaling_checks(sweep: SweepResult, max_exponent: float = 0.5, rel_tol: float = 0.15) -> ScalingChecks:
    """Desk-scale form of the expansion: ``|R|/sqrt(alpha)`` falls with ``alpha``,
    the fitted exponent is below ``max_exponent``, and at the largest ``alpha``
    the estimate matches the two-term prediction to ``rel_tol`` relative error.
    """
    recs = sorted(sweep.records, key=lambda r: r.alpha)
    ratios = [abs(r.residual) / math.sqrt(r.alpha) for r in recs]
    decreasing = all(b < a for a, b in zip(ratios, ratios[1:]))
    below = sweep.exponent is not None and sweep.exponent < max_exponent
    top = recs[-1]
    rel = abs(top.est_m_n_alpha.mean - top.prediction) / abs(top.prediction)
    return ScalingChecks(decreasing, below, rel, rel <= rel_tol)


def summary_line(sweep: SweepResult, checks: ScalingChecks) -> str:
    if sweep.fit_omitted:
        fit = "exponent=omitted (fewer than 2 residuals above 3 standard errors)"
    else:
        se = "nan" if sweep.exponent_stderr is None else f"{sweep.exponent_stderr:.3f}"
        fit = f"exponent={sweep.exponent:.4f} (bootstrap se {se}, {len(sweep.fit_alphas)} points)"
    verdict = "PASS" if checks.passed else "FAIL"
    return (f"N={sweep.n} K={sweep.k} {fit}; "
            f"ratio_decreasing={'pass' if checks.ratio_decreasing else 'fail'}; "
            f"exponent<1/2={'pass' if checks.exponent_below_half else 'fail'}; "
            f"top_rel_err={checks.relative_error_top:.4f} "
            f"({'pass' if checks.top_within_tolerance else 'fail'}); overall={verdict}")
