"""Zero-temperature Parisi functional for step-function order parameters.

For a nonnegative nondecreasing step function ``u`` on ``[0, 1]``, ``Psi_u``
solves the backward semilinear equation

    d_t Psi = -xi''(t) / 2 * (d_xx Psi + u(t) * (d_x Psi)**2),   Psi(1, x) = |x|,

and ``P(u) = Psi_u(0, 0) - 1/2 * int_0^1 t xi''(t) u(t) dt``. On an interval
where ``u = m`` the exponential transform ``exp(m Psi)`` solves a heat
equation, so each interval is one exact Gaussian expectation.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded
from scipy.optimize import minimize
from scipy.special import expit, log_ndtr, logit, logsumexp, ndtr, roots_hermite

from . import seeding
from .pspin import xi, xi_prime
from .seeding import SeedLike

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class StepFunction:
    """``u = values[j]`` on ``[t_j, t_{j+1})`` with ``t_0 = 0`` and ``t_{k+1} = 1``.

    ``breakpoints`` holds the interior jumps ``t_1 < ... < t_k`` only.
    """

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        b = tuple(float(t) for t in self.breakpoints)
        v = tuple(float(m) for m in self.values)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)
        if len(v) != len(b) + 1:
            raise ValueError("need exactly one more value than interior breakpoints")
        full = (0.0,) + b + (1.0,)
        if any(not lo < hi for lo, hi in zip(full, full[1:])):
            raise ValueError("breakpoints must be strictly increasing inside (0, 1)")
        if any(not m >= 0 for m in v):
            raise ValueError("values must be nonnegative")
        if any(lo > hi for lo, hi in zip(v, v[1:])):
            raise ValueError("values must be nondecreasing")

    @classmethod
    def constant(cls, m: float) -> "StepFunction":
        return cls((), (m,))

    @property
    def full_breakpoints(self) -> tuple[float, ...]:
        return (0.0,) + self.breakpoints + (1.0,)

    @property
    def intervals(self):
        full = self.full_breakpoints
        return list(zip(full[:-1], full[1:], self.values))

    def __call__(self, t: float) -> float:
        j = int(np.searchsorted(self.breakpoints, t, side="right"))
        return self.values[j]

    def refine(self, t: float) -> "StepFunction":
        """Same function with an extra breakpoint at ``t``."""
        if t in self.breakpoints or not 0 < t < 1:
            raise ValueError(f"cannot insert breakpoint {t}")
        j = int(np.searchsorted(self.breakpoints, t))
        b = self.breakpoints[:j] + (t,) + self.breakpoints[j:]
        v = self.values[:j + 1] + self.values[j:]
        return StepFunction(b, v)

    def to_json(self) -> str:
        return json.dumps({"breakpoints": list(self.breakpoints), "values": list(self.values)})

    @classmethod
    def from_json(cls, text: str) -> "StepFunction":
        try:
            data = json.loads(text)
            return cls(tuple(data["breakpoints"]), tuple(data["values"]))
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ValueError(f"invalid step function JSON: {exc}") from exc


@dataclass(frozen=True)
class GridConfig:
    dx: float = 1.0 / 64
    x_max: float | None = None
    gh_nodes: int = 64
    max_gh_nodes: int = 2048
    resolve_ratio: float = 0.4
    small_m: float = 1e-6

    def resolved_x_max(self, k: int) -> float:
        if self.x_max is not None:
            return self.x_max
        return 8.0 * math.sqrt(float(xi_prime(1.0, k))) + 4.0

    def grid(self, k: int) -> np.ndarray:
        if not self.dx > 0:
            raise ValueError("degenerate grid: dx must be positive")
        half = int(math.ceil(self.resolved_x_max(k) / self.dx))
        if half < 4:
            raise ValueError("degenerate grid: fewer than 9 points")
        return np.arange(-half, half + 1) * self.dx

    def as_dict(self, k: int) -> dict:
        return {"dx": self.dx, "x_max": self.resolved_x_max(k), "gh_nodes": self.gh_nodes,
                "max_gh_nodes": self.max_gh_nodes, "resolve_ratio": self.resolve_ratio,
                "small_m": self.small_m}

    def nodes_for(self, width: float, sd: float) -> int:
        """Node count for smoothing a profile of curvature scale ``width`` by ``sd``.

        A kink of width ``w`` is integrated accurately while ``w / sd`` stays
        above ``resolve_ratio``; below that the count grows like ``(sd / w)**2``.
        """
        if width <= 0:
            return self.max_gh_nodes
        need = self.gh_nodes * (self.resolve_ratio * sd / width) ** 2
        return int(min(self.max_gh_nodes, max(self.gh_nodes, math.ceil(need))))


@lru_cache(maxsize=64)
def gauss_hermite(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights with ``E f(Z) ~ sum w f(z)`` for standard normal ``Z``."""
    if n < 8:
        raise ValueError(f"quadrature node count must be >= 8, got {n}")
    x, w = roots_hermite(n)
    keep = w > 0
    z = math.sqrt(2.0) * x[keep]
    w = w[keep] / math.sqrt(math.pi)
    z.flags.writeable = False
    w.flags.writeable = False
    return z, w


@dataclass
class PsiGrid:
    """Psi on the x-grid at each boundary time, plus linear-tail offsets.

    ``values[j]`` and ``tail_offsets[j]`` belong to ``times[j]``; beyond the
    grid ``Psi(t, x) = |x| + tail_offset(t)``. Only the final time is stored
    when the solver ran in ``psi00``-only mode.
    """

    x: np.ndarray
    times: list[float]
    values: list[np.ndarray]
    tail_offsets: list[float]
    psi00: float
    grid: dict = field(default_factory=dict)

    def at(self, j: int, points) -> np.ndarray:
        return _evaluate(self.x, self.values[j], self.tail_offsets[j], np.asarray(points, dtype=float))


def _evaluate(x, psi, offset, points, spline=None):
    x_max = x[-1]
    inside = np.abs(points) <= x_max
    out = np.abs(points) + offset
    if spline is None:
        spline = CubicSpline(x, psi)
    out[inside] = spline(points[inside])
    return out


def _abs_step(at, sd, m, small_m):
    """One interval applied to the boundary ``|x|``, in closed form."""
    a = at / sd
    mean = sd * _SQRT_2_OVER_PI * np.exp(-0.5 * a * a) + at * (1.0 - 2.0 * ndtr(-a))
    if m < small_m:
        var = at * at + sd * sd - mean * mean
        return mean + 0.5 * m * var
    lg = np.logaddexp(m * at + log_ndtr(a + m * sd), -m * at + log_ndtr(-a + m * sd))
    return 0.5 * m * sd * sd + lg / m


def _quad_step(x, psi, offset, at, sd, m, n_nodes, small_m):
    z, w = gauss_hermite(n_nodes)
    pts = at[:, None] + sd * z[None, :]
    vals = _evaluate(x, psi, offset, pts.ravel()).reshape(pts.shape)
    if m < small_m:
        mean = vals @ w
        var = ((vals - mean[:, None]) ** 2) @ w
        return mean + 0.5 * m * var
    return logsumexp(m * vals + np.log(w)[None, :], axis=1) / m


def _schedule(u: StepFunction, k: int, field_smoothing: bool):
    """(start time, end time, m, variance) for each interval, latest first."""
    steps = []
    for lo, hi, m in reversed(u.intervals):
        steps.append((lo, hi, m, float(xi_prime(hi, k) - xi_prime(lo, k))))
    if field_smoothing:
        steps.append((0.0, 0.0, 0.0, float(xi_prime(0.0, k))))
    return steps


def solve_cole_hopf(u: StepFunction, k: int, grid: GridConfig | None = None, keep_grid: bool = True,
                    field_smoothing: bool = False) -> PsiGrid:
    """Backward recursion over the intervals of ``u``.

    The first interval acts on the boundary ``|x|`` and uses exact Gaussian
    expectations; later intervals use Gauss-Hermite quadrature on a cubic
    spline of the previous profile, with more nodes when that profile is
    still sharp compared with the smoothing width (see
    :meth:`GridConfig.nodes_for`). With ``keep_grid=False`` only
    ``Psi(0, 0)`` is computed for the last step.

    ``field_smoothing=True`` appends a ``u = 0`` smoothing of variance
    ``xi'(0)``, which accounts for the linear (p = 1) part of the mixture; the
    plain functional leaves it out because ``xi''`` does not see it.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    grid = grid or GridConfig()
    x = grid.grid(k)
    gauss_hermite(grid.gh_nodes)
    psi = np.abs(x)
    offset = 0.0
    times, values, offsets = [1.0], [psi], [0.0]
    steps = _schedule(u, k, field_smoothing)
    for idx, (lo, hi, m, var) in enumerate(steps):
        last = idx == len(steps) - 1
        at = x if (keep_grid or not last) else np.zeros(1)
        sd = math.sqrt(var)
        if idx == 0:
            new = _abs_step(at, sd, m, grid.small_m)
        else:
            width = math.sqrt(max(0.0, float(xi_prime(1.0, k) - xi_prime(hi, k))))
            new = _quad_step(x, psi, offset, at, sd, m, grid.nodes_for(width, sd), grid.small_m)
        offset += 0.5 * m * var
        if at.shape[0] == x.shape[0]:
            # keep the exact symmetry of the problem
            new = 0.5 * (new + new[::-1])
        psi = new
        times.append(lo)
        values.append(psi)
        offsets.append(offset)
    if keep_grid:
        psi00 = float(psi[x.shape[0] // 2])
    else:
        psi00 = float(psi[0])
        times, values, offsets = times[-1:], values[-1:], offsets[-1:]
    return PsiGrid(x, times[::-1], values[::-1], offsets[::-1], psi00, grid.as_dict(k))


class FDStabilityError(ValueError):
    pass


@dataclass(frozen=True)
class FDSolution:
    psi00: float
    x: np.ndarray
    psi0: np.ndarray
    steps: int


def solve_pde_fd(u: StepFunction, k: int, grid: GridConfig | None = None, dr: float = 2e-3,
                 rannacher: int = 2) -> FDSolution:
    """Crank-Nicolson solution of the Parisi equation, backward from ``t = 1``.

    Time runs in ``r = xi'(1) - xi'(t)`` so the diffusion coefficient is
    constant; breakpoints of ``u`` fall on step boundaries. The gradient
    term is explicit with second-order extrapolation, the ends carry the
    exact linear-tail values, and the first ``rannacher`` steps are replaced
    by twice as many implicit Euler half steps to damp the boundary kink.
    """
    grid = grid or GridConfig()
    x = grid.grid(k)
    dx = x[1] - x[0]
    x_edge = x[-1]
    n_in = x.shape[0] - 2
    psi = np.abs(x)
    prev = None
    offset = 0.0
    total_steps = 0
    inv_dx2 = 1.0 / (dx * dx)

    def tail_terms(p):
        grad = (p[2:] - p[:-2]) / (2.0 * dx)
        return grad * grad

    def d2(p):
        return (p[2:] - 2.0 * p[1:-1] + p[:-2]) * inv_dx2

    def banded(coef):
        ab = np.empty((3, n_in))
        ab[0, :] = -coef * inv_dx2
        ab[1, :] = 1.0 + 2.0 * coef * inv_dx2
        ab[2, :] = -coef * inv_dx2
        return ab

    for _, _, m, length in _schedule(u, k, False):
        n_steps = max(1, math.ceil(length / dr))
        delta = length / n_steps
        if m * delta / dx > 1.0:
            raise FDStabilityError(
                f"step {delta:.3g} too large for u = {m:.3g} on dx = {dx:.3g} (needs m*dr/dx <= 1)")
        plan = []
        for _ in range(n_steps):
            if total_steps + len(plan) < rannacher:
                plan += [("ie", 0.5 * delta)] * 2
            else:
                plan.append(("cn", delta))
        for scheme, h in plan:
            new_offset = offset + 0.5 * m * h
            edge_new = x_edge + new_offset
            if prev is None or scheme == "ie":
                star = psi
            else:
                star = 1.5 * psi - 0.5 * prev
            nonlin = 0.5 * m * tail_terms(star)
            if scheme == "ie":
                rhs = psi[1:-1] + h * nonlin
                rhs[0] += 0.5 * h * inv_dx2 * edge_new
                rhs[-1] += 0.5 * h * inv_dx2 * edge_new
                ab = banded(0.5 * h)
            else:
                rhs = psi[1:-1] + 0.25 * h * d2(psi) + h * nonlin
                rhs[0] += 0.25 * h * inv_dx2 * edge_new
                rhs[-1] += 0.25 * h * inv_dx2 * edge_new
                ab = banded(0.25 * h)
            new = np.empty_like(psi)
            new[1:-1] = solve_banded((1, 1), ab, rhs)
            new[0] = new[-1] = edge_new
            if not np.all(np.isfinite(new)):
                raise FDStabilityError("non-finite values in the finite-difference solution")
            prev, psi, offset = psi, new, new_offset
            total_steps += 1
    return FDSolution(float(psi[x.shape[0] // 2]), x, psi, total_steps)


def correction_integral(u: StepFunction, k: int) -> float:
    """``1/2 * int_0^1 t xi''(t) u(t) dt`` from the antiderivative ``t xi'(t) - xi(t)``."""
    def anti(t):
        return float(t * xi_prime(t, k) - xi(t, k))

    return 0.5 * math.fsum(m * (anti(hi) - anti(lo)) for lo, hi, m in u.intervals)


@dataclass(frozen=True)
class ParisiValue:
    psi00: float
    correction: float

    @property
    def p_of_u(self) -> float:
        return self.psi00 - self.correction


def parisi_functional(u: StepFunction, k: int, grid: GridConfig | None = None,
                      field_smoothing: bool = False) -> ParisiValue:
    sol = solve_cole_hopf(u, k, grid, keep_grid=False, field_smoothing=field_smoothing)
    return ParisiValue(sol.psi00, correction_integral(u, k))


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 8
    xatol: float = 1e-6
    fatol: float = 1e-10
    maxfev: int = 3000
    threads: int = 1
    # jumps are kept where the remaining variance is at least
    # (tail_ratio**2) * xi'(1), a profile width the quadrature resolves
    tail_ratio: float = 0.08

    def breakpoint_cap(self, k: int) -> float:
        top = float(xi_prime(1.0, k))
        return ((top * (1.0 - self.tail_ratio ** 2)) / k) ** (1.0 / (k - 1)) - 1.0


@dataclass(frozen=True)
class ParisiMinimum:
    u: StepFunction
    value: float
    converged: bool
    message: str
    evaluations: int
    start_values: tuple[float, ...]


def decode(theta: Sequence[float], k_levels: int, t_cap: float = 1.0) -> StepFunction:
    """Map unconstrained parameters to a step function.

    The first ``k_levels`` entries become breakpoints in ``(0, t_cap)``
    through sorted logistic transforms, the rest become values through
    cumulative sums of exponentials. Breakpoints that collide in floating
    point are merged.
    """
    theta = np.asarray(theta, dtype=float)
    b = np.sort(t_cap * expit(theta[:k_levels]))
    v = np.cumsum(np.exp(np.clip(theta[k_levels:], -700, 700)))
    bps, vals = [], [float(v[0])]
    for t, m in zip(b, v[1:]):
        if t >= 1.0:
            continue
        if t <= 0.0 or (bps and t <= bps[-1]):
            vals[-1] = float(m)
        else:
            bps.append(float(t))
            vals.append(float(m))
    return StepFunction(tuple(bps), tuple(vals))


def encode(u: StepFunction, k_levels: int, t_cap: float = 1.0) -> np.ndarray:
    """Inverse of :func:`decode`, embedding ``u`` into ``k_levels`` jumps.

    Missing jumps are inserted at midpoints of the last interval with a
    negligible increment, so the encoded function equals ``u`` to ~1e-9.
    """
    b = list(u.breakpoints)
    v = list(u.values)
    if len(b) > k_levels:
        raise ValueError(f"u has {len(b)} jumps, more than {k_levels}")
    if b and b[-1] >= t_cap:
        raise ValueError(f"u has a jump at {b[-1]}, beyond the cap {t_cap}")
    while len(b) < k_levels:
        lo = b[-1] if b else 0.0
        b.append(0.5 * (lo + t_cap))
        v.append(v[-1])
    inc = np.diff(np.concatenate([[0.0], v]))
    inc = np.maximum(inc, 1e-9)
    return np.concatenate([logit(np.asarray(b) / t_cap), np.log(inc)])


def minimize_parisi(k: int, k_levels: int, config: OptimizerConfig | None = None, seed: SeedLike = 0,
                    grid: GridConfig | None = None, warm_start: StepFunction | None = None,
                    field_smoothing: bool = False) -> ParisiMinimum:
    """Nelder-Mead search over step functions with at most ``k_levels`` jumps.

    Starts are random draws from ``seed``; ``warm_start`` (possibly with
    fewer jumps) replaces the first one. Jumps are confined below
    :meth:`OptimizerConfig.breakpoint_cap`. The best start wins, ties going to
    the lower start index.
    """
    if k_levels < 0:
        raise ValueError("k_levels must be >= 0")
    config = config or OptimizerConfig()
    grid = grid or GridConfig()
    gen = seeding.rng(seed)
    starts = []
    for _ in range(config.restarts):
        b = gen.normal(0.0, 1.5, size=k_levels)
        v = np.concatenate([[math.log(gen.uniform(0.05, 1.5))], gen.normal(-1.5, 1.0, size=k_levels)])
        starts.append(np.concatenate([b, v]))
    t_cap = config.breakpoint_cap(k)
    if warm_start is not None:
        starts[0] = encode(warm_start, k_levels, t_cap)

    def objective(theta):
        return parisi_functional(decode(theta, k_levels, t_cap), k, grid, field_smoothing).p_of_u

    def run(theta0):
        res = minimize(objective, theta0, method="Nelder-Mead",
                       options={"xatol": config.xatol, "fatol": config.fatol, "maxfev": config.maxfev,
                                "adaptive": len(theta0) > 3})
        return res

    if config.threads > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(s) for s in starts]
    best = min(range(len(results)), key=lambda i: (results[i].fun, i))
    res = results[best]
    return ParisiMinimum(
        u=decode(res.x, k_levels, t_cap),
        value=float(res.fun),
        converged=bool(res.success),
        message=str(res.message),
        evaluations=int(sum(r.nfev for r in results)),
        start_values=tuple(float(r.fun) for r in results),
    )
