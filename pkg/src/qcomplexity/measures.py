"""
Information and complexity functionals of density pairs.

Entropies are in nats. ``T`` is the kinetic energy per particle,
``T = <k^2>/2`` with hbar = m = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .transforms import integrate_radial

EUR_BOUND = 3.0 * (1.0 + math.log(math.pi))
TINY = 1e-300
BOUND_TOL = 1e-6

SWEEP_COLUMNS = ("system", "N", "S_r", "S_k", "S", "D_r", "D_k", "D", "msr", "T",
                 "S_min", "S_max", "delta", "omega", "C")


class BoundViolation(ArithmeticError):
    """A record breaks the entropy bounds or the uncertainty floor."""


def _check_density(f):
    if np.any(f.values < 0):
        raise ValueError("density has negative samples")


def shannon_entropy(f):
    """``-4 pi int f ln f x^2 dx`` with ``0 ln 0 = 0``."""
    _check_density(f)
    v = f.values
    safe = np.where(v > TINY, v, 1.0)
    plogp = np.where(v > TINY, v * np.log(safe), 0.0)
    return -integrate_radial((f.grid, plogp), 2)


def disequilibrium(f):
    """``4 pi int f^2 x^2 dx``."""
    _check_density(f)
    return integrate_radial((f.grid, f.values * f.values), 2)


def combined_disequilibrium(d_r, d_k):
    if d_r <= 0 or d_k <= 0:
        raise ValueError(f"disequilibria must be positive, got D_r={d_r:.6g}, D_k={d_k:.6g}")
    return d_r * d_k


def second_moment(f):
    return integrate_radial(f, 4)


def entropy_bounds(msr, kinetic):
    """Lower and upper entropy-sum limits from ``<r^2>`` and ``T``.

    Raises
    ------
    BoundViolation
        If ``(8/9) <r^2> T < 1``: no normalized pair has such moments.
    """
    if msr <= 0 or kinetic <= 0:
        raise ValueError(f"<r^2> and T must be positive, got {msr:.6g}, {kinetic:.6g}")
    arg = 8.0 / 9.0 * msr * kinetic
    if arg < 1.0 - 1e-9:
        raise BoundViolation(
            f"(8/9)<r^2>T = {arg:.12g} < 1: moments violate the uncertainty principle"
        )
    half_width = 1.5 * math.log(arg)
    return EUR_BOUND - half_width, EUR_BOUND + half_width


def landsberg(s, s_max, tol=BOUND_TOL):
    """Disorder ``S/S_max`` and order ``1 - S/S_max``."""
    if s <= 0 or s_max <= 0:
        raise ValueError("entropies must be positive")
    if s > s_max + tol:
        raise BoundViolation(f"S={s:.10g} exceeds S_max={s_max:.10g}")
    delta = min(s / s_max, 1.0)
    return delta, 1.0 - delta


def lmc_complexity(s, d):
    if s <= 0 or d <= 0:
        raise ValueError(f"S and D must be positive, got {s:.6g}, {d:.6g}")
    return s * d


def sdl_complexity(delta, alpha, beta):
    """``delta**alpha * (1 - delta)**beta`` with ``0**0 = 1``."""
    if alpha < 0 or beta < 0:
        raise ValueError("exponents must be nonnegative")
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta:.6g}")
    return delta**alpha * (1.0 - delta) ** beta


@dataclass(frozen=True)
class MeasureRecord:
    n_particles: int
    s_r: float
    s_k: float
    s: float
    d_r: float
    d_k: float
    d: float
    msr: float
    kinetic: float
    s_min: float
    s_max: float
    delta: float
    omega: float
    c: float

    def check(self, tol=BOUND_TOL, sum_tol=1e-10):
        """Raise :class:`BoundViolation` if any record invariant fails."""
        if abs(self.s - (self.s_r + self.s_k)) > sum_tol * max(1.0, abs(self.s)):
            raise BoundViolation("S != S_r + S_k")
        if self.s < EUR_BOUND - tol:
            raise BoundViolation(f"S={self.s:.10g} below the uncertainty floor {EUR_BOUND:.10g}")
        if not self.s_min - tol <= self.s <= self.s_max + tol:
            raise BoundViolation(
                f"S={self.s:.10g} outside [S_min, S_max]=[{self.s_min:.10g}, {self.s_max:.10g}]"
            )
        if not 0.0 < self.delta <= 1.0:
            raise BoundViolation(f"delta={self.delta:.10g} outside (0, 1]")
        if self.c < 0:
            raise BoundViolation("negative complexity")
        return self

    def as_row(self, system):
        return (system, self.n_particles, self.s_r, self.s_k, self.s, self.d_r, self.d_k,
                self.d, self.msr, self.kinetic, self.s_min, self.s_max, self.delta,
                self.omega, self.c)


def measure_pair(pair):
    """Full :class:`MeasureRecord` for a density pair."""
    s_r = shannon_entropy(pair.rho)
    s_k = shannon_entropy(pair.nk)
    d_r = disequilibrium(pair.rho)
    d_k = disequilibrium(pair.nk)
    msr = second_moment(pair.rho)
    kinetic = 0.5 * second_moment(pair.nk)
    s = s_r + s_k
    s_min, s_max = entropy_bounds(msr, kinetic)
    delta, omega = landsberg(s, s_max)
    d = combined_disequilibrium(d_r, d_k)
    rec = MeasureRecord(pair.n_particles, s_r, s_k, s, d_r, d_k, d, msr, kinetic,
                        s_min, s_max, delta, omega, lmc_complexity(s, d))
    return rec.check()


@dataclass(frozen=True)
class LogFit:
    a: float
    b: float
    r: float


@dataclass
class Sweep:
    """Records of one system ordered by particle number."""

    system: str
    records: list = field(default_factory=list)
    s_fit: LogFit | None = None
    s_max_fit: LogFit | None = None

    def __post_init__(self):
        ns = [r.n_particles for r in self.records]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("sweep records must have strictly increasing N")

    def __len__(self):
        return len(self.records)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def n_values(self):
        return [r.n_particles for r in self.records]

    def subset(self, n_values):
        keep = set(n_values)
        return replace(self, records=[r for r in self.records if r.n_particles in keep],
                       s_fit=None, s_max_fit=None)


def log_fit(sweep, target="S"):
    """Least-squares line ``target = a + b ln N``.

    Parameters
    ----------
    sweep : Sweep
    target : {"S", "S_max"}

    Returns
    -------
    LogFit
        Intercept, slope and Pearson correlation (nan for a flat target).
    """
    attr = {"S": "s", "S_max": "s_max"}.get(target)
    if attr is None:
        raise ValueError(f"target must be 'S' or 'S_max', got {target!r}")
    if len(sweep) < 3:
        raise ValueError(f"log fit needs at least 3 records, got {len(sweep)}")
    x = np.log(np.array(sweep.n_values, dtype=float))
    y = sweep.column(attr)
    if np.ptp(y) == 0.0:
        return LogFit(float(y[0]), 0.0, math.nan)
    res = stats.linregress(x, y)
    return LogFit(float(res.intercept), float(res.slope), float(res.rvalue))


def build_sweep(system, pairs):
    """Measure each pair and attach the ``S`` and ``S_max`` log-law fits."""
    records = sorted((measure_pair(p) for p in pairs), key=lambda r: r.n_particles)
    sweep = Sweep(system, records)
    if len(sweep) >= 3:
        sweep.s_fit = log_fit(sweep, "S")
        sweep.s_max_fit = log_fit(sweep, "S_max")
    return sweep
