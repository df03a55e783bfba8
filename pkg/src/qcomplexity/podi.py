"""
Trend regions of Gamma_{alpha,beta}(N) and the order-disorder index fit.

Gamma is evaluated on an (alpha, beta) mesh in log form,
``ln Gamma_i = alpha ln Delta_i + beta ln Omega_i``, so large exponents do not
underflow. Trend labels are computed on ``Gamma_i / max_i Gamma_i``; the
relative tolerance makes the classification invariant under that rescaling.

The middle ("convex") region is the one where Gamma rises and then falls
over the N sequence, i.e. has a single interior maximum. For a monotone
Delta(N) this is the only non-monotone shape Gamma can take.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .measures import Sweep

TREND_TOL = 1e-9
CHUNK_ROWS = 32


class Trend(enum.IntEnum):
    DECREASING = 0
    CONVEX = 1
    INCREASING = 2
    IRREGULAR = 3

    @property
    def code(self):
        return "DVIX"[self.value]

    @classmethod
    def from_code(cls, code):
        try:
            return cls("DVIX".index(code))
        except ValueError:
            raise ValueError(f"unknown trend code {code!r}") from None


class Character(enum.Enum):
    ORDER = "Order"
    DISORDER = "Disorder"
    BOUNDARY = "Boundary"


class TrendError(ValueError):
    """C(N) has no usable trend (irregular or degenerate)."""


def _classify_rows(v, tol):
    """Trend codes along the last axis of positive arrays ``v`` (max-scaled)."""
    d = np.diff(v, axis=-1)
    pos = d > tol
    neg = d < -tol
    any_pos = pos.any(axis=-1)
    any_neg = neg.any(axis=-1)
    m = d.shape[-1]
    idx = np.arange(m)
    last_pos = np.where(pos, idx, -1).max(axis=-1)
    first_neg = np.where(neg, idx, m).min(axis=-1)
    out = np.full(v.shape[:-1], Trend.IRREGULAR, dtype=np.int8)
    out[any_neg & ~any_pos] = Trend.DECREASING
    out[any_pos & ~any_neg] = Trend.INCREASING
    out[any_pos & any_neg & (last_pos < first_neg)] = Trend.CONVEX
    return out


def classify_trend(values, tolerance=TREND_TOL):
    """Classify an ordered sequence.

    Differences within ``tolerance * max|values|`` count as flat. A sequence
    that never moves beyond the tolerance is :attr:`Trend.IRREGULAR`.

    Examples
    --------
    >>> classify_trend([3, 2, 1]).name
    'DECREASING'
    >>> classify_trend([1, 3, 1]).name
    'CONVEX'
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size < 3:
        raise ValueError("trend classification needs at least 3 values")
    scale = np.max(np.abs(v))
    if scale == 0:
        return Trend.IRREGULAR
    return Trend(int(_classify_rows(v / scale, tolerance)))


def _log_terms(deltas):
    deltas = np.asarray(deltas, dtype=float)
    if deltas.ndim != 1 or deltas.size < 3:
        raise ValueError("need at least 3 Delta values")
    if np.any(deltas <= 0) or np.any(deltas >= 1):
        raise ValueError("all Delta values must lie strictly inside (0, 1)")
    return np.log(deltas), np.log1p(-deltas)


def gamma_curve(deltas, alpha, beta):
    """``Gamma_{alpha,beta}`` over a Delta sequence (log-form evaluation)."""
    ln_d, ln_o = _log_terms(deltas)
    return np.exp(alpha * ln_d + beta * ln_o)


def mesh_axis(upper, mesh):
    n = int(round(upper / mesh))
    if n < 0 or not math.isclose(n * mesh, upper, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError(f"range {upper!r} is not a whole number of mesh steps {mesh!r}")
    return np.round(np.arange(n + 1) * mesh, 12)


@dataclass(frozen=True, eq=False)
class RegionMap:
    """Trend label of Gamma(N) at every mesh point; ``labels[i_alpha, i_beta]``."""

    alphas: np.ndarray
    betas: np.ndarray
    mesh: float
    labels: np.ndarray
    deltas: np.ndarray

    def __post_init__(self):
        if self.mesh <= 0:
            raise ValueError("mesh must be positive")
        if self.labels.shape != (self.alphas.size, self.betas.size):
            raise ValueError("label grid does not match the alpha/beta axes")

    @property
    def alpha_range(self):
        return float(self.alphas[0]), float(self.alphas[-1])

    @property
    def beta_range(self):
        return float(self.betas[0]), float(self.betas[-1])

    def label_at(self, alpha, beta):
        i = int(round((alpha - self.alphas[0]) / self.mesh))
        j = int(round((beta - self.betas[0]) / self.mesh))
        return Trend(int(self.labels[i, j]))

    def counts(self):
        return {t: int(np.count_nonzero(self.labels == t)) for t in Trend}

    def present(self):
        return {t for t, c in self.counts().items() if c}

    def write_csv(self, path):
        """``alpha,beta,trend`` rows, alpha-major."""
        codes = np.array(list("DVIX"))
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("alpha,beta,trend\n")
            a_txt = [_fmt_mesh(a) for a in self.alphas]
            b_txt = [_fmt_mesh(b) for b in self.betas]
            for i, a in enumerate(a_txt):
                row_codes = codes[self.labels[i]]
                fh.write("".join(f"{a},{b},{c}\n" for b, c in zip(b_txt, row_codes)))


def _fmt_mesh(x):
    return f"{x:.10g}"


def _default_threads():
    return os.cpu_count() or 1


def _run_chunks(n_rows, func, threads):
    starts = range(0, n_rows, CHUNK_ROWS)
    if threads is None:
        threads = _default_threads()
    if threads <= 1:
        for s in starts:
            func(s, min(s + CHUNK_ROWS, n_rows))
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(lambda s: func(s, min(s + CHUNK_ROWS, n_rows)), starts))


def region_map(deltas, alpha_max=20.0, beta_max=20.0, mesh=0.01, threads=None,
               tolerance=TREND_TOL):
    """Label the trend of Gamma_{alpha,beta}(N) over ``[0, alpha_max] x [0, beta_max]``.

    Rows of the alpha axis are processed in independent chunks; each chunk
    writes only its own slice, so the result does not depend on ``threads``.
    """
    if mesh <= 0:
        raise ValueError("mesh must be positive")
    ln_d, ln_o = _log_terms(deltas)
    alphas = mesh_axis(alpha_max, mesh)
    betas = mesh_axis(beta_max, mesh)
    labels = np.empty((alphas.size, betas.size), dtype=np.int8)

    def work(lo, hi):
        lg = (alphas[lo:hi, None, None] * ln_d[None, None, :]
              + betas[None, :, None] * ln_o[None, None, :])
        lg -= lg.max(axis=-1, keepdims=True)
        labels[lo:hi] = _classify_rows(np.exp(lg), tolerance)

    _run_chunks(alphas.size, work, threads)
    labels.setflags(write=False)
    return RegionMap(alphas, betas, float(mesh), labels, np.asarray(deltas, dtype=float))


@dataclass(frozen=True)
class PodiResult:
    alpha: float
    beta: float
    norm: float
    c_trend: Trend
    character: Character
    on_boundary: bool = False

    def as_dict(self):
        return {
            "alpha": f"{self.alpha:.10g}",
            "beta": f"{self.beta:.10g}",
            "norm": f"{self.norm:.10g}",
            "c_trend": self.c_trend.name.capitalize(),
            "character": self.character.value,
        }


def character_of(alpha, beta, mesh):
    if abs(alpha - beta) < 0.5 * mesh:
        return Character.BOUNDARY
    return Character.DISORDER if alpha > beta else Character.ORDER


def norm_grid(c_values, deltas, alphas, betas, threads=None):
    """``sum_i (C_i - Gamma_i)^2`` at every mesh point."""
    c = np.asarray(c_values, dtype=float)
    ln_d, ln_o = _log_terms(deltas)
    if c.shape != ln_d.shape:
        raise ValueError("C and Delta sequences must be aligned")
    out = np.empty((alphas.size, betas.size))

    def work(lo, hi):
        acc = np.zeros((hi - lo, betas.size))
        a = alphas[lo:hi, None]
        for i in range(c.size):  # fixed summation order keeps results bitwise stable
            diff = c[i] - np.exp(a * ln_d[i] + betas[None, :] * ln_o[i])
            acc += diff * diff
        out[lo:hi] = acc

    _run_chunks(alphas.size, work, threads)
    return out


def fit_podi(c_values, deltas, rmap, threads=None, tolerance=TREND_TOL):
    """Best ``(alpha, beta)`` among mesh points whose Gamma trend matches C(N).

    Ties in the norm go to the smallest alpha, then the smallest beta.

    Raises
    ------
    TrendError
        If C(N) is irregular or flat, or no mesh point shares its trend.
    """
    c = np.asarray(c_values, dtype=float)
    if c.size < 3:
        raise TrendError(f"need at least 3 points to fit, got {c.size}")
    if np.asarray(deltas).shape != rmap.deltas.shape:
        raise ValueError("Delta sequence does not match the region map")
    trend = classify_trend(c, tolerance)
    if trend is Trend.IRREGULAR:
        raise TrendError("C(N) has an irregular or degenerate trend; "
                         "restrict the sweep (e.g. to closed shells) first")
    mask = rmap.labels == trend
    if not mask.any():
        raise TrendError(f"no mesh point has a {trend.name.lower()} Gamma trend")
    norms = norm_grid(c, deltas, rmap.alphas, rmap.betas, threads)
    masked = np.where(mask, norms, np.inf)
    flat = int(np.argmin(masked))  # first minimum in alpha-major order
    i, j = divmod(flat, rmap.betas.size)
    alpha, beta = float(rmap.alphas[i]), float(rmap.betas[j])
    edge = i == rmap.alphas.size - 1 or j == rmap.betas.size - 1
    return PodiResult(alpha, beta, float(masked[i, j]), trend,
                      character_of(alpha, beta, rmap.mesh), edge)


@dataclass(frozen=True)
class Frontier:
    slope: float
    correlation: float
    points: int


@dataclass(frozen=True)
class BoundaryLines:
    """Origin lines ``alpha = c beta`` bounding the decreasing and increasing regions.

    ``decreasing_high`` is True when the decreasing region lies at large
    alpha (Delta falling with N), which is the layout of the reference table.
    """

    decreasing: Frontier
    increasing: Frontier
    decreasing_high: bool

    def table_row(self):
        """Region limits as ``alpha >= c beta`` style strings."""
        cd = f"{self.decreasing.slope:.2f}"
        ci = f"{self.increasing.slope:.2f}"
        if self.decreasing_high:
            return {
                "decreasing": f"α ≥ {cd} β",
                "convex": f"α < {cd} β & α ≥ {ci} β",
                "increasing": f"α < {ci} β",
            }
        return {
            "decreasing": f"α ≤ {cd} β",
            "convex": f"α > {cd} β & α ≤ {ci} β",
            "increasing": f"α > {ci} β",
        }


def _origin_fit(betas, alphas):
    b = np.asarray(betas, dtype=float)
    a = np.asarray(alphas, dtype=float)
    slope = float(np.dot(a, b) / np.dot(b, b))
    if b.size < 2 or np.ptp(a) == 0 or np.ptp(b) == 0:
        r = math.nan
    else:
        r = float(np.corrcoef(b, a)[0, 1])
    return Frontier(slope, r, int(b.size))


def boundary_lines(rmap):
    """Fit the decreasing/convex and convex/increasing frontiers.

    Per beta column (beta > 0) the frontier point is the decreasing
    (increasing) cell closest to the convex region. Columns in which the
    frontier sits on the edge of the alpha range are skipped.
    """
    present = rmap.present()
    for t in (Trend.DECREASING, Trend.CONVEX, Trend.INCREASING):
        if t not in present:
            raise ValueError(f"region map has no {t.name.lower()} cells")
    labels = rmap.labels
    alphas = rmap.alphas
    a_grid = np.broadcast_to(alphas[:, None], labels.shape)
    dec_mean = a_grid[labels == Trend.DECREASING].mean()
    inc_mean = a_grid[labels == Trend.INCREASING].mean()
    dec_high = bool(dec_mean > inc_mean)
    a_lo, a_hi = alphas[0], alphas[-1]

    dec_pts, inc_pts = [], []
    for j, beta in enumerate(rmap.betas):
        if beta <= 0:
            continue
        col = labels[:, j]
        d = alphas[col == Trend.DECREASING]
        i = alphas[col == Trend.INCREASING]
        if d.size:
            a = d.min() if dec_high else d.max()
            if a_lo < a < a_hi:
                dec_pts.append((beta, a))
        if i.size:
            a = i.max() if dec_high else i.min()
            if a_lo < a < a_hi:
                inc_pts.append((beta, a))
    if not dec_pts or not inc_pts:
        raise ValueError("region frontiers leave the alpha range in every column")
    dec = _origin_fit(*zip(*dec_pts))
    inc = _origin_fit(*zip(*inc_pts))
    return BoundaryLines(dec, inc, dec_high)


def closed_shell_filter(sweep, shells):
    """Restrict a sweep to the listed particle numbers."""
    have = set(sweep.n_values)
    missing = [n for n in shells if n not in have]
    if missing:
        raise ValueError(f"requested N not in sweep: {', '.join(str(m) for m in missing)}")
    return sweep.subset(shells)


def fit_sweep(sweep: Sweep, alpha_max=20.0, beta_max=20.0, mesh=0.01, threads=None):
    """Region map and PODI fit for a measured sweep."""
    deltas = sweep.column("delta")
    rmap = region_map(deltas, alpha_max, beta_max, mesh, threads)
    return rmap, fit_podi(sweep.column("c"), deltas, rmap, threads)
