"""
Radial quadrature grids and spherical Bessel (Hankel) transforms.

Every radial integral in the package goes through :class:`RadialGrid`:
a set of strictly increasing abscissae with plain ``dx`` weights, so that
``sum(w * f * x**2)`` approximates ``int_0^inf f(x) x^2 dx``.

Three grid families are provided:

* ``uniform``: ``x_i = i h`` with trapezoid weights. For integrands that
  extend to even functions of ``x`` (all oscillator-type densities and the
  products ``u_l(r) * (kr) j_l(kr)``) the rule converges spectrally.
* ``log_uniform``: trapezoid in ``ln x``. Handles densities that span many
  length scales (screened hydrogenic atoms).
* ``gauss_legendre``: Gauss-Legendre on a finite interval, for compactly
  supported test densities.

Orbital transforms use the convention

    u~(k) = sqrt(2/pi) int_0^inf (kr) j_l(kr) u(r) dr,

with ``u = r R(r)``; it keeps ``int u^2 dr = int u~^2 dk`` and is its own
inverse, so the same plan type maps r -> k and k -> r.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import spherical_jn

FOUR_PI = 4.0 * np.pi


class Space(enum.Enum):
    POSITION = "position"
    MOMENTUM = "momentum"


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Quadrature grid on ``(0, inf)``.

    Parameters
    ----------
    points : 1-D ndarray
        Strictly increasing, positive abscissae.
    weights : 1-D ndarray
        Positive ``dx`` weights (the ``x**2`` Jacobian is applied by callers).
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x = np.ascontiguousarray(self.points, dtype=float)
        w = np.ascontiguousarray(self.weights, dtype=float)
        if x.ndim != 1 or x.shape != w.shape:
            raise ValueError("points and weights must be 1-D arrays of equal length")
        if x.size == 0:
            raise ValueError("empty grid")
        if np.any(x <= 0) or np.any(np.diff(x) <= 0):
            raise ValueError("grid points must be positive and strictly increasing")
        if np.any(w <= 0):
            raise ValueError("grid weights must be positive")
        x.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", x)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.points.size

    @property
    def step(self):
        """Spacing of a uniform grid (first interval otherwise)."""
        return float(self.points[0]) if self.points.size == 1 else float(self.points[1] - self.points[0])

    @classmethod
    def uniform(cls, step, n):
        """Points ``step * (1..n)`` with trapezoid weights ``step``."""
        if step <= 0 or n < 1:
            raise ValueError("uniform grid needs step > 0 and n >= 1")
        x = step * np.arange(1, n + 1, dtype=float)
        return cls(x, np.full(n, float(step)))

    @classmethod
    def log_uniform(cls, xmin, xmax, n):
        """Trapezoid rule in ``ln x`` on ``[xmin, xmax]``.

        Both ends are assumed to carry negligible weight, so the interior
        rule ``w_i = x_i h`` is used without end corrections.
        """
        if not 0 < xmin < xmax or n < 2:
            raise ValueError("log grid needs 0 < xmin < xmax and n >= 2")
        u = np.linspace(np.log(xmin), np.log(xmax), n)
        h = u[1] - u[0]
        x = np.exp(u)
        return cls(x, x * h)

    @classmethod
    def gauss_legendre(cls, a, b, n):
        """Gauss-Legendre nodes mapped to ``[a, b]`` with ``0 <= a < b``."""
        if not 0 <= a < b or n < 1:
            raise ValueError("Gauss-Legendre grid needs 0 <= a < b and n >= 1")
        t, wt = leggauss(n)
        x = 0.5 * (b - a) * (t + 1.0) + a
        return cls(x, 0.5 * (b - a) * wt)


def conjugate_grids(r_max, n):
    """Matched uniform grids for position and momentum transforms.

    Uses ``r_i = i h`` and ``k_j = j pi / ((n + 1) h)`` with ``h = r_max/(n+1)``.
    On this pair the ``l = 0`` kernel is a scaled discrete sine transform,
    so forward followed by backward transform is the identity to rounding.

    Returns
    -------
    r_grid, k_grid : RadialGrid
    """
    h = r_max / (n + 1)
    hk = np.pi / ((n + 1) * h)
    return RadialGrid.uniform(h, n), RadialGrid.uniform(hk, n)


@dataclass(frozen=True, eq=False)
class RadialFunction:
    """Nonnegative samples of a radial function on a grid."""

    grid: RadialGrid
    values: np.ndarray
    space: Space = Space.POSITION

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.points.shape:
            raise ValueError(
                f"values have shape {v.shape}, grid has {self.grid.points.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("radial function has non-finite samples")
        if np.any(v < 0):
            i = int(np.argmax(v < 0))
            raise ValueError(f"negative sample {v[i]:.6g} at x={self.grid.points[i]:.6g}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def x(self):
        return self.grid.points

    def norm(self):
        return integrate_radial(self, 2)

    def __call__(self, x):
        """Linear interpolation, zero outside the sampled range."""
        return np.interp(x, self.grid.points, self.values, left=self.values[0], right=0.0)


def integrate_radial(f, weight_power=2):
    """Return ``4 pi int f(x) x**weight_power dx``.

    ``weight_power=2`` is the normalization integral of a 3-D density and
    ``weight_power=4`` its second moment ``<x^2>``.

    Parameters
    ----------
    f : RadialFunction or (RadialGrid, ndarray)
        Integrand samples. A bare ``(grid, values)`` tuple is accepted so the
        routine also works for signed integrands.
    weight_power : int
        Power of ``x`` in the measure.
    """
    if isinstance(f, RadialFunction):
        grid, values = f.grid, f.values
    else:
        grid, values = f
        values = np.asarray(values, dtype=float)
    if len(grid) == 0:
        raise ValueError("empty grid")
    if not np.all(np.isfinite(values)):
        raise ValueError("integrand is not finite on the grid")
    x = grid.points
    return float(FOUR_PI * np.sum(grid.weights * values * x**weight_power))


def spherical_bessel(l, x):
    """Spherical Bessel function ``j_l(x)`` for integer ``l >= 0``."""
    if l < 0:
        raise ValueError("angular momentum must be >= 0")
    return spherical_jn(int(l), x)


@dataclass(frozen=True, eq=False)
class TransformPlan:
    """Precomputed dense kernel for an order-``l`` orbital transform.

    ``kernel[j, i] = sqrt(2/pi) (y_j x_i) j_l(y_j x_i) w_i`` so that
    ``kernel @ u`` evaluates the transform of samples ``u`` on ``source``
    at the points of ``target``.
    """

    source: RadialGrid
    target: RadialGrid
    l: int
    kernel: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.l < 0:
            raise ValueError("angular momentum must be >= 0")
        if self.kernel.shape != (len(self.target), len(self.source)):
            raise ValueError("kernel shape does not match target x source grids")

    @classmethod
    def build(cls, source, target, l):
        if l < 0:
            raise ValueError("angular momentum must be >= 0")
        xy = np.outer(target.points, source.points)
        kernel = np.sqrt(2.0 / np.pi) * xy * spherical_bessel(l, xy) * source.weights[None, :]
        kernel.setflags(write=False)
        return cls(source, target, int(l), kernel)

    def inverse(self):
        """Plan mapping back from ``target`` to ``source``."""
        return TransformPlan.build(self.target, self.source, self.l)


def hankel_transform(u, l, plan, check_norm=True):
    """Transform radial orbital samples ``u = r R(r)`` to conjugate space.

    Parameters
    ----------
    u : 1-D ndarray
        Orbital samples on ``plan.source``; expected unit-normalized.
    l : int
        Angular momentum; must agree with the plan.
    plan : TransformPlan
    check_norm : bool
        Reject inputs with ``|int u^2 - 1| > 1e-6``.

    Returns
    -------
    ndarray
        Samples of ``u~`` on ``plan.target``.
    """
    if l < 0:
        raise ValueError("angular momentum must be >= 0")
    if l != plan.l:
        raise ValueError(f"plan built for l={plan.l}, got l={l}")
    u = np.asarray(u, dtype=float)
    if u.shape != plan.source.points.shape:
        raise ValueError("orbital samples do not match the plan's source grid")
    if check_norm:
        norm = float(np.sum(plan.source.weights * u * u))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"orbital is not normalized (int u^2 = {norm:.8g})")
    return plan.kernel @ u


def orbital_norm(grid, u):
    """``int u^2 dx`` on ``grid`` (no 4 pi, no x^2)."""
    return float(np.sum(grid.weights * np.asarray(u) ** 2))


def roundtrip_residual(pair):
    """Accuracy of the forward/backward orbital transforms for a density pair.

    Each position orbital of ``pair.orbitals`` is sampled on a matched grid,
    transformed to momentum space and back, and the density rebuilt from the
    back-transformed orbitals is compared with the directly sampled one.

    Returns
    -------
    float
        ``max |rho_back - rho| / max rho`` over the transform grid.
    """
    orbitals = pair.orbitals
    if orbitals is None:
        raise ValueError("pair carries no orbital set; roundtrip needs orbitals")
    r_grid, k_grid = conjugate_grids(orbitals.transform_extent(), orbitals.transform_points())
    r = r_grid.points
    rho = np.zeros_like(r)
    rho_back = np.zeros_like(r)
    plans = {}
    for orb in orbitals:
        if orb.l not in plans:
            fwd = TransformPlan.build(r_grid, k_grid, orb.l)
            plans[orb.l] = (fwd, fwd.inverse())
        fwd, bwd = plans[orb.l]
        u = orb.u(r)
        u_back = hankel_transform(hankel_transform(u, orb.l, fwd, check_norm=False),
                                  orb.l, bwd, check_norm=False)
        rho += orb.occupancy * u * u
        rho_back += orb.occupancy * u_back * u_back
    scale = FOUR_PI * r * r * orbitals.n_particles
    rho /= scale
    rho_back /= scale
    return float(np.max(np.abs(rho_back - rho)) / np.max(rho))
