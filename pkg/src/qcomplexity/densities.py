"""
Model density pairs rho(r), n(k) for the complexity sweeps.

All densities are per particle (normalized to one) and spherically
symmetric. Units are hbar = m = 1: oscillator lengths for the shell model
and the trapped condensate, bohr for atoms.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.linalg import solveh_banded
from scipy.optimize import minimize_scalar
from scipy.special import eval_gegenbauer, eval_genlaguerre, gammaln

from .transforms import (
    FOUR_PI,
    RadialFunction,
    RadialGrid,
    Space,
    TransformPlan,
    conjugate_grids,
    hankel_transform,
    integrate_radial,
)

__all__ = [
    "DensityPair",
    "Orbital",
    "OrbitalSet",
    "HO_MAGIC_NUMBERS",
    "CLOSED_SHELL_ATOMS",
    "GPConvergenceError",
    "GPSolution",
    "gaussian_pair",
    "ho_shell_pair",
    "hydrogenic_atom_pair",
    "gp_ground_state_pair",
    "solve_gp",
    "load_tabulated_pair",
    "read_density_table",
    "write_density_table",
    "slater_configuration",
]

HO_MAGIC_NUMBERS = (2, 8, 20, 40, 70, 112, 168)
CLOSED_SHELL_ATOMS = (2, 10, 18, 36, 54)
NORM_TOL = 1e-6
L_LETTERS = "spdfghik"


class GPConvergenceError(RuntimeError):
    """Imaginary-time relaxation stopped before the energy settled."""

    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


# --------------------------------------------------------------------------
# Orbitals
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Orbital:
    """One occupied radial orbital ``u_nl = r R_nl`` and its momentum partner.

    ``n`` is the principal quantum number for hydrogenic orbitals and the
    radial (node) quantum number for oscillator orbitals.
    """

    n: int
    l: int
    occupancy: float
    position: object = field(repr=False)  # callable r -> u(r)
    momentum: object = field(repr=False)  # callable k -> u~(k)
    extent: float = 10.0  # r beyond which u is negligible
    k_extent: float = 10.0  # k beyond which u~ is negligible

    def u(self, r):
        return self.position(np.asarray(r, dtype=float))

    def u_k(self, k):
        return self.momentum(np.asarray(k, dtype=float))


@dataclass(frozen=True)
class OrbitalSet:
    orbitals: tuple
    fermions: bool = True

    def __post_init__(self):
        for orb in self.orbitals:
            if orb.l < 0 or orb.occupancy <= 0:
                raise ValueError(f"invalid orbital {orb}")
            if self.fermions and orb.occupancy > 2 * (2 * orb.l + 1):
                raise ValueError(
                    f"occupancy {orb.occupancy} exceeds 2(2l+1) for l={orb.l}"
                )

    def __iter__(self):
        return iter(self.orbitals)

    def __len__(self):
        return len(self.orbitals)

    @property
    def n_particles(self):
        return sum(o.occupancy for o in self.orbitals)

    def density(self, x, space=Space.POSITION):
        x = np.asarray(x, dtype=float)
        total = np.zeros_like(x)
        for orb in self.orbitals:
            u = orb.u(x) if space is Space.POSITION else orb.u_k(x)
            total += orb.occupancy * u * u
        return total / (FOUR_PI * x * x * self.n_particles)

    def transform_extent(self):
        return max(o.extent for o in self.orbitals)

    def transform_points(self):
        """Point count for matched transform grids, capped at 4095."""
        r_max = self.transform_extent()
        k_max = max(o.k_extent for o in self.orbitals)
        n = int(math.ceil(2.0 * r_max * k_max / math.pi))
        return int(min(4095, max(511, n)))


# --------------------------------------------------------------------------
# Density pairs
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DensityPair:
    """Matched per-particle densities of one system at one particle number."""

    rho: RadialFunction
    nk: RadialFunction
    n_particles: int
    model: str
    orbitals: OrbitalSet | None = field(default=None, repr=False, compare=False)
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if self.rho.space is not Space.POSITION or self.nk.space is not Space.MOMENTUM:
            raise ValueError("rho must be a position density and nk a momentum density")
        for name, f in (("rho", self.rho), ("nk", self.nk)):
            norm = f.norm()
            if abs(norm - 1.0) > NORM_TOL:
                raise ValueError(f"{name} is not normalized: 4 pi int f x^2 dx = {norm:.10g}")


def _pair_from_orbitals(orbitals, r_grid, k_grid, n_particles, model, **params):
    rho = RadialFunction(r_grid, orbitals.density(r_grid.points, Space.POSITION), Space.POSITION)
    nk = RadialFunction(k_grid, orbitals.density(k_grid.points, Space.MOMENTUM), Space.MOMENTUM)
    return DensityPair(rho, nk, int(n_particles), model, orbitals, params)


# ---- harmonic oscillator --------------------------------------------------


def _ho_radial(n, l, b):
    """``u_nl(r) = r R_nl(r)`` for the 3-D oscillator with length ``b``."""
    log_norm = 0.5 * (math.log(2.0) + math.lgamma(n + 1) - 3 * math.log(b) - math.lgamma(n + l + 1.5))
    norm = math.exp(log_norm)

    def u(r):
        x = r / b
        return norm * r * x**l * np.exp(-0.5 * x * x) * eval_genlaguerre(n, l + 0.5, x * x)

    return u


def ho_orbital(n, l, b, occupancy):
    """Oscillator orbital; its momentum partner is the same form with ``1/b``.

    The overall phase ``(-1)^n (-i)^l`` of the momentum orbital is dropped;
    only ``|u~|^2`` enters densities.
    """
    shell = 2 * n + l
    reach = math.sqrt(2 * shell + 3) + 8.0
    return Orbital(
        n=n,
        l=l,
        occupancy=occupancy,
        position=_ho_radial(n, l, b),
        momentum=_ho_radial(n, l, 1.0 / b),
        extent=reach * b,
        k_extent=reach / b,
    )


def _ho_grids(shells, b, points_per_length=40):
    reach = math.sqrt(2 * shells + 3) + 8.0
    n = int(math.ceil(reach * points_per_length))
    return RadialGrid.uniform(b * reach / n, n), RadialGrid.uniform(reach / (b * n), n)


def gaussian_pair(width):
    """Gaussian density with width ``w`` and its conjugate of width ``1/w``.

    ``rho(r) = (pi w^2)^(-3/2) exp(-r^2/w^2)``; the pair saturates the
    entropic uncertainty bound.
    """
    if not width > 0:
        raise ValueError(f"width must be positive, got {width!r}")
    orbitals = OrbitalSet((ho_orbital(0, 0, float(width), 1),))
    r_grid, k_grid = _ho_grids(0, float(width))
    return _pair_from_orbitals(orbitals, r_grid, k_grid, 1, "gaussian", width=float(width))


def ho_shells(n_particles):
    """``[(n_r, l, occupancy), ...]`` filling oscillator shells up to ``n_particles``."""
    if n_particles not in HO_MAGIC_NUMBERS:
        valid = ", ".join(str(m) for m in HO_MAGIC_NUMBERS)
        raise ValueError(
            f"N={n_particles} is not a closed oscillator shell; valid values: {valid}"
        )
    levels = []
    filled = 0
    shell = 0
    while filled < n_particles:
        for l in range(shell % 2, shell + 1, 2):
            levels.append(((shell - l) // 2, l, 2 * (2 * l + 1)))
            filled += 2 * (2 * l + 1)
        shell += 1
    return levels


def ho_shell_pair(n_particles, length_scale=1.0):
    """Closed-shell 3-D oscillator density pair for ``n_particles`` fermions."""
    if not length_scale > 0:
        raise ValueError(f"length_scale must be positive, got {length_scale!r}")
    b = float(length_scale)
    levels = ho_shells(n_particles)
    orbitals = OrbitalSet(tuple(ho_orbital(n, l, b, occ) for n, l, occ in levels))
    top_shell = max(2 * n + l for n, l, _ in levels)
    r_grid, k_grid = _ho_grids(top_shell, b)
    return _pair_from_orbitals(orbitals, r_grid, k_grid, n_particles, "ho", length_scale=b)


# ---- screened hydrogenic atoms --------------------------------------------

# Madelung filling order through xenon.
SUBSHELL_ORDER = ((1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (4, 0), (3, 2),
                  (4, 1), (5, 0), (4, 2), (5, 1))
MAX_Z = 54


def _slater_group(n, l):
    # (1s)(2s,2p)(3s,3p)(3d)(4s,4p)(4d)(4f)(5s,5p)...: s and p share a group
    return (n, 0) if l <= 1 else (n, l)


def _group_rank(group):
    n, l = group
    # groups ordered by n, with nd after (ns,np) of the same n
    return (n, l)


def slater_configuration(z):
    """Ground configuration with Slater effective charges.

    Returns
    -------
    list of (n, l, occupancy, z_eff)
    """
    if not 1 <= z <= MAX_Z or int(z) != z:
        raise ValueError(f"atomic number must be an integer in [1, {MAX_Z}], got {z!r}")
    z = int(z)
    config = []
    left = z
    for n, l in SUBSHELL_ORDER:
        if left == 0:
            break
        occ = min(left, 2 * (2 * l + 1))
        config.append((n, l, occ))
        left -= occ

    result = []
    for n, l, occ in config:
        group = _slater_group(n, l)
        shield = 0.0
        for n2, l2, occ2 in config:
            g2 = _slater_group(n2, l2)
            if g2 == group:
                same = occ2 - 1 if (n2, l2) == (n, l) else occ2
                shield += same * (0.30 if n == 1 else 0.35)
            elif l <= 1:
                if n2 == n - 1:
                    shield += 0.85 * occ2
                elif n2 < n - 1:
                    shield += 1.00 * occ2
            elif _group_rank(g2) < _group_rank(group):
                shield += 1.00 * occ2
        result.append((n, l, occ, z - shield))
    return result


def _hydrogenic_radial(n, l, z):
    """``u_nl(r) = r R_nl(r)`` for nuclear charge ``z``."""
    log_norm = 0.5 * (3 * math.log(2.0 * z / n) + gammaln(n - l) - math.log(2.0 * n) - gammaln(n + l + 1))
    norm = math.exp(log_norm)

    def u(r):
        x = 2.0 * z * r / n
        return norm * r * x**l * np.exp(-0.5 * x) * eval_genlaguerre(n - l - 1, 2 * l + 1, x)

    return u


def _hydrogenic_momentum(n, l, z):
    """Momentum partner ``k F_nl(k)`` of a hydrogenic orbital, up to phase."""
    log_norm = (0.5 * (math.log(2.0 / math.pi) + gammaln(n - l) - gammaln(n + l + 1))
                + 2 * math.log(n) + (2 * l + 2) * math.log(2.0) + math.lgamma(l + 1)
                - 1.5 * math.log(z))
    norm = math.exp(log_norm)

    def u(k):
        p = n * k / z
        p2 = p * p
        f = norm * p**l / (p2 + 1.0) ** (l + 2) * eval_gegenbauer(n - l - 1, l + 1, (p2 - 1.0) / (p2 + 1.0))
        return k * f

    return u


def hydrogenic_orbital(n, l, z, occupancy):
    return Orbital(
        n=n,
        l=l,
        occupancy=occupancy,
        position=_hydrogenic_radial(n, l, z),
        momentum=_hydrogenic_momentum(n, l, z),
        extent=n * (n + 30.0) / z,
        k_extent=60.0 * z / n,
    )


_ATOM_R_GRID = RadialGrid.log_uniform(1e-5, 150.0, 2600)
_ATOM_K_GRID = RadialGrid.log_uniform(1e-5, 1e7, 3000)


def hydrogenic_atom_pair(z):
    """Screened hydrogenic atom: Slater effective charge per subshell."""
    config = slater_configuration(z)
    orbitals = OrbitalSet(tuple(hydrogenic_orbital(n, l, ze, occ) for n, l, occ, ze in config))
    return _pair_from_orbitals(orbitals, _ATOM_R_GRID, _ATOM_K_GRID, int(z), "atom", z=int(z))


# ---- trapped condensate ---------------------------------------------------


@dataclass(frozen=True)
class GPSolution:
    grid: RadialGrid
    u: np.ndarray
    coupling: float
    mu: float
    energy: float
    energies: np.ndarray = field(repr=False)
    residual: float = 0.0
    iterations: int = 0


def _laplacian_bands(n, h):
    """Upper banded storage of ``-1/2 d^2/dr^2`` (4th-order, odd extension at r=0)."""
    c = 1.0 / (24.0 * h * h)  # -1/2 * 1/(12 h^2)
    ab = np.zeros((3, n))
    ab[2, :] = 30.0 * c
    ab[2, 0] = 29.0 * c  # u_{-1} = -u_1
    ab[2, -1] = 29.0 * c  # odd extension about the outer wall
    ab[1, 1:] = -16.0 * c
    ab[0, 2:] = 1.0 * c
    return ab


def _apply_banded(ab, u):
    out = ab[2] * u
    out[:-1] += ab[1, 1:] * u[1:]
    out[1:] += ab[1, 1:] * u[:-1]
    out[:-2] += ab[0, 2:] * u[2:]
    out[2:] += ab[0, 2:] * u[:-2]
    return out


def _gp_energy(kin_ab, u, r, h, g):
    pot = 0.5 * r * r
    kin = h * np.dot(u, _apply_banded(kin_ab, u))
    ext = h * np.sum(pot * u * u)
    inter = 0.5 * g * h * np.sum(u**4 / (FOUR_PI * r * r))
    return kin + ext + inter


def _gp_residual(kin_ab, u, r, h, g):
    hu = _apply_banded(kin_ab, u) + (0.5 * r * r + g * u * u / (FOUR_PI * r * r)) * u
    mu = h * np.dot(u, hu)
    return mu, math.sqrt(h * np.sum((hu - mu * u) ** 2))


def _gaussian_guess_width(g):
    if g == 0:
        return 1.0
    c = g / (2.0 * (2.0 * np.pi) ** 1.5)
    res = minimize_scalar(lambda s: 0.75 / s**2 + 0.75 * s**2 + c / s**3,
                          bounds=(0.1, 50.0), method="bounded", options={"xatol": 1e-10})
    return float(res.x)


def solve_gp(coupling, n_points=2048, r_max=20.0, dt=1e-3, tol=1e-10, residual_tol=1e-6,
             max_iter=400_000):
    """Ground state of ``-1/2 lap psi + r^2/2 psi + g |psi|^2 psi = mu psi``.

    ``psi`` is normalized to one and spherically symmetric. The radial
    function ``u = sqrt(4 pi) r psi`` is relaxed in imaginary time with a
    semi-implicit backward-Euler step (nonlinear term lagged) and renormalized
    after every step. Iteration stops when the relative energy change per
    step falls below ``tol`` and the eigen-residual ``||H u - mu u||`` below
    ``residual_tol`` (checked every 100 steps; pass ``None`` to skip).

    Raises
    ------
    GPConvergenceError
        If ``max_iter`` steps do not reach ``tol``.
    """
    if coupling < 0:
        raise ValueError(f"coupling must be nonnegative, got {coupling!r}")
    g = float(coupling)
    h = r_max / (n_points + 1)
    grid = RadialGrid.uniform(h, n_points)
    r = grid.points
    kin_ab = _laplacian_bands(n_points, h)
    pot = 0.5 * r * r

    s = _gaussian_guess_width(g)
    u = r * np.exp(-0.5 * (r / s) ** 2)
    u /= math.sqrt(h * np.dot(u, u))

    energy = _gp_energy(kin_ab, u, r, h, g)
    energies = [energy]
    ab = kin_ab.copy()
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        ab[0:2] = dt * kin_ab[0:2]
        ab[2] = 1.0 + dt * (kin_ab[2] + pot + g * u * u / (FOUR_PI * r * r))
        u = solveh_banded(ab, u, check_finite=False)
        u /= math.sqrt(h * np.dot(u, u))
        new = _gp_energy(kin_ab, u, r, h, g)
        energies.append(new)
        change = abs(new - energy) / abs(new)
        energy = new
        if change < tol and (residual_tol is None or it % 100 == 0):
            mu, residual = _gp_residual(kin_ab, u, r, h, g)
            if residual_tol is None or residual < residual_tol:
                converged = True
                break

    mu, residual = _gp_residual(kin_ab, u, r, h, g)
    if not converged:
        raise GPConvergenceError(
            f"GP relaxation did not converge in {max_iter} steps "
            f"(last relative energy change {change:.3e}, residual {residual:.3e})",
            residual,
            it,
        )
    return GPSolution(grid, u, g, float(mu), float(energy), np.array(energies), float(residual), it)


def gp_ground_state_pair(n_atoms, coupling, **solver_options):
    """Condensate density pair for ``n_atoms`` bosons.

    ``coupling`` is the per-atom interaction strength in trap units; the
    mean-field nonlinearity is ``g = n_atoms * coupling``.
    """
    if int(n_atoms) != n_atoms or n_atoms < 1:
        raise ValueError(f"n_atoms must be a positive integer, got {n_atoms!r}")
    if coupling < 0:
        raise ValueError(f"coupling must be nonnegative, got {coupling!r}")
    sol = solve_gp(n_atoms * coupling, **solver_options)
    r_grid = sol.grid
    _, k_grid = conjugate_grids(r_grid.step * (len(r_grid) + 1), len(r_grid))
    plan = TransformPlan.build(r_grid, k_grid, 0)
    uk = hankel_transform(sol.u, 0, plan)
    r, k = r_grid.points, k_grid.points
    rho = RadialFunction(r_grid, sol.u**2 / (FOUR_PI * r * r), Space.POSITION)
    nk_vals = uk**2 / (FOUR_PI * k * k)
    nk_vals /= integrate_radial((k_grid, nk_vals), 2)
    nk = RadialFunction(k_grid, nk_vals, Space.MOMENTUM)
    return DensityPair(rho, nk, int(n_atoms), "gp",
                       params={"coupling": float(coupling), "g": sol.coupling,
                               "mu": sol.mu, "energy": sol.energy,
                               "iterations": sol.iterations, "residual": sol.residual})


# ---- tabulated densities --------------------------------------------------

MIN_TABLE_ROWS = 8
RENORM_LIMIT = 0.01


def read_density_table(path):
    """Parse an ``x,f`` density table.

    Returns
    -------
    x, f : ndarray
    """
    path = Path(path)
    xs, fs = [], []
    header_seen = False
    with path.open(encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            if not header_seen:
                if [c.strip() for c in text.split(",")] != ["x", "f"]:
                    raise ValueError(f"{path}: line {lineno}: expected header 'x,f', got {text!r}")
                header_seen = True
                continue
            row = next(csv.reader([text]))
            if len(row) != 2:
                raise ValueError(f"{path}: line {lineno}: expected 2 fields, got {len(row)}")
            try:
                x, f = float(row[0]), float(row[1])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: malformed row {text!r}") from None
            if not (math.isfinite(x) and math.isfinite(f)):
                raise ValueError(f"{path}: line {lineno}: non-finite value")
            if x < 0:
                raise ValueError(f"{path}: line {lineno}: negative abscissa {x!r}")
            if f < 0:
                raise ValueError(f"{path}: line {lineno}: negative density value {f!r}")
            if xs and x <= xs[-1]:
                raise ValueError(f"{path}: line {lineno}: abscissae must be strictly increasing")
            xs.append(x)
            fs.append(f)
    if not header_seen:
        raise ValueError(f"{path}: missing header 'x,f'")
    if len(xs) < MIN_TABLE_ROWS:
        raise ValueError(f"{path}: need at least {MIN_TABLE_ROWS} rows, got {len(xs)}")
    return np.array(xs), np.array(fs)


def write_density_table(path, x, f, comment=None):
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("x,f\n")
        for xi, fi in zip(x, f):
            fh.write(f"{xi:.17g},{fi:.17g}\n")


def _resample(x, f, space, n_points, label):
    interp = PchipInterpolator(x, f, extrapolate=False)
    grid = RadialGrid.gauss_legendre(0.0, float(x[-1]), n_points)
    vals = interp(grid.points)
    # below the first tabulated point hold the first value
    vals = np.where(grid.points < x[0], f[0], vals)
    vals = np.clip(np.nan_to_num(vals, nan=0.0), 0.0, None)
    norm = integrate_radial((grid, vals), 2)
    if abs(norm - 1.0) >= RENORM_LIMIT:
        raise ValueError(f"{label}: norm 4 pi int f x^2 dx = {norm:.6g} deviates from 1 by >= 1%")
    return RadialFunction(grid, vals / norm, space)


def load_tabulated_pair(position_file, momentum_file, n_particles, n_points=1200, model="file"):
    """Density pair from two ``x,f`` tables.

    Tables are interpolated (monotone cubic) onto a Gauss-Legendre grid over
    the tabulated range and renormalized when the norm is within 1% of one.
    """
    if int(n_particles) != n_particles or n_particles < 1:
        raise ValueError(f"n_particles must be a positive integer, got {n_particles!r}")
    xr, fr = read_density_table(position_file)
    xk, fk = read_density_table(momentum_file)
    rho = _resample(xr, fr, Space.POSITION, n_points, str(position_file))
    nk = _resample(xk, fk, Space.MOMENTUM, n_points, str(momentum_file))
    return DensityPair(rho, nk, int(n_particles), model,
                       params={"position_file": str(position_file),
                               "momentum_file": str(momentum_file)})
