"""Physical parameters, velocity grids, Maxwellians, and moment computation.

Everything here is a pure function over immutable inputs; moment reductions
use numpy's fixed-order summation so results are reproducible bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# The temperature convention fixes the Boltzmann constant once and for all.
# Exposed read-only so no caller can introduce silent unit drift.
BOLTZMANN_CONST = 2.0 / 3.0

# Below this number density a cell is treated as vacuum: temperature
# extraction divides by n and becomes meaningless.
VACUUM_DENSITY = 1e-14


class VpbError(Exception):
    """Base class for all package errors."""


class DomainError(VpbError):
    """A physical parameter is outside its admissible range."""


class DegenerateCellError(VpbError):
    """Moment extraction hit a (near-)vacuum cell."""


class MomentConsistencyError(VpbError):
    """Extracted moments are unphysical (e.g. negative temperature)."""


class ConfigurationError(VpbError):
    """Grids, shapes, or run options are inconsistent."""


class NumericalError(VpbError):
    """A linear solve or iteration failed to converge."""


class BudgetExceededError(VpbError):
    """A run exceeded its configured cost or stability budget."""


@dataclass(frozen=True)
class SpeciesParams:
    """Mass, charge, and hard-sphere diameter of one particle species."""

    mass: float
    charge: float
    diameter: float = 1.0

    def __post_init__(self):
        if self.mass <= 0:
            raise DomainError(f"species mass must be positive, got {self.mass}")
        if self.diameter <= 0:
            raise DomainError(f"species diameter must be positive, got {self.diameter}")

    @property
    def k(self) -> float:
        """Specific gas constant k = k_B / m of this species."""
        return BOLTZMANN_CONST / self.mass


@dataclass(frozen=True)
class PlasmaParams:
    """Ion/electron pair with the fixed Boltzmann constant.

    Ions are the heavy, positively charged species; electrons carry the
    negative charge.  Both species share the hard-sphere diameter.
    """

    ion: SpeciesParams
    electron: SpeciesParams
    boltzmann_const: float = BOLTZMANN_CONST

    def __post_init__(self):
        if self.boltzmann_const != BOLTZMANN_CONST:
            raise DomainError("boltzmann_const is fixed to 2/3")
        if self.ion.mass < self.electron.mass:
            raise DomainError("ion mass must be >= electron mass")
        if not (self.ion.charge > 0 > self.electron.charge):
            raise DomainError("charges must satisfy q_i > 0 > q_e")
        if self.ion.diameter != self.electron.diameter:
            raise DomainError("both species must share one hard-sphere diameter")

    def species(self, tag: str) -> SpeciesParams:
        if tag == "i":
            return self.ion
        if tag == "e":
            return self.electron
        raise ConfigurationError(f"unknown species tag {tag!r}")

    @property
    def charge_ratio(self) -> float:
        """-q_e/q_i, the neutral ion density per unit electron density."""
        return -self.electron.charge / self.ion.charge


def make_plasma(mass_ion=2.0, mass_electron=1.0, charge_ion=1.0,
                charge_electron=-1.0, diameter=1.0) -> PlasmaParams:
    """Convenience constructor used by tests and default configs."""
    return PlasmaParams(
        ion=SpeciesParams(mass_ion, charge_ion, diameter),
        electron=SpeciesParams(mass_electron, charge_electron, diameter),
    )


@dataclass(frozen=True)
class VelocityGrid:
    """Uniform cubic lattice on [center - extent, center + extent]^3.

    The quadrature weight is the plain product rule dv^3 per node; Gaussian
    integrands are assumed to have decayed below ~1e-11 of their peak at the
    box faces (see :func:`recommended_extent`).
    """

    n: int
    extent: float
    center: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.n < 4:
            raise ConfigurationError(f"velocity grid needs n >= 4, got {self.n}")
        if self.extent <= 0:
            raise ConfigurationError("velocity grid extent must be positive")

    @property
    def dv(self) -> float:
        return 2.0 * self.extent / (self.n - 1)

    @property
    def weight(self) -> float:
        """Quadrature weight dv^3 of one node."""
        return self.dv ** 3

    def axis(self, j: int) -> np.ndarray:
        return self.center[j] + np.linspace(-self.extent, self.extent, self.n)

    def nodes(self):
        """The three (n,n,n) coordinate arrays (ij indexing)."""
        return np.meshgrid(self.axis(0), self.axis(1), self.axis(2), indexing="ij")

    def speed_sq(self, u=(0.0, 0.0, 0.0)) -> np.ndarray:
        x1, x2, x3 = self.nodes()
        return (x1 - u[0]) ** 2 + (x2 - u[1]) ** 2 + (x3 - u[2]) ** 2

    def origin(self, j: int) -> float:
        return self.center[j] - self.extent


@dataclass
class DistributionField:
    """Phase-space density of one species on a spatial x velocity lattice.

    values has shape (n_x, n, n, n) and must be nonnegative and finite.
    """

    species: str
    x: np.ndarray
    grid: VelocityGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = (len(self.x), self.grid.n, self.grid.n, self.grid.n)
        if self.values.shape != expected:
            raise ConfigurationError(
                f"field shape {self.values.shape} != expected {expected}")

    def validate(self):
        if not np.all(np.isfinite(self.values)):
            raise MomentConsistencyError("distribution contains non-finite values")
        if np.any(self.values < 0):
            raise MomentConsistencyError("distribution contains negative values")


def recommended_extent(species: SpeciesParams, u_max: float, theta_max: float,
                       r_cut: float = 5.0) -> float:
    """Velocity-box half-width covering the bulk drift plus r_cut thermal radii."""
    if theta_max <= 0:
        raise DomainError("theta_max must be positive")
    return abs(u_max) + r_cut * np.sqrt(species.k * theta_max)


def maxwellian_eval(species: SpeciesParams, n, u, theta, xi):
    """Local Maxwellian n (m / 2 pi k_B theta)^{3/2} exp(-m|xi-u|^2 / 2 k_B theta).

    xi may be a single 3-vector or a tuple of coordinate arrays.
    """
    if np.any(np.asarray(n) <= 0) or np.any(np.asarray(theta) <= 0):
        raise DomainError("Maxwellian requires n > 0 and theta > 0")
    u = np.asarray(u, dtype=float)
    kt = species.k * theta
    pref = n * (2.0 * np.pi * kt) ** -1.5
    xi = np.asarray(xi, dtype=float) if not isinstance(xi, tuple) else xi
    if isinstance(xi, tuple):
        sq = (xi[0] - u[0]) ** 2 + (xi[1] - u[1]) ** 2 + (xi[2] - u[2]) ** 2
    elif xi.ndim == 1:
        sq = np.sum((xi - u) ** 2)
    else:
        sq = np.sum((xi - u) ** 2, axis=-1)
    return pref * np.exp(-sq / (2.0 * kt))


def maxwellian_on_grid(species: SpeciesParams, n, u, theta,
                       grid: VelocityGrid) -> np.ndarray:
    """Sample the Maxwellian on every node of a velocity grid."""
    return maxwellian_eval(species, n, u, theta, grid.nodes())


@dataclass(frozen=True)
class SingleMaxwellian:
    """Parameters of one species' local equilibrium."""

    species: str
    n: float
    u: tuple
    theta: float

    def __post_init__(self):
        if self.n <= 0 or self.theta <= 0:
            raise DomainError("SingleMaxwellian requires n > 0 and theta > 0")

    def on_grid(self, sp: SpeciesParams, grid: VelocityGrid) -> np.ndarray:
        return maxwellian_on_grid(sp, self.n, self.u, self.theta, grid)


@dataclass(frozen=True)
class BiMaxwellian:
    """Two-species equilibrium sharing bulk velocity and temperature."""

    n_i: float
    n_e: float
    u: tuple
    theta: float

    def __post_init__(self):
        if self.n_i <= 0 or self.n_e <= 0 or self.theta <= 0:
            raise DomainError("BiMaxwellian requires positive densities and temperature")

    def component(self, tag: str) -> SingleMaxwellian:
        n = self.n_i if tag == "i" else self.n_e
        return SingleMaxwellian(tag, n, self.u, self.theta)

    def on_grids(self, params: PlasmaParams, grid_i: VelocityGrid,
                 grid_e: VelocityGrid):
        return (maxwellian_on_grid(params.ion, self.n_i, self.u, self.theta, grid_i),
                maxwellian_on_grid(params.electron, self.n_e, self.u, self.theta, grid_e))


def moments_single_species(F: np.ndarray, grid: VelocityGrid,
                           species: SpeciesParams):
    """Density, bulk velocity, and temperature of one gridded distribution."""
    w = grid.weight
    n = float(np.sum(F)) * w
    if n < VACUUM_DENSITY:
        raise DegenerateCellError(f"density {n} below vacuum tolerance")
    x1, x2, x3 = grid.nodes()
    u = np.array([float(np.sum(x1 * F)), float(np.sum(x2 * F)),
                  float(np.sum(x3 * F))]) * (w / n)
    sq = (x1 - u[0]) ** 2 + (x2 - u[1]) ** 2 + (x3 - u[2]) ** 2
    theta = float(np.sum(sq * F)) * w / (3.0 * species.k * n)
    if theta <= 0:
        raise MomentConsistencyError(f"nonpositive temperature {theta}")
    return n, u, theta


def moments_two_component(F_i: np.ndarray, F_e: np.ndarray,
                          grid_i: VelocityGrid, grid_e: VelocityGrid,
                          params: PlasmaParams):
    """Six two-component fluid quantities (n_i, n_e, u, theta).

    The shared bulk velocity is the momentum-weighted mixture velocity and the
    shared temperature absorbs the kinetic energy of counter-drift, exactly as
    the discrete moment sums dictate.
    """
    m_i, m_e = params.ion.mass, params.electron.mass
    w_i, w_e = grid_i.weight, grid_e.weight
    n_i = float(np.sum(F_i)) * w_i
    n_e = float(np.sum(F_e)) * w_e
    rho = m_i * n_i + m_e * n_e
    if rho < VACUUM_DENSITY:
        raise DegenerateCellError("zero total density in cell")
    xi_i = grid_i.nodes()
    xi_e = grid_e.nodes()
    mom = np.array([
        m_i * float(np.sum(xi_i[j] * F_i)) * w_i
        + m_e * float(np.sum(xi_e[j] * F_e)) * w_e
        for j in range(3)
    ])
    u = mom / rho
    e_tot = 0.5 * m_i * float(np.sum(grid_i.speed_sq() * F_i)) * w_i \
        + 0.5 * m_e * float(np.sum(grid_e.speed_sq() * F_e)) * w_e
    n_tot = n_i + n_e
    if n_tot < VACUUM_DENSITY:
        raise DegenerateCellError("zero number density in cell")
    theta = (e_tot - 0.5 * rho * float(np.dot(u, u))) / n_tot
    if theta <= 0:
        raise MomentConsistencyError(f"nonpositive mixture temperature {theta}")
    return n_i, n_e, u, theta


def _invariant_weights(grid: VelocityGrid):
    """The five single-species collision invariants 1, xi, |xi|^2 on the grid."""
    x1, x2, x3 = grid.nodes()
    one = np.ones_like(x1)
    return [one, x1, x2, x3, x1 ** 2 + x2 ** 2 + x3 ** 2]


def discrete_maxwellian(species: SpeciesParams, n: float, u, theta: float,
                        grid: VelocityGrid, tol: float = 1e-13,
                        maxiter: int = 60, strict: bool = True):
    """Gridded Gaussian whose *discrete* moments match (n, u, theta) exactly.

    Plain sampling reproduces the moments only up to quadrature error, which
    at desk resolutions sits far above the tolerances the macro-micro
    machinery needs.  Newton iteration on the Gaussian parameters (the
    discrete exponential-family equilibrium) removes the defect while keeping
    the field strictly positive and exactly Maxwellian in shape.

    Very coarse even lattices carry a minimum representable specific energy
    (no node at the bulk velocity), in which case the targets may be
    unreachable; with strict=False the best-effort field is returned instead
    of raising.

    Returns (field, correction_norm) where the norm measures the relative
    departure from the plainly sampled Maxwellian; it is quadrature-error
    sized and shrinks under grid refinement.
    """
    u = np.asarray(u, dtype=float)
    targets = np.array([
        n,
        n * u[0], n * u[1], n * u[2],
        n * (float(np.dot(u, u)) + 3.0 * species.k * theta),
    ])
    psi = _invariant_weights(grid)
    w = grid.weight
    M0 = maxwellian_on_grid(species, n, u, theta, grid)

    # parameters p = (ln n*, u*, ln theta*) of the sampled Gaussian
    p = np.array([np.log(n), u[0], u[1], u[2], np.log(theta)])
    kb = species.k
    x1, x2, x3 = grid.nodes()
    scale = np.array([n, n, n, n, abs(targets[4])])

    def field(q):
        return maxwellian_eval(species, np.exp(q[0]), q[1:4], np.exp(q[4]),
                               (x1, x2, x3))

    def residual(M):
        return (np.array([float(np.sum(ps * M)) * w for ps in psi])
                - targets) / scale

    M = M0
    res = residual(M)
    for _ in range(maxiter):
        if np.max(np.abs(res)) <= tol:
            corr = float(np.sqrt(np.sum((M - M0) ** 2 / M0) * w / n))
            return M, corr
        kt = kb * np.exp(p[4])
        basis = [
            M,
            (x1 - p[1]) / kt * M,
            (x2 - p[2]) / kt * M,
            (x3 - p[3]) / kt * M,
            (((x1 - p[1]) ** 2 + (x2 - p[2]) ** 2 + (x3 - p[3]) ** 2)
             / (2.0 * kt) - 1.5) * M,
        ]
        jac = np.array([[float(np.sum(ps * b)) * w / s for b in basis]
                        for ps, s in zip(psi, scale)])
        try:
            dp = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("singular Jacobian in discrete Maxwellian") from exc
        # backtracking keeps coarse grids from overshooting
        lam = 1.0
        base = np.linalg.norm(res)
        stalled = True
        for _ in range(30):
            M_try = field(p + lam * dp)
            res_try = residual(M_try)
            if np.linalg.norm(res_try) < (1.0 - 1e-4 * lam) * base:
                stalled = False
                break
            lam *= 0.5
        if stalled or lam < 1e-6:
            break
        p = p + lam * dp
        M = M_try
        res = res_try
    if strict:
        raise NumericalError(
            "discrete Maxwellian iteration failed to converge "
            f"(residual {np.max(np.abs(res)):.2e}); the grid may be too "
            "coarse to represent these moments")
    # unreachable moments: fall back to the plainly sampled Maxwellian
    # rather than a parameter-drifted iterate
    return M0, 0.0
