"""1D two-fluid Navier-Stokes-Poisson solver on a truncated line.

Six fields (n_i, n_e, u, theta) plus the self-consistent potential evolve
under the first-order fluid system; switching the transport law off yields
the zero-order Euler-Poisson variant term by term.  Space is discretised
with centered second-order differences, time with an explicit two-stage
Runge-Kutta scheme, and the far-field values are held as Dirichlet data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .core import (ConfigurationError, DomainError, MomentConsistencyError,
                   PlasmaParams)
from .waves import (RarefactionWave, burgers_initial, phi_convex,
                    rarefaction_fan, smooth_wave)

# Hard-sphere transport similarity constants in the fluid convention
# mu_A = C_MU m_A^{3/2} sqrt(k_B theta) / sigma^2,
# kappa_A = C_KAPPA k_B sqrt(m_A k_B theta) / sigma^2.
# Calibrated once against the kinetic inversion (transport_coefficients at
# theta = 1, N_v = 12); see tests/test_fluid.py for the consistency check.
C_MU = 0.16930
C_KAPPA = 0.42627


@dataclass(frozen=True)
class TransportLaw:
    """sqrt(theta) transport law mu_A(theta), kappa_A(theta)."""

    mu_i0: float
    mu_e0: float
    kappa_i0: float
    kappa_e0: float
    theta_ref: float = 1.0

    def mu(self, theta):
        s = np.sqrt(np.asarray(theta, dtype=float) / self.theta_ref)
        return self.mu_i0 * s, self.mu_e0 * s

    def kappa(self, theta):
        s = np.sqrt(np.asarray(theta, dtype=float) / self.theta_ref)
        return self.kappa_i0 * s, self.kappa_e0 * s

    @classmethod
    def hard_sphere(cls, params: PlasmaParams, theta_ref: float = 1.0):
        """Similarity law seeded by the calibrated kinetic constants."""
        kb = params.boltzmann_const
        out = {}
        for tag, sp in (("i", params.ion), ("e", params.electron)):
            s2 = sp.diameter ** 2
            out["mu_" + tag] = C_MU * sp.mass ** 1.5 * np.sqrt(kb * theta_ref) / s2
            out["kappa_" + tag] = C_KAPPA * kb * np.sqrt(sp.mass * kb * theta_ref) / s2
        return cls(out["mu_i"], out["mu_e"], out["kappa_i"], out["kappa_e"],
                   theta_ref)

    @classmethod
    def from_kinetic(cls, params: PlasmaParams, theta_ref: float = 1.0,
                     **kwargs):
        """Calibrate against the linearized-operator inversion (expensive)."""
        from .linearized import transport_coefficients
        tc = transport_coefficients(params, theta_ref, **kwargs)
        return cls(tc.mu_i, tc.mu_e, tc.kappa_i, tc.kappa_e, theta_ref)

    @classmethod
    def off(cls):
        """Viscosity-free (Euler-Poisson) mode."""
        return cls(0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class FluidGrid:
    """Uniform spatial lattice on [-x_max, x_max] with Dirichlet far fields."""

    n_x: int
    x_max: float

    def __post_init__(self):
        if self.n_x < 64:
            raise ConfigurationError("fluid grid needs at least 64 nodes")
        if self.x_max <= 0:
            raise ConfigurationError("fluid grid needs x_max > 0")

    @property
    def dx(self) -> float:
        return 2.0 * self.x_max / (self.n_x - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.x_max, self.x_max, self.n_x)

    def check_wave_fits(self, wave: RarefactionWave, tol: float = 1e-10):
        amp = 0.5 * (wave.w_plus - wave.w_minus)
        slope = amp / np.cosh(self.x_max) ** 2 if self.x_max < 30 \
            else amp * 4.0 * np.exp(-2.0 * self.x_max)
        if slope > tol:
            raise ConfigurationError(
                "domain too small: initial wave gradient at the boundary "
                f"is {slope:.2e}")


@dataclass
class FluidState:
    """Macroscopic fields on the spatial lattice."""

    n_i: np.ndarray
    n_e: np.ndarray
    u: np.ndarray          # shape (3, n_x)
    theta: np.ndarray
    phi: np.ndarray

    def copy(self):
        return FluidState(self.n_i.copy(), self.n_e.copy(), self.u.copy(),
                          self.theta.copy(), self.phi.copy())

    def validate(self):
        if np.any(self.n_i <= 0) or np.any(self.n_e <= 0):
            raise MomentConsistencyError("density lost positivity")
        if np.any(self.theta <= 0):
            raise MomentConsistencyError("temperature lost positivity")
        for f in (self.n_i, self.n_e, self.u, self.theta, self.phi):
            if not np.all(np.isfinite(f)):
                raise MomentConsistencyError("state contains non-finite values")


def poisson_solve(charge: np.ndarray, grid: FluidGrid) -> np.ndarray:
    """Solve -phi'' = charge with phi(+-x_max) = 0 (second order, tridiagonal)."""
    n = grid.n_x
    h2 = grid.dx ** 2
    m = n - 2
    ab = np.zeros((3, m))
    ab[0, 1:] = -1.0
    ab[1, :] = 2.0
    ab[2, :-1] = -1.0
    phi = np.zeros(n)
    phi[1:-1] = solve_banded((1, 1), ab, charge[1:-1] * h2)
    return phi


def _dx(f, dx):
    out = np.zeros_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * dx)
    return out


def _diff_flux(coef, f, dx):
    """d/dx (coef d/dx f) in conservative centered form, zero at boundaries."""
    out = np.zeros_like(f)
    cp = 0.5 * (coef[1:-1] + coef[2:])
    cm = 0.5 * (coef[1:-1] + coef[:-2])
    out[1:-1] = (cp * (f[2:] - f[1:-1]) - cm * (f[1:-1] - f[:-2])) / dx ** 2
    return out


def nsp_rhs(state: FluidState, phi: np.ndarray, params: PlasmaParams,
            grid: FluidGrid, transport: TransportLaw):
    """Right sides of the first-order two-fluid system.

    With the transport law off this is exactly the zero-order Euler-Poisson
    right side.  Boundary rows are zero (far-field values are pinned).
    """
    state.validate()
    dx = grid.dx
    m_i, m_e = params.ion.mass, params.electron.mass
    q_i, q_e = params.ion.charge, params.electron.charge
    n_i, n_e, u, th = state.n_i, state.n_e, state.u, state.theta
    rho = m_i * n_i + m_e * n_e
    n_bar = n_i + n_e
    mu_i, mu_e = transport.mu(th)
    kap_i, kap_e = transport.kappa(th)
    mu_tot = mu_i + mu_e
    kap_tot = kap_i + kap_e

    dn_i = -_dx(n_i * u[0], dx)
    dn_e = -_dx(n_e * u[0], dx)

    charge = q_i * n_i + q_e * n_e
    du = np.zeros_like(u)
    du[0] = (-(2.0 / 3.0) * _dx(n_bar * th, dx) - charge * _dx(phi, dx)
             + 3.0 * _diff_flux(mu_tot, u[0], dx)) / rho - u[0] * _dx(u[0], dx)
    for j in (1, 2):
        du[j] = _diff_flux(mu_tot, u[j], dx) / rho - u[0] * _dx(u[j], dx)

    heating = 3.0 * mu_tot * _dx(u[0], dx) ** 2 \
        + mu_tot * (_dx(u[1], dx) ** 2 + _dx(u[2], dx) ** 2)
    dth = (-(2.0 / 3.0) * th * _dx(u[0], dx) - u[0] * _dx(th, dx)
           + (_diff_flux(kap_tot, th, dx) + heating) / n_bar)

    for f in (dn_i, dn_e, du[0], du[1], du[2], dth):
        f[0] = 0.0
        f[-1] = 0.0
    return dn_i, dn_e, du, dth


def cfl_limit(state: FluidState, params: PlasmaParams, grid: FluidGrid,
              transport: TransportLaw, safety: float = 0.4) -> float:
    """Largest stable time step: hyperbolic and diffusive limits combined."""
    m_i, m_e = params.ion.mass, params.electron.mass
    rho = m_i * state.n_i + m_e * state.n_e
    n_bar = state.n_i + state.n_e
    cs = np.sqrt((5.0 / 3.0) * (2.0 / 3.0) * n_bar * state.theta / rho)
    lam = np.max(np.abs(state.u[0]) + cs)
    mu_i, mu_e = transport.mu(state.theta)
    kap_i, kap_e = transport.kappa(state.theta)
    diff = np.max(3.0 * (mu_i + mu_e) / rho)
    diff = max(diff, np.max((kap_i + kap_e) / n_bar))
    dt_h = grid.dx / lam if lam > 0 else np.inf
    dt_d = grid.dx ** 2 / (2.0 * diff) if diff > 0 else np.inf
    return safety * min(dt_h, dt_d)


def step(state: FluidState, dt: float, params: PlasmaParams, grid: FluidGrid,
         transport: TransportLaw) -> FluidState:
    """One explicit two-stage (Heun) step with the Poisson solve per stage."""
    if dt > cfl_limit(state, params, grid, transport) * (1.0 + 1e-12):
        raise ConfigurationError(f"time step {dt} violates the CFL limit")
    q_i, q_e = params.ion.charge, params.electron.charge

    def stage(s):
        phi = poisson_solve(q_i * s.n_i + q_e * s.n_e, grid)
        return nsp_rhs(s, phi, params, grid, transport), phi

    (dn_i, dn_e, du, dth), phi0 = stage(state)
    mid = FluidState(state.n_i + dt * dn_i, state.n_e + dt * dn_e,
                     state.u + dt * du, state.theta + dt * dth, phi0)
    (dn_i2, dn_e2, du2, dth2), phi1 = stage(mid)
    out = FluidState(
        state.n_i + 0.5 * dt * (dn_i + dn_i2),
        state.n_e + 0.5 * dt * (dn_e + dn_e2),
        state.u + 0.5 * dt * (du + du2),
        state.theta + 0.5 * dt * (dth + dth2),
        phi1)
    out.phi = poisson_solve(q_i * out.n_i + q_e * out.n_e, grid)
    out.validate()
    return out


def wave_state(wave: RarefactionWave, grid: FluidGrid, t: float) -> FluidState:
    """Smooth-wave data sampled on the fluid grid at time t."""
    n_e, u1, th = smooth_wave(t, grid.x, wave)
    n_i = wave.ion_density(n_e)
    u = np.zeros((3, grid.n_x))
    u[0] = u1
    return FluidState(n_i, n_e, u, th, np.zeros(grid.n_x))


@dataclass(frozen=True)
class Perturbation:
    """Two compactly supported Gaussian bumps in (n_e, u1).

    The matched ion bump keeps the initial data quasineutral when
    neutral_fraction is 1; smaller values leave a residual charge layer.
    Well-prepared data additionally slaves u1 and theta to the density bump
    along the forward acoustic family, so the perturbation rides into the
    expansion fan instead of leaving a standing entropy wiggle.
    """

    amplitude: float
    centers: tuple = (-4.0, 4.0)
    width: float = 2.0
    signs: tuple = (1.0, -1.0)
    neutral_fraction: float = 1.0
    well_prepared: bool = True

    def bumps(self, x):
        x = np.asarray(x, dtype=float)
        return sum(s * np.exp(-((x - c) / self.width) ** 2)
                   for s, c in zip(self.signs, self.centers))

    def apply(self, state: FluidState, params: PlasmaParams,
              grid: FluidGrid, wave: RarefactionWave = None) -> FluidState:
        out = state.copy()
        bump = self.amplitude * self.bumps(grid.x)
        out.n_e = out.n_e + bump
        out.n_i = out.n_i + self.neutral_fraction \
            * params.charge_ratio * bump
        out.u = out.u.copy()
        if self.well_prepared and wave is not None:
            # forward-acoustic alignment: du = c_s/n dn, dtheta adiabatic
            n0 = state.n_e
            out.u[0] = out.u[0] + wave.B * n0 ** (-2.0 / 3.0) * bump
            out.theta = out.theta + (2.0 / 3.0) * state.theta / n0 * bump
        else:
            out.u[0] = out.u[0] + self.amplitude * self.bumps(grid.x)
        out.validate()
        return out


@dataclass
class FluidTrajectory:
    """Recorded snapshots plus diagnostics series."""

    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    diag: dict = field(default_factory=lambda: {
        "t": [], "sup_dist_fan": [], "l2_dist_fan": [],
        "quasineutral_defect": [], "eta_tilde": []})


def fan_distance(state: FluidState, wave: RarefactionWave, grid: FluidGrid,
                 t: float):
    """Sup and L2 distance of (n_e, u1, theta) to the fan evaluated at x/t."""
    nf, uf, thf = rarefaction_fan(grid.x / max(t, 1e-12), wave)
    d = np.stack([state.n_e - nf, state.u[0] - uf, state.theta - thf])
    sup = float(np.max(np.abs(d)))
    l2 = float(np.sqrt(np.sum(d ** 2) * grid.dx))
    return sup, l2


def eta_tilde(state: FluidState, wave: RarefactionWave, grid: FluidGrid,
              t: float, params: PlasmaParams) -> float:
    """Entropy-weighted perturbation energy against the smooth wave."""
    n_r, u_r, th_r = smooth_wave(t, grid.x, wave)
    ni_r = wave.ion_density(n_r)
    m_i, m_e = params.ion.mass, params.electron.mass
    rho = m_i * state.n_i + m_e * state.n_e
    du2 = (state.u[0] - u_r) ** 2 + state.u[1] ** 2 + state.u[2] ** 2
    dens = 0.5 * rho * du2 \
        + (2.0 / 3.0) * state.n_i * th_r * phi_convex(ni_r / state.n_i) \
        + (2.0 / 3.0) * state.n_e * th_r * phi_convex(n_r / state.n_e) \
        + (state.n_i + state.n_e) * th_r * phi_convex(state.theta / th_r)
    return float(np.sum(dens) * grid.dx)


def quasineutral_defect(state: FluidState, params: PlasmaParams,
                        grid: FluidGrid) -> float:
    q = params.ion.charge * state.n_i + params.electron.charge * state.n_e
    return float(np.sqrt(np.sum(q ** 2) * grid.dx))


def run_rarefaction_experiment(params: PlasmaParams, wave: RarefactionWave,
                               grid: FluidGrid, transport: TransportLaw,
                               amplitude: float = 0.05, t_end: float = 150.0,
                               dt_save: float = 5.0,
                               perturbation: Perturbation = None,
                               keep_states: bool = False,
                               t_start: float = 0.0) -> FluidTrajectory:
    """Integrate perturbed smooth-wave data and record fan-convergence series."""
    grid.check_wave_fits(wave)
    state = wave_state(wave, grid, t_start)
    if perturbation is None:
        perturbation = Perturbation(amplitude)
    if perturbation.amplitude != 0.0:
        state = perturbation.apply(state, params, grid, wave)
    traj = FluidTrajectory()
    t = t_start
    next_save = t_start

    def record(t, s):
        sup, l2 = fan_distance(s, wave, grid, t)
        traj.diag["t"].append(t)
        traj.diag["sup_dist_fan"].append(sup)
        traj.diag["l2_dist_fan"].append(l2)
        traj.diag["quasineutral_defect"].append(
            quasineutral_defect(s, params, grid))
        traj.diag["eta_tilde"].append(eta_tilde(s, wave, grid, max(t, 1e-9),
                                                params))
        traj.times.append(t)
        if keep_states:
            traj.states.append(s.copy())

    while t < t_end - 1e-12:
        if t >= next_save - 1e-12:
            record(t, state)
            next_save += dt_save
        dt = min(0.9 * cfl_limit(state, params, grid, transport),
                 t_end - t, next_save - t)
        state = step(state, dt, params, grid, transport)
        t += dt
    record(t_end, state)
    for k, v in traj.diag.items():
        traj.diag[k] = np.asarray(v)
    if not keep_states:
        traj.states.append(state.copy())
    return traj
