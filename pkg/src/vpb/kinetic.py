"""Coarse 1D3V integrator for the full two-species kinetic system.

Operator splitting: upwind free transport in x, upwind acceleration in xi_1
driven by the self-consistent potential, and the explicit collision step
with conservation enforcement.  Meant for space-homogeneous relaxation
studies and short inhomogeneous smoke runs; accuracy is first order and the
emphasis is on discrete invariants.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .collision import (CollisionConfig, collision_invariant_moments,
                        conservative_fix, q_full, q_full_refined)
from .core import (BiMaxwellian, BudgetExceededError, ConfigurationError,
                   PlasmaParams, VelocityGrid, maxwellian_on_grid,
                   moments_single_species, moments_two_component)
from .fluid import poisson_solve
from .macromicro import decompose
from .waves import RarefactionWave, smooth_wave


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform 1D lattice on [-x_max, x_max] for kinetic runs."""

    n_x: int
    x_max: float

    def __post_init__(self):
        if self.n_x < 4:
            raise ConfigurationError("spatial grid needs at least 4 nodes")

    @property
    def dx(self) -> float:
        return 2.0 * self.x_max / (self.n_x - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.x_max, self.x_max, self.n_x)


@dataclass
class KineticState:
    """Gridded phase-space densities of both species plus the potential."""

    params: PlasmaParams
    xgrid: SpatialGrid
    grid_i: VelocityGrid
    grid_e: VelocityGrid
    F_i: np.ndarray            # (n_x, n, n, n)
    F_e: np.ndarray
    phi: np.ndarray
    t: float = 0.0
    inflow: tuple = None       # (left BiMaxwellian, right BiMaxwellian)

    def copy(self):
        return KineticState(self.params, self.xgrid, self.grid_i, self.grid_e,
                            self.F_i.copy(), self.F_e.copy(), self.phi.copy(),
                            self.t, self.inflow)


def uniform_state(params: PlasmaParams, xgrid: SpatialGrid,
                  grid_i: VelocityGrid, grid_e: VelocityGrid,
                  fields) -> KineticState:
    """Spatially uniform state from per-species gridded distributions."""
    F_i = np.broadcast_to(fields[0], (xgrid.n_x,) + fields[0].shape).copy()
    F_e = np.broadcast_to(fields[1], (xgrid.n_x,) + fields[1].shape).copy()
    return KineticState(params, xgrid, grid_i, grid_e, F_i, F_e,
                        np.zeros(xgrid.n_x))


def wave_state(params: PlasmaParams, wave: RarefactionWave,
               xgrid: SpatialGrid, grid_i: VelocityGrid,
               grid_e: VelocityGrid, t: float = 0.0) -> KineticState:
    """Local bi-Maxwellian data with smooth-wave macroscopic parameters."""
    n_e, u1, th = smooth_wave(t, xgrid.x, wave)
    n_i = wave.ion_density(n_e)
    shape_i = (xgrid.n_x,) + (grid_i.n,) * 3
    F_i = np.empty(shape_i)
    F_e = np.empty((xgrid.n_x,) + (grid_e.n,) * 3)
    for j in range(xgrid.n_x):
        u = (u1[j], 0.0, 0.0)
        F_i[j] = maxwellian_on_grid(params.ion, n_i[j], u, th[j], grid_i)
        F_e[j] = maxwellian_on_grid(params.electron, n_e[j], u, th[j], grid_e)
    left = BiMaxwellian(n_i[0], n_e[0], (u1[0], 0.0, 0.0), th[0])
    right = BiMaxwellian(n_i[-1], n_e[-1], (u1[-1], 0.0, 0.0), th[-1])
    state = KineticState(params, xgrid, grid_i, grid_e, F_i, F_e,
                         np.zeros(xgrid.n_x))
    state.inflow = (left, right)
    return state


def _transport_species(F, grid: VelocityGrid, xgrid: SpatialGrid, dt,
                       ghost_left, ghost_right):
    """First-order upwind advection in x; returns (new F, boundary fluxes)."""
    xi1 = grid.axis(0)
    c = dt / xgrid.dx
    out = F.copy()
    pos = xi1 > 0
    neg = xi1 < 0
    # positive speeds: information moves right; inflow at the left wall
    up = np.empty_like(F)
    up[1:] = F[:-1]
    up[0] = ghost_left
    out[:, pos] -= (c * xi1[pos])[None, :, None, None] \
        * (F[:, pos] - up[:, pos])
    dn = np.empty_like(F)
    dn[:-1] = F[1:]
    dn[-1] = ghost_right
    out[:, neg] -= (c * xi1[neg])[None, :, None, None] \
        * (dn[:, neg] - F[:, neg])
    w = grid.weight
    flux_in = w * (np.sum(xi1[pos][:, None, None] * ghost_left[pos]) * dt
                   - np.sum(xi1[neg][:, None, None] * ghost_right[neg]) * dt)
    flux_out = w * (np.sum(xi1[pos][:, None, None] * F[-1][pos]) * dt
                    - np.sum(xi1[neg][:, None, None] * F[0][neg]) * dt)
    return out, flux_in - flux_out


def transport_step(state: KineticState, dt: float):
    """Upwind x-transport of both species with far-field inflow.

    Returns the new state and the net boundary mass fluxes per species
    (inflow minus outflow, in number units).
    """
    for grid in (state.grid_i, state.grid_e):
        if dt * grid.extent / state.xgrid.dx > 0.9:
            raise ConfigurationError("transport CFL violated")
    out = state.copy()
    fluxes = {}
    for tag in ("i", "e"):
        F = state.F_i if tag == "i" else state.F_e
        grid = state.grid_i if tag == "i" else state.grid_e
        if state.inflow is not None:
            sp = state.params.species(tag)
            bm_l, bm_r = state.inflow
            gl = maxwellian_on_grid(sp, getattr(bm_l, "n_" + tag), bm_l.u,
                                    bm_l.theta, grid)
            gr = maxwellian_on_grid(sp, getattr(bm_r, "n_" + tag), bm_r.u,
                                    bm_r.theta, grid)
        else:
            gl = F[0]
            gr = F[-1]
        newF, flux = _transport_species(F, grid, state.xgrid, dt, gl, gr)
        if tag == "i":
            out.F_i = newF
        else:
            out.F_e = newF
        fluxes[tag] = flux
    out.t = state.t + dt
    return out, fluxes


def solve_potential(state: KineticState) -> np.ndarray:
    """Poisson solve from the current charge density."""
    w_i, w_e = state.grid_i.weight, state.grid_e.weight
    q_i = state.params.ion.charge
    q_e = state.params.electron.charge
    charge = q_i * state.F_i.sum(axis=(1, 2, 3)) * w_i \
        + q_e * state.F_e.sum(axis=(1, 2, 3)) * w_e
    return poisson_solve(charge, state.xgrid)


def field_step(state: KineticState, dt: float):
    """Upwind acceleration along xi_1 from the cellwise electric force."""
    state.phi = solve_potential(state)
    dphi = np.zeros(state.xgrid.n_x)
    dphi[1:-1] = (state.phi[2:] - state.phi[:-2]) / (2.0 * state.xgrid.dx)
    out = state.copy()
    for tag in ("i", "e"):
        sp = state.params.species(tag)
        grid = state.grid_i if tag == "i" else state.grid_e
        F = state.F_i if tag == "i" else state.F_e
        a = -(sp.charge / sp.mass) * dphi
        if np.max(np.abs(a)) * dt / grid.dv > 0.9:
            raise ConfigurationError("field-step CFL violated")
        newF = F.copy()
        c = dt / grid.dv
        for j in range(state.xgrid.n_x):
            if a[j] == 0.0:
                continue
            Fj = F[j]
            shifted = np.empty_like(Fj)
            if a[j] > 0:
                shifted[1:] = Fj[:-1]
                shifted[0] = 0.0
                newF[j] = Fj - c * a[j] * (Fj - shifted)
            else:
                shifted[:-1] = Fj[1:]
                shifted[-1] = 0.0
                newF[j] = Fj - c * a[j] * (shifted - Fj)
        if tag == "i":
            out.F_i = newF
        else:
            out.F_e = newF
    out.phi = state.phi.copy()
    out.t = state.t + dt
    return out


def loss_frequency_bound(state: KineticState) -> float:
    """Crude upper bound on the collision frequency for step-size control."""
    p = state.params
    w_i, w_e = state.grid_i.weight, state.grid_e.weight
    n_i = float(state.F_i.sum(axis=(1, 2, 3)).max()) * w_i
    n_e = float(state.F_e.sum(axis=(1, 2, 3)).max()) * w_e
    span_i = 2.0 * np.sqrt(3.0) * state.grid_i.extent
    span_e = 2.0 * np.sqrt(3.0) * state.grid_e.extent
    s2 = 0.25 * (p.ion.diameter + p.electron.diameter) ** 2
    return 2.0 * np.pi * s2 * (n_i + n_e) * max(span_i, span_e)


def collision_rhs(state: KineticState,
                  config: CollisionConfig = CollisionConfig()):
    """Conservation-corrected collision operator for every spatial cell."""
    p = state.params
    Q_i = np.empty_like(state.F_i)
    Q_e = np.empty_like(state.F_e)
    for j in range(state.xgrid.n_x):
        F_i, F_e = state.F_i[j], state.F_e[j]
        n_i, n_e, u, th = moments_two_component(F_i, F_e, state.grid_i,
                                                state.grid_e, p)
        weight = BiMaxwellian(n_i, n_e, tuple(u), th)
        # limit corrections by the state itself: a pure Maxwellian weight
        # keeps pushing mass onto nodes the gather gain cannot refill and
        # drives them negative at desk resolutions
        W_i, W_e = weight.on_grids(p, state.grid_i, state.grid_e)
        W_i = np.minimum(W_i, F_i + 1e-30)
        W_e = np.minimum(W_e, F_e + 1e-30)
        qi, qe = q_full_refined(F_i, F_e, p, state.grid_i, state.grid_e,
                                config, weight_fields=(W_i, W_e),
                                weight=weight)
        Q_i[j] = qi
        Q_e[j] = qe
    return Q_i, Q_e


def positive_dt(state: KineticState, Q_i, Q_e, fraction: float = 0.9) -> float:
    """Largest step keeping F + dt Q nonnegative on all non-vacuum nodes.

    Nodes carrying less than ~1e-14 of the peak are left to the clip-and-
    report accounting; they cannot hold the step size hostage.
    """
    out = np.inf
    for F, Q in ((state.F_i, Q_i), (state.F_e, Q_e)):
        neg = (Q < 0) & (F > 1e-14 * F.max())
        if np.any(neg):
            out = min(out, float(np.min(F[neg] / -Q[neg])))
    return fraction * out


def apply_collision(state: KineticState, dt, Q_i, Q_e,
                    clip_budget: float = 1e-8):
    """Advance by a precomputed collision right side, clipping and reporting."""
    out = state.copy()
    out.F_i = state.F_i + dt * Q_i
    out.F_e = state.F_e + dt * Q_e
    clipped = -float(np.sum(out.F_i[out.F_i < 0])) * state.grid_i.weight \
        - float(np.sum(out.F_e[out.F_e < 0])) * state.grid_e.weight
    total = float(np.sum(state.F_i)) * state.grid_i.weight \
        + float(np.sum(state.F_e)) * state.grid_e.weight
    if total > 0 and clipped > clip_budget * total:
        raise BudgetExceededError(
            f"negativity clipping {clipped:.2e} exceeds budget "
            f"{clip_budget:.1e} of total {total:.2e}")
    np.maximum(out.F_i, 0.0, out=out.F_i)
    np.maximum(out.F_e, 0.0, out=out.F_e)
    out.t = state.t + dt
    return out, clipped


def collision_step(state: KineticState, dt: float,
                   config: CollisionConfig = CollisionConfig(),
                   clip_budget: float = 1e-8, nu_max: float = None):
    """One explicit collision update with conservation fix and clip budget."""
    if nu_max is None:
        nu_max = loss_frequency_bound(state)
    if dt * nu_max > 0.5:
        raise ConfigurationError("collision step too large for explicit update")
    Q_i, Q_e = collision_rhs(state, config)
    return apply_collision(state, dt, Q_i, Q_e, clip_budget)


def entropy_h(state: KineticState, floor: float = 1e-300) -> float:
    """H = sum_A int F_A ln F_A over the full phase space."""
    w_i, w_e = state.grid_i.weight, state.grid_e.weight
    dx = state.xgrid.dx
    h = float(np.sum(state.F_i * np.log(np.maximum(state.F_i, floor)))) * w_i \
        + float(np.sum(state.F_e * np.log(np.maximum(state.F_e, floor)))) * w_e
    return h * dx


@dataclass
class KineticDiagnostics:
    """Time series recorded during kinetic runs."""

    series: dict = field(default_factory=lambda: {
        "t": [], "mass_i": [], "mass_e": [], "momentum": [], "energy": [],
        "H": [], "du": [], "dtheta": [], "g_norm": [],
        "quasineutral_defect": []})
    clipped: float = 0.0
    flux_balance: dict = field(default_factory=lambda: {"i": 0.0, "e": 0.0})

    def record(self, state: KineticState, reference: BiMaxwellian = None):
        p = state.params
        w_i, w_e = state.grid_i.weight, state.grid_e.weight
        dx = state.xgrid.dx
        m_i, m_e = p.ion.mass, p.electron.mass
        xi1_i = state.grid_i.nodes()[0]
        xi1_e = state.grid_e.nodes()[0]
        mass_i = float(state.F_i.sum()) * w_i * dx
        mass_e = float(state.F_e.sum()) * w_e * dx
        mom = m_i * float(np.sum(state.F_i * xi1_i[None])) * w_i * dx \
            + m_e * float(np.sum(state.F_e * xi1_e[None])) * w_e * dx
        en = 0.5 * m_i * float(np.sum(state.F_i
                                      * state.grid_i.speed_sq()[None])) * w_i * dx \
            + 0.5 * m_e * float(np.sum(state.F_e
                                       * state.grid_e.speed_sq()[None])) * w_e * dx
        if len(state.phi) > 1:
            dphi = np.gradient(state.phi, state.xgrid.dx)
            en += 0.5 * float(np.sum(dphi ** 2)) * dx
        du = dth = 0.0
        gn = 0.0
        defect = 0.0
        for j in range(state.xgrid.n_x):
            try:
                ni, ui, thi = moments_single_species(state.F_i[j],
                                                     state.grid_i, p.ion)
                ne, ue, the = moments_single_species(state.F_e[j],
                                                     state.grid_e, p.electron)
            except Exception:
                continue
            du = max(du, float(np.linalg.norm(ui - ue)))
            dth = max(dth, abs(thi - the))
            defect += (p.ion.charge * ni + p.electron.charge * ne) ** 2
            dec = decompose(state.F_i[j], state.F_e[j], state.grid_i,
                            state.grid_e, p)
            if reference is None:
                W_i = dec.M_i
                W_e = dec.M_e
            else:
                W_i = maxwellian_on_grid(p.ion, reference.n_i, reference.u,
                                         reference.theta, state.grid_i)
                W_e = maxwellian_on_grid(p.electron, reference.n_e,
                                         reference.u, reference.theta,
                                         state.grid_e)
            gn += (float(np.sum(dec.G_i ** 2 / W_i)) * w_i
                   + float(np.sum(dec.G_e ** 2 / W_e)) * w_e) * dx
        s = self.series
        s["t"].append(state.t)
        s["mass_i"].append(mass_i)
        s["mass_e"].append(mass_e)
        s["momentum"].append(mom)
        s["energy"].append(en)
        s["H"].append(entropy_h(state))
        s["du"].append(du)
        s["dtheta"].append(dth)
        s["g_norm"].append(np.sqrt(gn))
        s["quasineutral_defect"].append(np.sqrt(defect * dx))

    def arrays(self):
        return {k: np.asarray(v) for k, v in self.series.items()}


def mixture_prediction(state: KineticState):
    """Conserved-moment prediction of the equilibrated state (one cell)."""
    return moments_two_component(state.F_i[0], state.F_e[0], state.grid_i,
                                 state.grid_e, state.params)


def run_homogeneous(params: PlasmaParams, maxwellians, grid_i: VelocityGrid,
                    grid_e: VelocityGrid, t_end: float, dt: float = None,
                    config: CollisionConfig = CollisionConfig(),
                    n_records: int = 40, reference: BiMaxwellian = None):
    """Collision-only relaxation of spatially uniform two-species data.

    maxwellians is ((n_i, u_i, th_i), (n_e, u_e, th_e)); the run records the
    Maxwellization/equilibration series and returns (diagnostics, state).
    """
    (n_i, u_i, th_i), (n_e, u_e, th_e) = maxwellians
    F_i = maxwellian_on_grid(params.ion, n_i, u_i, th_i, grid_i)
    F_e = maxwellian_on_grid(params.electron, n_e, u_e, th_e, grid_e)
    cell = KineticState(params, OneCellGrid(), grid_i, grid_e,
                        F_i[None].copy(), F_e[None].copy(), np.zeros(1))
    nu_max = measured_nu_max(cell, config)
    if dt is None:
        dt = 0.45 / nu_max
    diags = KineticDiagnostics()
    diags.record(cell, reference)
    next_rec = t_end / n_records
    while cell.t < t_end - 1e-12:
        Q_i, Q_e = collision_rhs(cell, config)
        step_dt = min(dt, t_end - cell.t, positive_dt(cell, Q_i, Q_e))
        cell, clipped = apply_collision(cell, step_dt, Q_i, Q_e)
        diags.clipped += clipped
        if cell.t >= next_rec - 1e-12:
            diags.record(cell, reference)
            next_rec += t_end / n_records
    return diags, cell


@dataclass(frozen=True)
class OneCellGrid:
    """Single-cell spatial measure for homogeneous runs."""

    n_x: int = 1
    x_max: float = 0.5

    @property
    def dx(self) -> float:
        return 1.0

    @property
    def x(self) -> np.ndarray:
        return np.zeros(1)


def measured_nu_max(state: KineticState, config: CollisionConfig) -> float:
    """Largest loss frequency over the grid at the state's current moments."""
    from .linearized import _nu_pair
    omg, womg = config.quad.nodes_weights()
    p = state.params
    j = int(np.argmax(state.F_i.sum(axis=(1, 2, 3))))
    s2 = 0.25 * (p.ion.diameter + p.electron.diameter) ** 2
    s2_ii = p.ion.diameter ** 2
    s2_ee = p.electron.diameter ** 2
    nu_i = _nu_pair(state.grid_i, state.F_i[j], state.grid_i, s2_ii, omg, womg) \
        + _nu_pair(state.grid_i, state.F_e[j], state.grid_e, s2, omg, womg)
    nu_e = _nu_pair(state.grid_e, state.F_e[j], state.grid_e, s2_ee, omg, womg) \
        + _nu_pair(state.grid_e, state.F_i[j], state.grid_i, s2, omg, womg)
    return 1.2 * float(max(nu_i.max(), nu_e.max()))


def estimate_flops(n_x: int, n_v: int, n_omega: int, steps: int) -> float:
    """Crude multiply-add count for the splitting loop's collision work."""
    return 4.0 * n_x * float(n_v) ** 6 * n_omega * steps


def run_inhomogeneous(params: PlasmaParams, wave: RarefactionWave,
                      xgrid: SpatialGrid, grid_i: VelocityGrid,
                      grid_e: VelocityGrid, t_end: float,
                      config: CollisionConfig = CollisionConfig(),
                      flop_budget: float = 5e11, n_records: int = 20,
                      reference: BiMaxwellian = None, collisions: bool = True,
                      fields: bool = True):
    """Split-step kinetic run from smooth-wave bi-Maxwellian data.

    Prints the estimated cost before starting and raises when it exceeds the
    budget.  Returns (diagnostics, final state).
    """
    state = wave_state(params, wave, xgrid, grid_i, grid_e)
    dt_t = 0.9 * xgrid.dx / max(grid_i.extent, grid_e.extent)
    nu_max = measured_nu_max(state, config) if collisions else None
    dt_c = 0.45 / nu_max if collisions else np.inf
    dt = min(dt_t, dt_c)
    steps = int(np.ceil(t_end / dt))
    omg = config.quad.n_polar * config.quad.n_azimuth
    est = estimate_flops(xgrid.n_x, grid_i.n, omg, steps) if collisions else 0
    print(f"kinetic run: {steps} steps, estimated {est:.2e} collision events")
    if est > flop_budget:
        raise BudgetExceededError(
            f"estimated cost {est:.2e} exceeds budget {flop_budget:.2e}")
    diags = KineticDiagnostics()
    record_every = max(1, steps // n_records)
    state.phi = solve_potential(state)
    diags.record(state, reference)
    for k in range(steps):
        step_dt = min(dt, t_end - state.t)
        state, fluxes = transport_step(state, step_dt)
        for tag in ("i", "e"):
            diags.flux_balance[tag] += fluxes[tag]
        if fields:
            state = field_step(state, step_dt)
        if collisions:
            Q_i, Q_e = collision_rhs(state, config)
            cdt = min(step_dt, positive_dt(state, Q_i, Q_e))
            remaining = step_dt
            while True:
                state, clipped = apply_collision(state, cdt, Q_i, Q_e)
                diags.clipped += clipped
                remaining -= cdt
                if remaining <= 1e-14:
                    break
                Q_i, Q_e = collision_rhs(state, config)
                cdt = min(remaining, positive_dt(state, Q_i, Q_e))
        if (k + 1) % record_every == 0 or k == steps - 1:
            diags.record(state, reference)
    return diags, state
