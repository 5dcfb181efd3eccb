"""Two-component hard-sphere Boltzmann collision operators on velocity grids.

The kernel B = (sigma_A + sigma_B)^2 / 4 |(xi - xi*) . omega| is integrated
over the full unit sphere with a product quadrature whose polar axis lies
along xi_1, making the node set invariant under the grid symmetries that fix
that axis (sign flips and the xi_2 <-> xi_3 swap).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import (BiMaxwellian, ConfigurationError, DomainError,
                   NumericalError, PlasmaParams, SpeciesParams, VelocityGrid)


@dataclass(frozen=True)
class SphereQuadrature:
    """Product rule on S^2: Gauss-Legendre in cos(polar) x uniform azimuth.

    The polar axis is xi_1 and the azimuth nodes are offset by half a step,
    so the node set is symmetric under xi_2 <-> xi_3 and all axis sign flips.
    Weights sum to 4 pi exactly.
    """

    n_polar: int = 4
    n_azimuth: int = 8

    def __post_init__(self):
        if self.n_polar < 1 or self.n_azimuth < 2 or self.n_azimuth % 4:
            raise ConfigurationError(
                "sphere quadrature needs n_polar >= 1 and n_azimuth a multiple of 4")

    def nodes_weights(self):
        mu, wmu = np.polynomial.legendre.leggauss(self.n_polar)
        phi = (np.arange(self.n_azimuth) + 0.5) * (2.0 * np.pi / self.n_azimuth)
        wphi = 2.0 * np.pi / self.n_azimuth
        s = np.sqrt(1.0 - mu ** 2)
        omg = np.empty((self.n_polar * self.n_azimuth, 3))
        w = np.empty(self.n_polar * self.n_azimuth)
        idx = 0
        for q in range(self.n_polar):
            for j in range(self.n_azimuth):
                omg[idx] = (mu[q], s[q] * np.cos(phi[j]), s[q] * np.sin(phi[j]))
                w[idx] = wmu[q] * wphi
                idx += 1
        return omg, w


@dataclass(frozen=True)
class CollisionConfig:
    """Evaluation options for the gather-form collision operator."""

    scheme: str = "trilinear"
    fix: bool = True
    quad: SphereQuadrature = field(default_factory=SphereQuadrature)

    def __post_init__(self):
        if self.scheme != "trilinear":
            raise ConfigurationError(f"unsupported interpolation scheme {self.scheme!r}")


def kernel_prefactor(sp_a: SpeciesParams, sp_b: SpeciesParams) -> float:
    """Hard-sphere prefactor (sigma_A + sigma_B)^2 / 4."""
    return 0.25 * (sp_a.diameter + sp_b.diameter) ** 2


def post_collision(xi, xi_star, omega, m_a: float, m_b: float):
    """Post-collision velocity pair for masses (m_a, m_b); omega must be unit."""
    xi = np.asarray(xi, dtype=float)
    xi_star = np.asarray(xi_star, dtype=float)
    omega = np.asarray(omega, dtype=float)
    norm = np.sum(omega ** 2, axis=-1)
    if np.any(np.abs(norm - 1.0) > 1e-12):
        raise DomainError("omega must be a unit vector")
    dot = np.sum((xi - xi_star) * omega, axis=-1)[..., None]
    msum = m_a + m_b
    xi_p = xi - (2.0 * m_b / msum) * dot * omega
    xi_sp = xi_star + (2.0 * m_a / msum) * dot * omega
    return xi_p, xi_sp


def _geom(grid: VelocityGrid):
    return (grid.origin(0), grid.origin(1), grid.origin(2), grid.dv, grid.n)


def q_ab(F_A: np.ndarray, F_B: np.ndarray, sp_a: SpeciesParams,
         sp_b: SpeciesParams, grid_a: VelocityGrid, grid_b: VelocityGrid,
         config: CollisionConfig = CollisionConfig(), part: str = "full"):
    """Gather-form Q_AB(F_A, F_B) evaluated on the A grid.

    part selects "full", "gain", or "loss" (loss carries its negative sign).
    """
    if F_A.shape != (grid_a.n,) * 3 or F_B.shape != (grid_b.n,) * 3:
        raise ConfigurationError("field shape does not match its velocity grid")
    omg, w = config.quad.nodes_weights()
    mode = {"full": 0, "gain": 1, "loss": 2}[part]
    msum = sp_a.mass + sp_b.mass
    return _kernels.q_ab_kernel(
        np.ascontiguousarray(F_A), np.ascontiguousarray(F_B),
        *_geom(grid_a), *_geom(grid_b), omg, w,
        kernel_prefactor(sp_a, sp_b),
        2.0 * sp_b.mass / msum, 2.0 * sp_a.mass / msum,
        grid_b.weight, mode)


def q_full(F_i: np.ndarray, F_e: np.ndarray, params: PlasmaParams,
           grid_i: VelocityGrid, grid_e: VelocityGrid,
           config: CollisionConfig = CollisionConfig()):
    """Both components of the two-component operator: Q_ii + Q_ie, Q_ee + Q_ei."""
    sp_i, sp_e = params.ion, params.electron
    Q_i = q_ab(F_i, F_i, sp_i, sp_i, grid_i, grid_i, config) \
        + q_ab(F_i, F_e, sp_i, sp_e, grid_i, grid_e, config)
    Q_e = q_ab(F_e, F_e, sp_e, sp_e, grid_e, grid_e, config) \
        + q_ab(F_e, F_i, sp_e, sp_i, grid_e, grid_i, config)
    return Q_i, Q_e


def invariant_fields(params: PlasmaParams, grid_i: VelocityGrid,
                     grid_e: VelocityGrid):
    """The six collision invariants psi_j as (ion, electron) component pairs."""
    m_i, m_e = params.ion.mass, params.electron.mass
    xi = grid_i.nodes()
    xe = grid_e.nodes()
    one_i, one_e = np.ones_like(xi[0]), np.ones_like(xe[0])
    psi = [
        (m_i * one_i, 0.0 * one_e),
        (0.0 * one_i, m_e * one_e),
        (m_i * xi[0], m_e * xe[0]),
        (m_i * xi[1], m_e * xe[1]),
        (m_i * xi[2], m_e * xe[2]),
        (0.5 * m_i * grid_i.speed_sq(), 0.5 * m_e * grid_e.speed_sq()),
    ]
    return psi


def collision_invariant_moments(Q_i: np.ndarray, Q_e: np.ndarray,
                                params: PlasmaParams, grid_i: VelocityGrid,
                                grid_e: VelocityGrid) -> np.ndarray:
    """The six moments int psi_j . Q dxi; all vanish for a conserving output."""
    psi = invariant_fields(params, grid_i, grid_e)
    w_i, w_e = grid_i.weight, grid_e.weight
    return np.array([
        float(np.sum(p_i * Q_i)) * w_i + float(np.sum(p_e * Q_e)) * w_e
        for p_i, p_e in psi
    ])


@dataclass
class FixReport:
    """Diagnostics from one conservation correction."""

    correction_norm: float
    moments_before: np.ndarray
    moments_after: np.ndarray


def conservative_fix(Q_i: np.ndarray, Q_e: np.ndarray, weight: BiMaxwellian,
                     params: PlasmaParams, grid_i: VelocityGrid,
                     grid_e: VelocityGrid, weight_fields=None):
    """Remove the component of (Q_i, Q_e) along the Maxwellian-weighted
    collision invariants so all six invariant moments vanish.

    This is the orthogonal projection onto the discrete microscopic subspace
    in the weight's inner product; the minimal-norm correction is reported.
    Interpolation is what breaks conservation, so the correction shrinks
    under grid refinement.
    """
    if weight_fields is None:
        W_i, W_e = weight.on_grids(params, grid_i, grid_e)
    else:
        W_i, W_e = weight_fields
    psi = invariant_fields(params, grid_i, grid_e)
    w_i, w_e = grid_i.weight, grid_e.weight
    before = collision_invariant_moments(Q_i, Q_e, params, grid_i, grid_e)
    gram = np.empty((6, 6))
    for a in range(6):
        for b in range(a, 6):
            g = float(np.sum(psi[a][0] * psi[b][0] * W_i)) * w_i \
                + float(np.sum(psi[a][1] * psi[b][1] * W_e)) * w_e
            gram[a, b] = g
            gram[b, a] = g
    try:
        coef = np.linalg.solve(gram, before)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("singular Gram matrix in conservative fix") from exc
    corr_i = sum(c * p[0] for c, p in zip(coef, psi)) * W_i
    corr_e = sum(c * p[1] for c, p in zip(coef, psi)) * W_e
    fixed_i = Q_i - corr_i
    fixed_e = Q_e - corr_e
    after = collision_invariant_moments(fixed_i, fixed_e, params, grid_i, grid_e)
    norm = float(np.sqrt(np.sum(corr_i ** 2 / W_i) * w_i
                         + np.sum(corr_e ** 2 / W_e) * w_e))
    return fixed_i, fixed_e, FixReport(norm, before, after)


def entropy_production(F_i, F_e, Q_i, Q_e, grid_i: VelocityGrid,
                       grid_e: VelocityGrid, floor: float = 1e-300):
    """Sum_A int Q_A ln F_A dxi; nonpositive up to quadrature error.

    Values below the floor are clipped before the log; the clip count is
    returned so callers can assert it never fires on interior nodes.
    """
    clipped = int(np.sum(F_i < floor) + np.sum(F_e < floor))
    val = float(np.sum(Q_i * np.log(np.maximum(F_i, floor)))) * grid_i.weight \
        + float(np.sum(Q_e * np.log(np.maximum(F_e, floor)))) * grid_e.weight
    return val, clipped


def i_forms(F_i, F_e, G_i, G_e, params: PlasmaParams, grid_i: VelocityGrid,
            grid_e: VelocityGrid, config: CollisionConfig = CollisionConfig()):
    """The three symmetric collision forms (I_ii, I_ee, I_ie).

    In I_ie the electron distribution rides the unstarred velocity, matching
    the identity (Q(F,F), G) = -I_ii/4 - I_ie/2 - I_ee/4.
    """
    omg, w = config.quad.nodes_weights()
    sp_i, sp_e = params.ion, params.electron
    I_ii = _kernels.iform_like_kernel(
        np.ascontiguousarray(F_i), np.ascontiguousarray(G_i),
        grid_i.n, grid_i.dv, grid_i.weight, omg, w,
        kernel_prefactor(sp_i, sp_i))
    I_ee = _kernels.iform_like_kernel(
        np.ascontiguousarray(F_e), np.ascontiguousarray(G_e),
        grid_e.n, grid_e.dv, grid_e.weight, omg, w,
        kernel_prefactor(sp_e, sp_e))
    msum = sp_i.mass + sp_e.mass
    I_ie = _kernels.iform_cross_kernel(
        np.ascontiguousarray(F_e), np.ascontiguousarray(F_i),
        np.ascontiguousarray(G_e), np.ascontiguousarray(G_i),
        *_geom(grid_e), *_geom(grid_i), omg, w,
        kernel_prefactor(sp_i, sp_e),
        2.0 * sp_i.mass / msum, 2.0 * sp_e.mass / msum,
        grid_e.weight, grid_i.weight)
    return I_ii, I_ee, I_ie


def bracket_qg(F_i, F_e, G_i, G_e, params, grid_i, grid_e,
               config: CollisionConfig = CollisionConfig()):
    """Left side (Q(F,F), G) of the symmetrization identity, unweighted L2."""
    Q_i, Q_e = q_full(F_i, F_e, params, grid_i, grid_e, config)
    return float(np.sum(Q_i * G_i)) * grid_i.weight \
        + float(np.sum(Q_e * G_e)) * grid_e.weight


def like_species_fix(Q: np.ndarray, sp: SpeciesParams, grid: VelocityGrid,
                     weight_field: np.ndarray):
    """Zero the five same-species invariant moments of one like-pair operator.

    Like-particle collisions conserve their own species' number, momentum,
    and energy; this removes the quadrature defect in the span of the five
    weighted invariants.
    """
    x1, x2, x3 = grid.nodes()
    psi = [np.ones_like(x1), x1, x2, x3, grid.speed_sq()]
    w = grid.weight
    mom = np.array([float(np.sum(p_ * Q)) * w for p_ in psi])
    gram = np.array([[float(np.sum(pa * pb * weight_field)) * w for pb in psi]
                     for pa in psi])
    try:
        coef = np.linalg.solve(gram, mom)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("singular Gram matrix in like-species fix") from exc
    return Q - sum(c * p_ for c, p_ in zip(coef, psi)) * weight_field


def q_full_refined(F_i, F_e, params: PlasmaParams, grid_i: VelocityGrid,
                   grid_e: VelocityGrid,
                   config: CollisionConfig = CollisionConfig(),
                   weight_fields=None, weight: BiMaxwellian = None):
    """Two-component operator with the refined conservation structure.

    Each like-pair operator is corrected on its own five invariants and the
    unlike pair jointly on the six two-component invariants, so every exact
    conservation identity of the collision term holds discretely.
    """
    sp_i, sp_e = params.ion, params.electron
    if weight is None:
        raise ConfigurationError("q_full_refined needs an explicit weight")
    if weight_fields is None:
        weight_fields = weight.on_grids(params, grid_i, grid_e)
    W_i, W_e = weight_fields
    Q_ii = q_ab(F_i, F_i, sp_i, sp_i, grid_i, grid_i, config)
    Q_ee = q_ab(F_e, F_e, sp_e, sp_e, grid_e, grid_e, config)
    Q_ie = q_ab(F_i, F_e, sp_i, sp_e, grid_i, grid_e, config)
    Q_ei = q_ab(F_e, F_i, sp_e, sp_i, grid_e, grid_i, config)
    Q_ii = like_species_fix(Q_ii, sp_i, grid_i, W_i)
    Q_ee = like_species_fix(Q_ee, sp_e, grid_e, W_e)
    Q_ie, Q_ei, _ = conservative_fix(Q_ie, Q_ei, weight, params, grid_i,
                                     grid_e, weight_fields=weight_fields)
    return Q_ii + Q_ie, Q_ee + Q_ei
