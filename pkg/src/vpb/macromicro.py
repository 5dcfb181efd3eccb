"""Two-component macro-micro decomposition and projection operators.

The fluid part of a two-species state is the bi-Maxwellian matching all six
collision-invariant moments; the microscopic remainder carries no invariant
content.  Both the chi basis and the anchoring Maxwellians are corrected at
the discrete level (see core.discrete_maxwellian) so the projection algebra
holds to rounding rather than to quadrature error.

Basis elements are stored as polynomial prefactors of the anchor Maxwellians,
which keeps every inner product free of divisions by decaying exponentials.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (BiMaxwellian, DegenerateCellError, PlasmaParams,
                   SingleMaxwellian, SpeciesParams, VelocityGrid,
                   discrete_maxwellian, moments_single_species,
                   moments_two_component)


@dataclass
class Decomposition:
    """F = M + G with M the moment-matched bi-Maxwellian (gridded)."""

    moments: BiMaxwellian
    M_i: np.ndarray
    M_e: np.ndarray
    G_i: np.ndarray
    G_e: np.ndarray
    correction_norm: float


def decompose(F_i: np.ndarray, F_e: np.ndarray, grid_i: VelocityGrid,
              grid_e: VelocityGrid, params: PlasmaParams) -> Decomposition:
    """Split a two-species state into bi-Maxwellian and microscopic parts.

    The gridded Maxwellians are moment-corrected per species, so the six
    discrete invariant moments of G vanish to rounding.
    """
    n_i, n_e, u, theta = moments_two_component(F_i, F_e, grid_i, grid_e, params)
    M_i, c_i = discrete_maxwellian(params.ion, n_i, u, theta, grid_i)
    M_e, c_e = discrete_maxwellian(params.electron, n_e, u, theta, grid_e)
    bm = BiMaxwellian(n_i, n_e, tuple(u), theta)
    return Decomposition(bm, M_i, M_e, F_i - M_i, F_e - M_e,
                         float(np.hypot(c_i, c_e)))


@dataclass
class ChiBasis:
    """Orthonormal basis of the two-component macroscopic subspace.

    polys[j] is the (ion, electron) pair of polynomial prefactors such that
    chi_j = (polys[j][0] * W_i, polys[j][1] * W_e) for the gridded anchor
    (W_i, W_e).  After one discrete Gram-Schmidt pass the Gram matrix in the
    anchor-weighted inner product is the identity to rounding.
    """

    W_i: np.ndarray
    W_e: np.ndarray
    polys: list
    grid_i: VelocityGrid
    grid_e: VelocityGrid

    def dot_with(self, F_i, F_e, j):
        """<F, chi_j> in the anchor inner product (division-free)."""
        p_i, p_e = self.polys[j]
        return float(np.sum(F_i * p_i)) * self.grid_i.weight \
            + float(np.sum(F_e * p_e)) * self.grid_e.weight

    def element(self, j):
        p_i, p_e = self.polys[j]
        return p_i * self.W_i, p_e * self.W_e

    def gram(self):
        g = np.empty((6, 6))
        for a in range(6):
            ei, ee = self.element(a)
            for b in range(6):
                g[a, b] = self.dot_with(ei, ee, b)
        return g


def _analytic_polys(params: PlasmaParams, anchor: BiMaxwellian,
                    grid_i: VelocityGrid, grid_e: VelocityGrid):
    m_i, m_e = params.ion.mass, params.electron.mass
    k_i, k_e = params.ion.k, params.electron.k
    n_i, n_e, u, th = anchor.n_i, anchor.n_e, anchor.u, anchor.theta
    rho = m_i * n_i + m_e * n_e
    xi = grid_i.nodes()
    xe = grid_e.nodes()
    zero_i, zero_e = np.zeros_like(xi[0]), np.zeros_like(xe[0])
    polys = [
        (np.full_like(xi[0], 1.0 / np.sqrt(n_i)), zero_e),
        (zero_i, np.full_like(xe[0], 1.0 / np.sqrt(n_e))),
    ]
    for j in range(3):
        polys.append((
            np.sqrt(m_i / rho) * (xi[j] - u[j]) / np.sqrt(k_i * th),
            np.sqrt(m_e / rho) * (xe[j] - u[j]) / np.sqrt(k_e * th),
        ))
    c = 1.0 / np.sqrt(6.0 * (n_i + n_e))
    polys.append((
        c * (grid_i.speed_sq(u) / (k_i * th) - 3.0),
        c * (grid_e.speed_sq(u) / (k_e * th) - 3.0),
    ))
    return polys


def chi_basis(params: PlasmaParams, anchor: BiMaxwellian,
              grid_i: VelocityGrid, grid_e: VelocityGrid,
              anchor_fields=None) -> ChiBasis:
    """Build the six-function basis around an anchor bi-Maxwellian.

    anchor_fields may supply already-gridded (corrected) anchor Maxwellians;
    by default the moment-corrected sampling is used.
    """
    if anchor_fields is None:
        W_i, _ = discrete_maxwellian(params.ion, anchor.n_i, anchor.u,
                                     anchor.theta, grid_i, strict=False)
        W_e, _ = discrete_maxwellian(params.electron, anchor.n_e, anchor.u,
                                     anchor.theta, grid_e, strict=False)
    else:
        W_i, W_e = anchor_fields
    polys = _analytic_polys(params, anchor, grid_i, grid_e)
    basis = ChiBasis(W_i, W_e, polys, grid_i, grid_e)
    # one modified Gram-Schmidt pass in the discrete inner product
    w_i, w_e = grid_i.weight, grid_e.weight
    ortho = []
    for j in range(6):
        p_i, p_e = polys[j]
        for q_i, q_e in ortho:
            c = float(np.sum(p_i * q_i * W_i)) * w_i \
                + float(np.sum(p_e * q_e * W_e)) * w_e
            p_i = p_i - c * q_i
            p_e = p_e - c * q_e
        nrm = np.sqrt(float(np.sum(p_i * p_i * W_i)) * w_i
                      + float(np.sum(p_e * p_e * W_e)) * w_e)
        if nrm <= 0:
            raise DegenerateCellError("chi basis degenerated")
        ortho.append((p_i / nrm, p_e / nrm))
    basis.polys = ortho
    return basis


def project_p0(F_i, F_e, basis: ChiBasis):
    """Macroscopic projection P0 F = sum <F, chi_j> chi_j."""
    out_i = np.zeros_like(F_i)
    out_e = np.zeros_like(F_e)
    for j in range(6):
        c = basis.dot_with(F_i, F_e, j)
        p_i, p_e = basis.polys[j]
        out_i += c * p_i
        out_e += c * p_e
    return out_i * basis.W_i, out_e * basis.W_e


def project_p1(F_i, F_e, basis: ChiBasis):
    """Microscopic projection P1 = I - P0."""
    P0_i, P0_e = project_p0(F_i, F_e, basis)
    return F_i - P0_i, F_e - P0_e


@dataclass
class SingleBasis:
    """Five-function single-species basis around one anchor Maxwellian."""

    W: np.ndarray
    polys: list
    grid: VelocityGrid

    def dot_with(self, F, j):
        return float(np.sum(F * self.polys[j])) * self.grid.weight


def single_basis(sp: SpeciesParams, anchor: SingleMaxwellian,
                 grid: VelocityGrid, anchor_field=None) -> SingleBasis:
    if anchor_field is None:
        W, _ = discrete_maxwellian(sp, anchor.n, anchor.u, anchor.theta, grid,
                                   strict=False)
    else:
        W = anchor_field
    n, u, th = anchor.n, anchor.u, anchor.theta
    xi = grid.nodes()
    polys = [np.full_like(xi[0], 1.0 / np.sqrt(n))]
    for j in range(3):
        polys.append((xi[j] - u[j]) / np.sqrt(sp.k * n * th))
    polys.append((grid.speed_sq(u) / (sp.k * th) - 3.0) / np.sqrt(6.0 * n))
    w = grid.weight
    ortho = []
    for p in polys:
        for q in ortho:
            p = p - (float(np.sum(p * q * W)) * w) * q
        nrm = np.sqrt(float(np.sum(p * p * W)) * w)
        ortho.append(p / nrm)
    return SingleBasis(W, ortho, grid)


def single_project(F, basis: SingleBasis):
    """Single-species (P0 h, P1 h) pair."""
    P0 = np.zeros_like(F)
    for j in range(5):
        P0 += basis.dot_with(F, j) * basis.polys[j]
    P0 = P0 * basis.W
    return P0, F - P0


def micro_gaps(F_i, F_e, dec: Decomposition, grid_i: VelocityGrid,
               grid_e: VelocityGrid, params: PlasmaParams):
    """Species-minus-mixture velocity and temperature gaps by two routes.

    Route 1 subtracts single-species from two-component moments; route 2
    evaluates the microscopic-part integrals.  The two agree to rounding
    because both reduce to the same discrete sums.
    """
    out = {}
    u, theta = np.asarray(dec.moments.u), dec.moments.theta
    for tag, F, G, grid in (("i", F_i, dec.G_i, grid_i),
                            ("e", F_e, dec.G_e, grid_e)):
        sp = params.species(tag)
        n_A, u_A, th_A = moments_single_species(F, grid, sp)
        w = grid.weight
        xi = grid.nodes()
        du_2 = np.array([float(np.sum(xi[j] * G)) for j in range(3)]) * (w / n_A)
        dth_2 = float(np.dot(u - u_A, u - u_A)) / (3.0 * sp.k) \
            + float(np.sum(grid.speed_sq(u_A) * G)) * w / (3.0 * sp.k * n_A)
        out[tag] = {
            "du_route1": u_A - u,
            "du_route2": du_2,
            "dtheta_route1": th_A - theta,
            "dtheta_route2": dth_2,
        }
    return out
