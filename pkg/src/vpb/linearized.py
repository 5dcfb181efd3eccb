"""Linearized two-component collision operator, its nu/K split, inversion on
the microscopic subspace, transport coefficients, and the background
non-fluid profile driven by wave gradients.

Two discrete realisations of L are provided.  `apply` evaluates the
symmetric Dirichlet form of the linearization (same collision events and
trilinear kinematics as the nonlinear operator), which is self-adjoint and
negative semidefinite by construction; it backs the conjugate-gradient
inverse, coercivity measurements, and transport coefficients.  `apply_raw`
is the direct gather composition Q(M,G) + Q(G,M); the two agree up to grid
error, which shrinks under refinement.  The nu/K split uses the gather
pieces, so L_raw = -nu G + K G is an exact bookkeeping identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .collision import (CollisionConfig, SphereQuadrature, conservative_fix,
                        invariant_fields, kernel_prefactor, q_ab)
from .core import (BiMaxwellian, ConfigurationError, DomainError,
                   NumericalError, PlasmaParams, SingleMaxwellian,
                   SpeciesParams, VelocityGrid, discrete_maxwellian,
                   recommended_extent)


def _geom(grid: VelocityGrid):
    return (grid.origin(0), grid.origin(1), grid.origin(2), grid.dv, grid.n)


def _nu_pair(grid_a: VelocityGrid, M_b: np.ndarray, grid_b: VelocityGrid,
             sigma2: float, omg, w):
    return _kernels.nu_kernel(*_geom(grid_a), np.ascontiguousarray(M_b),
                              *_geom(grid_b), omg, w, sigma2, grid_b.weight)


class LinearizedOperator:
    """L_M around a bi-Maxwellian anchor on per-species velocity grids."""

    def __init__(self, params: PlasmaParams, anchor: BiMaxwellian,
                 grid_i: VelocityGrid, grid_e: VelocityGrid,
                 quad: SphereQuadrature = SphereQuadrature()):
        self.params = params
        self.anchor = anchor
        self.grid_i = grid_i
        self.grid_e = grid_e
        self.quad = quad
        self.omg, self.womg = quad.nodes_weights()
        self.M_i, _ = discrete_maxwellian(params.ion, anchor.n_i, anchor.u,
                                          anchor.theta, grid_i, strict=False)
        self.M_e, _ = discrete_maxwellian(params.electron, anchor.n_e,
                                          anchor.u, anchor.theta, grid_e,
                                          strict=False)
        sp_i, sp_e = params.ion, params.electron
        self.s2_ii = kernel_prefactor(sp_i, sp_i)
        self.s2_ee = kernel_prefactor(sp_e, sp_e)
        self.s2_ie = kernel_prefactor(sp_i, sp_e)
        self.nu_i = _nu_pair(grid_i, self.M_i, grid_i, self.s2_ii,
                             self.omg, self.womg) \
            + _nu_pair(grid_i, self.M_e, grid_e, self.s2_ie,
                       self.omg, self.womg)
        self.nu_e = _nu_pair(grid_e, self.M_e, grid_e, self.s2_ee,
                             self.omg, self.womg) \
            + _nu_pair(grid_e, self.M_i, grid_i, self.s2_ie,
                       self.omg, self.womg)
        self._config = CollisionConfig(quad=quad)
        di = _kernels.form_like_diag(self.M_i, grid_i.n, grid_i.dv,
                                     grid_i.weight, self.omg, self.womg,
                                     self.s2_ii)
        de = _kernels.form_like_diag(self.M_e, grid_e.n, grid_e.dv,
                                     grid_e.weight, self.omg, self.womg,
                                     self.s2_ee)
        ci, ce = _kernels.form_cross_diag(
            self.M_i, self.M_e, *_geom(grid_i), *_geom(grid_e),
            self.omg, self.womg, self.s2_ie,
            2.0 * params.electron.mass / (params.ion.mass
                                          + params.electron.mass),
            2.0 * params.ion.mass / (params.ion.mass + params.electron.mass),
            grid_i.weight, grid_e.weight)
        # Jacobi scale of -L in field normalisation: interpolation across the
        # steep Maxwellian tails makes the raw diagonal vastly exceed nu
        # there, so nu alone preconditions poorly.
        self.jacobi_i = (di + ci) / (self.M_i * grid_i.weight)
        self.jacobi_e = (de + ce) / (self.M_e * grid_e.weight)

    # -- inner products -------------------------------------------------

    def inner(self, A, B, weights=None):
        """<A, B> with componentwise 1/weight; default weight is the anchor."""
        W_i, W_e = weights if weights is not None else (self.M_i, self.M_e)
        return float(np.sum(A[0] * B[0] / W_i)) * self.grid_i.weight \
            + float(np.sum(A[1] * B[1] / W_e)) * self.grid_e.weight

    def norm(self, A, weights=None):
        return np.sqrt(max(self.inner(A, A, weights), 0.0))

    def one_plus_speed(self):
        s_i = 1.0 + np.sqrt(self.grid_i.speed_sq())
        s_e = 1.0 + np.sqrt(self.grid_e.speed_sq())
        return s_i, s_e

    # -- projection onto the microscopic subspace -----------------------

    def project(self, G):
        """Orthogonal projection onto N-perp in the anchor inner product.

        Identical to removing the macroscopic chi-span, and to the
        conservation fix with the anchor as weight.
        """
        f_i, f_e, _ = conservative_fix(G[0], G[1], self.anchor, self.params,
                                       self.grid_i, self.grid_e,
                                       weight_fields=(self.M_i, self.M_e))
        return f_i, f_e

    # -- applications ----------------------------------------------------

    def apply_nofix(self, G):
        """Symmetric-form application of L (no conservation projection)."""
        ghat_i = G[0] / self.M_i
        ghat_e = G[1] / self.M_e
        acc_i = _kernels.form_like_kernel(ghat_i, self.M_i, self.grid_i.n,
                                          self.grid_i.dv, self.grid_i.weight,
                                          self.omg, self.womg, self.s2_ii)
        acc_e = _kernels.form_like_kernel(ghat_e, self.M_e, self.grid_e.n,
                                          self.grid_e.dv, self.grid_e.weight,
                                          self.omg, self.womg, self.s2_ee)
        ci, ce = _kernels.form_cross_kernel(
            ghat_i, ghat_e, self.M_i, self.M_e,
            *_geom(self.grid_i), *_geom(self.grid_e),
            self.omg, self.womg, self.s2_ie,
            2.0 * self.params.electron.mass / (self.params.ion.mass
                                               + self.params.electron.mass),
            2.0 * self.params.ion.mass / (self.params.ion.mass
                                          + self.params.electron.mass),
            self.grid_i.weight, self.grid_e.weight)
        # acc holds dE/d(h/M); pairing against h/M in the weighted inner
        # product makes the operator value -acc / w at each node.
        L_i = -(acc_i + ci) / self.grid_i.weight
        L_e = -(acc_e + ce) / self.grid_e.weight
        return L_i, L_e

    def apply(self, G):
        """L G by the symmetric form, projected to annihilate invariants."""
        return self.project(self.apply_nofix(G))

    def apply_raw_nofix(self, G):
        """Gather composition Q(M, G) + Q(G, M), both components."""
        p = self.params
        sp_i, sp_e = p.ion, p.electron
        gi, ge = self.grid_i, self.grid_e
        cfg = self._config
        L_i = q_ab(self.M_i, G[0], sp_i, sp_i, gi, gi, cfg) \
            + q_ab(G[0], self.M_i, sp_i, sp_i, gi, gi, cfg) \
            + q_ab(self.M_i, G[1], sp_i, sp_e, gi, ge, cfg) \
            + q_ab(G[0], self.M_e, sp_i, sp_e, gi, ge, cfg)
        L_e = q_ab(self.M_e, G[1], sp_e, sp_e, ge, ge, cfg) \
            + q_ab(G[1], self.M_e, sp_e, sp_e, ge, ge, cfg) \
            + q_ab(self.M_e, G[0], sp_e, sp_i, ge, gi, cfg) \
            + q_ab(G[1], self.M_i, sp_e, sp_i, ge, gi, cfg)
        return L_i, L_e

    def apply_raw(self, G):
        return self.project(self.apply_raw_nofix(G))

    def apply_K(self, G):
        """The bounded part of the split L = -nu + K, from the gain/loss
        pieces: all four gain terms plus the losses whose integrand carries G."""
        p = self.params
        sp_i, sp_e = p.ion, p.electron
        gi, ge = self.grid_i, self.grid_e
        cfg = self._config
        K_i = q_ab(self.M_i, G[0], sp_i, sp_i, gi, gi, cfg, part="gain") \
            + q_ab(G[0], self.M_i, sp_i, sp_i, gi, gi, cfg, part="gain") \
            + q_ab(self.M_i, G[1], sp_i, sp_e, gi, ge, cfg, part="gain") \
            + q_ab(G[0], self.M_e, sp_i, sp_e, gi, ge, cfg, part="gain") \
            + q_ab(self.M_i, G[0], sp_i, sp_i, gi, gi, cfg, part="loss") \
            + q_ab(self.M_i, G[1], sp_i, sp_e, gi, ge, cfg, part="loss")
        K_e = q_ab(self.M_e, G[1], sp_e, sp_e, ge, ge, cfg, part="gain") \
            + q_ab(G[1], self.M_e, sp_e, sp_e, ge, ge, cfg, part="gain") \
            + q_ab(self.M_e, G[0], sp_e, sp_i, ge, gi, cfg, part="gain") \
            + q_ab(G[1], self.M_i, sp_e, sp_i, ge, gi, cfg, part="gain") \
            + q_ab(self.M_e, G[1], sp_e, sp_e, ge, ge, cfg, part="loss") \
            + q_ab(self.M_e, G[0], sp_e, sp_i, ge, gi, cfg, part="loss")
        return K_i, K_e

    def nu_eval(self, tag: str, xi):
        """Loss frequency at arbitrary velocities (quadrature evaluation)."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        p = self.params
        out = np.zeros(len(xi))
        for M_b, grid_b, s2 in ((self.M_i, self.grid_i,
                                 self.s2_ii if tag == "i" else self.s2_ie),
                                (self.M_e, self.grid_e,
                                 self.s2_ie if tag == "i" else self.s2_ee)):
            nodes = np.stack([a.ravel() for a in grid_b.nodes()], axis=1)
            vals = M_b.ravel()
            for j, x in enumerate(xi):
                d = x[None, :] - nodes
                ang = np.abs(d @ self.omg.T) @ self.womg
                out[j] += s2 * grid_b.weight * float(ang @ vals)
        return out if out.size > 1 else float(out[0])


def _pcg(apply_A, precond, inner, b, tol, maxiter):
    """Preconditioned conjugate gradients in a caller-supplied inner product."""
    x = tuple(np.zeros_like(c) for c in b)
    r = b
    bnorm = np.sqrt(inner(b, b))
    if bnorm == 0.0:
        return x, 0
    z = precond(r)
    p = z
    rz = inner(r, z)
    for it in range(maxiter):
        Ap = apply_A(p)
        pAp = inner(p, Ap)
        if pAp <= 0:
            raise NumericalError("operator lost positive-definiteness in PCG")
        alpha = rz / pAp
        x = tuple(xc + alpha * pc for xc, pc in zip(x, p))
        r = tuple(rc - alpha * ac for rc, ac in zip(r, Ap))
        if np.sqrt(inner(r, r)) <= tol * bnorm:
            return x, it + 1
        z = precond(r)
        rz_new = inner(r, z)
        beta = rz_new / rz
        rz = rz_new
        p = tuple(zc + beta * pc for zc, pc in zip(z, p))
    raise NumericalError(f"PCG failed to reach tol {tol} in {maxiter} iterations")


def solve_Linv(op, h, tol: float = 1e-10, maxiter: int = 500,
               pre_check: float = 1e-8):
    """Solve L g = h for g in the microscopic subspace.

    h must carry no invariant content; the iteration runs conjugate
    gradients on -L (symmetric positive definite on N-perp), re-projecting
    every step, with the loss frequency as Jacobi preconditioner.
    """
    psi = invariant_fields(op.params, op.grid_i, op.grid_e)
    moments = np.array([
        float(np.sum(p_i * h[0])) * op.grid_i.weight
        + float(np.sum(p_e * h[1])) * op.grid_e.weight
        for p_i, p_e in psi])
    scale = op.norm(h)
    if scale > 0 and np.max(np.abs(moments)) > pre_check * max(scale, 1.0):
        raise DomainError("right-hand side has invariant content; project first")

    def apply_A(v):
        out = op.apply_nofix(v)
        f = op.project(out)
        return (-f[0], -f[1])

    def precond(r):
        return op.project((r[0] / op.jacobi_i, r[1] / op.jacobi_e))

    b = op.project(h)
    g, iters = _pcg(apply_A, precond, op.inner, (-b[0], -b[1]), tol, maxiter)
    return op.project(g), iters


@dataclass
class CoercivityResult:
    delta: float
    quotients: np.ndarray


def _random_micro(op, rng):
    """Random smooth microscopic element: Maxwellian times a cubic polynomial."""
    parts = []
    for M, grid in ((op.M_i, op.grid_i), (op.M_e, op.grid_e)):
        x1, x2, x3 = grid.nodes()
        c = rng.normal(size=10)
        poly = (c[0] + c[1] * x1 + c[2] * x2 + c[3] * x3
                + c[4] * x1 * x2 + c[5] * x2 * x3 + c[6] * x1 * x3
                + c[7] * x1 ** 2 + c[8] * x2 ** 2 + c[9] * x1 ** 3)
        parts.append(M * poly)
    return op.project(tuple(parts))


def coercivity_estimate(op: LinearizedOperator, weight: BiMaxwellian = None,
                        n_samples: int = 100, seed: int = 2024):
    """Minimum Rayleigh quotient <-L g, g>_W / <(1+|xi|) g, g>_W over random
    microscopic samples; positive when the linearized H-theorem holds.

    When a non-anchor weight is supplied, its temperature must exceed half
    the anchor temperature (the shifted-weight coercivity hypothesis).
    """
    if weight is None:
        W = (op.M_i, op.M_e)
    else:
        if weight.theta <= op.anchor.theta / 2.0:
            raise DomainError("weight temperature must exceed half the anchor's")
        W = (discrete_maxwellian(op.params.ion, weight.n_i, weight.u,
                                 weight.theta, op.grid_i, strict=False)[0],
             discrete_maxwellian(op.params.electron, weight.n_e, weight.u,
                                 weight.theta, op.grid_e, strict=False)[0])
    s_i, s_e = op.one_plus_speed()
    rng = np.random.default_rng(seed)
    quots = np.empty(n_samples)
    for k in range(n_samples):
        g = _random_micro(op, rng)
        Lg = op.apply_nofix(g)
        num = -op.inner(Lg, g, weights=W)
        den = op.inner((s_i * g[0], s_e * g[1]), g, weights=W)
        quots[k] = num / den
    return CoercivityResult(float(np.min(quots)), quots)


# -- single-species machinery (diffusion and heat conduction) ------------


class SingleSpeciesOperator:
    """Like-particle linearized operator around one Maxwellian anchor."""

    def __init__(self, sp: SpeciesParams, anchor: SingleMaxwellian,
                 grid: VelocityGrid, quad: SphereQuadrature = SphereQuadrature()):
        self.sp = sp
        self.anchor = anchor
        self.grid = grid
        self.omg, self.womg = quad.nodes_weights()
        self.M, _ = discrete_maxwellian(sp, anchor.n, anchor.u, anchor.theta,
                                        grid, strict=False)
        self.s2 = kernel_prefactor(sp, sp)
        self.nu = _nu_pair(grid, self.M, grid, self.s2, self.omg, self.womg)
        dg = _kernels.form_like_diag(self.M, grid.n, grid.dv, grid.weight,
                                     self.omg, self.womg, self.s2)
        self.jacobi = dg / (self.M * grid.weight)
        x1, x2, x3 = grid.nodes()
        self._psi = [np.ones_like(x1), x1, x2, x3, grid.speed_sq()]
        w = grid.weight
        self._gram = np.array([[float(np.sum(pa * pb * self.M)) * w
                                for pb in self._psi] for pa in self._psi])

    def inner(self, a, b):
        return float(np.sum(a[0] * b[0] / self.M)) * self.grid.weight

    def project(self, g):
        """Remove the five-dimensional collision-invariant span."""
        w = self.grid.weight
        mom = np.array([float(np.sum(p * g)) * w for p in self._psi])
        coef = np.linalg.solve(self._gram, mom)
        return g - sum(c * p for c, p in zip(coef, self._psi)) * self.M

    def apply_nofix(self, g):
        acc = _kernels.form_like_kernel(g / self.M, self.M, self.grid.n,
                                        self.grid.dv, self.grid.weight,
                                        self.omg, self.womg, self.s2)
        return -acc / self.grid.weight

    def solve(self, h, tol=1e-10, maxiter=500):
        def apply_A(v):
            return (-self.project(self.apply_nofix(v[0])),)

        def precond(r):
            return (self.project(r[0] / self.jacobi),)

        b = self.project(h)
        g, iters = _pcg(apply_A, precond, self.inner, (-b,), tol, maxiter)
        return self.project(g[0]), iters


@dataclass
class TransportCoefficients:
    """Viscosity and heat conductivity of both species at one temperature.

    mu_* are the off-diagonal-flux values (the xi1 xi2 route); the xi1 xi3
    and xi1^2 routes are kept for isotropy diagnostics.
    """

    theta: float
    mu_i: float
    mu_e: float
    kappa_i: float
    kappa_e: float
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if min(self.mu_i, self.mu_e, self.kappa_i, self.kappa_e) <= 0:
            raise NumericalError("transport coefficients must be positive")


def _species_transport(sp: SpeciesParams, theta: float, u, n_v, r_cut, quad,
                       tol):
    extent = recommended_extent(sp, 0.0, theta, r_cut)
    grid = VelocityGrid(n_v, extent, center=tuple(u))
    op = SingleSpeciesOperator(sp, SingleMaxwellian("x", 1.0, tuple(u), theta),
                               grid, quad)
    x1, x2, x3 = grid.nodes()
    m, kth = sp.mass, sp.k * theta
    res = {}
    for tag, wgt in (("12", m * x1 * x2), ("13", m * x1 * x3),
                     ("11", m * x1 * x1)):
        g, _ = op.solve(op.project(wgt * op.M), tol=tol)
        val = -float(np.sum(wgt * g)) * grid.weight / kth
        res["mu_" + tag] = val / 3.0 if tag == "11" else val
    wgt = m * grid.speed_sq(u) * x1
    g, _ = op.solve(op.project(wgt * op.M), tol=tol)
    res["kappa"] = -float(np.sum(wgt * g)) * grid.weight / (4.0 * sp.k * theta ** 2)
    return res


def transport_coefficients(params: PlasmaParams, theta: float,
                           u=(0.0, 0.0, 0.0), n_v: int = 12,
                           r_cut: float = 5.0,
                           quad: SphereQuadrature = SphereQuadrature(),
                           tol: float = 1e-10) -> TransportCoefficients:
    """Viscosity mu_A and heat conductivity kappa_A from the inverse
    linearized like-particle operator at unit density.

    The velocity box is centred on the bulk velocity and scaled with the
    thermal speed, so temperature rescaling and bulk shifts act on the
    discrete problem as exact similarities.
    """
    if theta <= 0:
        raise DomainError("transport requires theta > 0")
    res_i = _species_transport(params.ion, theta, u, n_v, r_cut, quad, tol)
    res_e = _species_transport(params.electron, theta, u, n_v, r_cut, quad, tol)
    return TransportCoefficients(
        theta=theta,
        mu_i=res_i["mu_12"], mu_e=res_e["mu_12"],
        kappa_i=res_i["kappa"], kappa_e=res_e["kappa"],
        detail={"i": res_i, "e": res_e})


def background_G(op: LinearizedOperator, dn_i: float, dn_e: float,
                 du1: float, dtheta: float, tol: float = 1e-10):
    """Microscopic background profile driven by smooth-wave gradients.

    Four sources (velocity gradient, temperature gradient, density
    gradients, and the mixed temperature correction), each projected onto
    the microscopic subspace and passed through the inverse linearized
    operator.  Linear in the gradients; identically zero when they vanish.
    """
    p = op.params
    th = op.anchor.theta
    u = op.anchor.u
    xi1_i = op.grid_i.nodes()[0]
    xi1_e = op.grid_e.nodes()[0]
    sq_i = op.grid_i.speed_sq(u)
    sq_e = op.grid_e.speed_sq(u)
    m_i, m_e = p.ion.mass, p.electron.mass

    c_u = 1.5 * du1 / th
    c_t = 0.75 * dtheta / th ** 2
    c_m = -1.5 * dtheta / th
    sources = [
        (c_u * m_i * xi1_i ** 2 * op.M_i, c_u * m_e * xi1_e ** 2 * op.M_e),
        (c_t * m_i * xi1_i * sq_i * op.M_i, c_t * m_e * xi1_e * sq_e * op.M_e),
        ((dn_i / op.anchor.n_i) * xi1_i * op.M_i,
         (dn_e / op.anchor.n_e) * xi1_e * op.M_e),
        (c_m * xi1_i * op.M_i, c_m * xi1_e * op.M_e),
    ]
    out_i = np.zeros_like(op.M_i)
    out_e = np.zeros_like(op.M_e)
    for s in sources:
        if np.all(s[0] == 0.0) and np.all(s[1] == 0.0):
            continue
        g, _ = solve_Linv(op, op.project(s), tol=tol)
        out_i += g[0]
        out_e += g[1]
    return out_i, out_e
