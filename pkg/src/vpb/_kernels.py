"""Numba kernels for the hard-sphere collision machinery.

All kernels run single-threaded with a fixed iteration order, so outputs are
bit-reproducible.  Off-grid post-collision velocities are evaluated by
trilinear interpolation with zero extension outside the velocity box.

Index conventions: a velocity node is addressed by integer triple (i0,i1,i2)
on a uniform lattice xi = origin + idx * dv per axis.  Fractional coordinates
t = (xi - origin) / dv are used for interpolation.
"""

import numpy as np
from numba import njit

_OPTS = dict(cache=True, fastmath=False)


@njit(inline="always")
def _gather(F, t0, t1, t2, n):
    # trilinear gather at fractional coords; zero outside the box
    if t0 < 0.0 or t0 > n - 1.0 or t1 < 0.0 or t1 > n - 1.0 \
            or t2 < 0.0 or t2 > n - 1.0:
        return 0.0
    i0 = int(t0)
    i1 = int(t1)
    i2 = int(t2)
    if i0 > n - 2:
        i0 = n - 2
    if i1 > n - 2:
        i1 = n - 2
    if i2 > n - 2:
        i2 = n - 2
    f0 = t0 - i0
    f1 = t1 - i1
    f2 = t2 - i2
    g0 = 1.0 - f0
    g1 = 1.0 - f1
    g2 = 1.0 - f2
    return (F[i0, i1, i2] * g0 * g1 * g2
            + F[i0 + 1, i1, i2] * f0 * g1 * g2
            + F[i0, i1 + 1, i2] * g0 * f1 * g2
            + F[i0, i1, i2 + 1] * g0 * g1 * f2
            + F[i0 + 1, i1 + 1, i2] * f0 * f1 * g2
            + F[i0 + 1, i1, i2 + 1] * f0 * g1 * f2
            + F[i0, i1 + 1, i2 + 1] * g0 * f1 * f2
            + F[i0 + 1, i1 + 1, i2 + 1] * f0 * f1 * f2)


@njit(**_OPTS)
def q_ab_kernel(FA, FB, oA0, oA1, oA2, dvA, nA, oB0, oB1, oB2, dvB, nB,
                omg, womg, sigma2, alphaA, alphaB, wB, mode):
    """Gather-form hard-sphere operator Q_AB(F_A, F_B) on the A grid.

    mode: 0 = gain - loss, 1 = gain only, 2 = loss only (loss returned with
    its physical negative sign).
    """
    out = np.zeros((nA, nA, nA))
    P = omg.shape[0]
    for k0 in range(nA):
        xa0 = oA0 + k0 * dvA
        for k1 in range(nA):
            xa1 = oA1 + k1 * dvA
            for k2 in range(nA):
                xa2 = oA2 + k2 * dvA
                fa = FA[k0, k1, k2]
                acc = 0.0
                for l0 in range(nB):
                    d0 = xa0 - (oB0 + l0 * dvB)
                    for l1 in range(nB):
                        d1 = xa1 - (oB1 + l1 * dvB)
                        for l2 in range(nB):
                            d2 = xa2 - (oB2 + l2 * dvB)
                            fb = FB[l0, l1, l2]
                            for p in range(P):
                                w0 = omg[p, 0]
                                w1 = omg[p, 1]
                                w2 = omg[p, 2]
                                dot = d0 * w0 + d1 * w1 + d2 * w2
                                if dot == 0.0:
                                    continue
                                b = womg[p] * abs(dot)
                                term = 0.0
                                if mode != 2:
                                    ca = alphaA * dot / dvA
                                    cb = alphaB * dot / dvB
                                    ga = _gather(FA,
                                                 k0 - ca * w0,
                                                 k1 - ca * w1,
                                                 k2 - ca * w2, nA)
                                    gb = _gather(FB,
                                                 l0 + cb * w0,
                                                 l1 + cb * w1,
                                                 l2 + cb * w2, nB)
                                    term += ga * gb
                                if mode != 1:
                                    term -= fa * fb
                                acc += b * term
                out[k0, k1, k2] = sigma2 * wB * acc
    return out


@njit(**_OPTS)
def nu_kernel(oA0, oA1, oA2, dvA, nA, MB, oB0, oB1, oB2, dvB, nB,
              omg, womg, sigma2, wB):
    """Loss frequency nu_AB(xi) = sigma2 * int B(|xi-xi*|,w) M_B(xi*) over the
    full sphere, evaluated with the same quadrature the collision kernels use."""
    out = np.zeros((nA, nA, nA))
    P = omg.shape[0]
    for k0 in range(nA):
        xa0 = oA0 + k0 * dvA
        for k1 in range(nA):
            xa1 = oA1 + k1 * dvA
            for k2 in range(nA):
                xa2 = oA2 + k2 * dvA
                acc = 0.0
                for l0 in range(nB):
                    d0 = xa0 - (oB0 + l0 * dvB)
                    for l1 in range(nB):
                        d1 = xa1 - (oB1 + l1 * dvB)
                        for l2 in range(nB):
                            d2 = xa2 - (oB2 + l2 * dvB)
                            mb = MB[l0, l1, l2]
                            s = 0.0
                            for p in range(P):
                                dot = d0 * omg[p, 0] + d1 * omg[p, 1] \
                                    + d2 * omg[p, 2]
                                s += womg[p] * abs(dot)
                            acc += s * mb
                out[k0, k1, k2] = sigma2 * wB * acc
    return out


@njit(**_OPTS)
def form_like_kernel(ghat, M, n, dv, w, omg, womg, sigma2):
    """Accumulate dE/dh for the like-species quarter Dirichlet form.

    E(g,h) = 1/4 sum_{k,l,p} R M_k M_l s(g) s(h) over ordered node pairs with
    equal-mass kinematics; s(x) = I x(xi') + I x(xi*') - x_k - x_l.
    The caller turns the accumulator into the operator via
    (L g)_m = -(M_m / w) acc_m.

    The pair sum is organised by integer relative offset so the collision
    geometry is computed once per (offset, omega) class.
    """
    acc = np.zeros((n, n, n))
    P = omg.shape[0]
    inv = 1.0 / dv
    for d0 in range(-(n - 1), n):
        k0lo = max(0, d0)
        k0hi = n + min(0, d0)
        for d1 in range(-(n - 1), n):
            k1lo = max(0, d1)
            k1hi = n + min(0, d1)
            for d2 in range(-(n - 1), n):
                k2lo = max(0, d2)
                k2hi = n + min(0, d2)
                dd0 = d0 * dv
                dd1 = d1 * dv
                dd2 = d2 * dv
                for p in range(P):
                    w0 = omg[p, 0]
                    w1 = omg[p, 1]
                    w2 = omg[p, 2]
                    dot = dd0 * w0 + dd1 * w1 + dd2 * w2
                    if dot == 0.0:
                        continue
                    kin = 0.25 * sigma2 * womg[p] * abs(dot) * w * w
                    # fractional displacement of xi' from node k (equal mass)
                    c = dot * inv
                    f0 = -c * w0
                    f1 = -c * w1
                    f2 = -c * w2
                    for k0 in range(k0lo, k0hi):
                        l0 = k0 - d0
                        t0 = k0 + f0
                        s0 = l0 - f0
                        for k1 in range(k1lo, k1hi):
                            l1 = k1 - d1
                            t1 = k1 + f1
                            s1 = l1 - f1
                            for k2 in range(k2lo, k2hi):
                                l2 = k2 - d2
                                t2 = k2 + f2
                                s2 = l2 - f2
                                s = -ghat[k0, k1, k2] - ghat[l0, l1, l2]
                                s += _gather(ghat, t0, t1, t2, n)
                                s += _gather(ghat, s0, s1, s2, n)
                                e = kin * M[k0, k1, k2] * M[l0, l1, l2] * s
                                if e == 0.0:
                                    continue
                                acc[k0, k1, k2] -= e
                                acc[l0, l1, l2] -= e
                                _scatter(acc, t0, t1, t2, n, e)
                                _scatter(acc, s0, s1, s2, n, e)
    return acc


@njit(inline="always")
def _scatter(acc, t0, t1, t2, n, val):
    # trilinear deposit at fractional coords; dropped outside the box
    if t0 < 0.0 or t0 > n - 1.0 or t1 < 0.0 or t1 > n - 1.0 \
            or t2 < 0.0 or t2 > n - 1.0:
        return
    i0 = int(t0)
    i1 = int(t1)
    i2 = int(t2)
    if i0 > n - 2:
        i0 = n - 2
    if i1 > n - 2:
        i1 = n - 2
    if i2 > n - 2:
        i2 = n - 2
    f0 = t0 - i0
    f1 = t1 - i1
    f2 = t2 - i2
    g0 = 1.0 - f0
    g1 = 1.0 - f1
    g2 = 1.0 - f2
    acc[i0, i1, i2] += val * g0 * g1 * g2
    acc[i0 + 1, i1, i2] += val * f0 * g1 * g2
    acc[i0, i1 + 1, i2] += val * g0 * f1 * g2
    acc[i0, i1, i2 + 1] += val * g0 * g1 * f2
    acc[i0 + 1, i1 + 1, i2] += val * f0 * f1 * g2
    acc[i0 + 1, i1, i2 + 1] += val * f0 * g1 * f2
    acc[i0, i1 + 1, i2 + 1] += val * g0 * f1 * f2
    acc[i0 + 1, i1 + 1, i2 + 1] += val * f0 * f1 * f2


@njit(**_OPTS)
def form_cross_kernel(ghat_i, ghat_e, Mi, Me,
                      oI0, oI1, oI2, dvI, nI, oE0, oE1, oE2, dvE, nE,
                      omg, womg, sigma2, alphaI, alphaE, wI, wE):
    """Accumulate dE/dh for the half cross-species Dirichlet form.

    Events pair an ion node (xi) with an electron node (xi*) using disparate
    mass kinematics; s(x) = I x_i(xi') + I x_e(xi*') - x_i(k) - x_e(l).
    Returns the pair of accumulators (ion grid, electron grid).
    """
    acc_i = np.zeros((nI, nI, nI))
    acc_e = np.zeros((nE, nE, nE))
    P = omg.shape[0]
    for k0 in range(nI):
        xa0 = oI0 + k0 * dvI
        for k1 in range(nI):
            xa1 = oI1 + k1 * dvI
            for k2 in range(nI):
                xa2 = oI2 + k2 * dvI
                gi = ghat_i[k0, k1, k2]
                mi = Mi[k0, k1, k2]
                for l0 in range(nE):
                    d0 = xa0 - (oE0 + l0 * dvE)
                    for l1 in range(nE):
                        d1 = xa1 - (oE1 + l1 * dvE)
                        for l2 in range(nE):
                            d2 = xa2 - (oE2 + l2 * dvE)
                            ge = ghat_e[l0, l1, l2]
                            me = Me[l0, l1, l2]
                            mm = mi * me
                            if mm == 0.0:
                                continue
                            for p in range(P):
                                w0 = omg[p, 0]
                                w1 = omg[p, 1]
                                w2 = omg[p, 2]
                                dot = d0 * w0 + d1 * w1 + d2 * w2
                                if dot == 0.0:
                                    continue
                                kin = 0.5 * sigma2 * womg[p] * abs(dot) * wI * wE
                                ci = alphaI * dot / dvI
                                ce = alphaE * dot / dvE
                                t0 = k0 - ci * w0
                                t1 = k1 - ci * w1
                                t2 = k2 - ci * w2
                                s0 = l0 + ce * w0
                                s1 = l1 + ce * w1
                                s2 = l2 + ce * w2
                                s = -gi - ge
                                s += _gather(ghat_i, t0, t1, t2, nI)
                                s += _gather(ghat_e, s0, s1, s2, nE)
                                e = kin * mm * s
                                acc_i[k0, k1, k2] -= e
                                acc_e[l0, l1, l2] -= e
                                _scatter(acc_i, t0, t1, t2, nI, e)
                                _scatter(acc_e, s0, s1, s2, nE, e)
    return acc_i, acc_e


@njit(**_OPTS)
def iform_like_kernel(F, G, n, dv, w, omg, womg, sigma2):
    """Symmetric like-species collision form I_AA(F, G)."""
    P = omg.shape[0]
    total = 0.0
    for k0 in range(n):
        for k1 in range(n):
            for k2 in range(n):
                f_k = F[k0, k1, k2]
                g_k = G[k0, k1, k2]
                for l0 in range(n):
                    d0 = (k0 - l0) * dv
                    for l1 in range(n):
                        d1 = (k1 - l1) * dv
                        for l2 in range(n):
                            d2 = (k2 - l2) * dv
                            f_l = F[l0, l1, l2]
                            g_l = G[l0, l1, l2]
                            for p in range(P):
                                w0 = omg[p, 0]
                                w1 = omg[p, 1]
                                w2 = omg[p, 2]
                                dot = d0 * w0 + d1 * w1 + d2 * w2
                                if dot == 0.0:
                                    continue
                                c = dot / dv
                                t0 = k0 - c * w0
                                t1 = k1 - c * w1
                                t2 = k2 - c * w2
                                s0 = l0 + c * w0
                                s1 = l1 + c * w1
                                s2 = l2 + c * w2
                                fp = _gather(F, t0, t1, t2, n)
                                fsp = _gather(F, s0, s1, s2, n)
                                gp = _gather(G, t0, t1, t2, n)
                                gsp = _gather(G, s0, s1, s2, n)
                                total += womg[p] * abs(dot) \
                                    * (fp * fsp - f_k * f_l) \
                                    * (gp + gsp - g_k - g_l)
    return total * sigma2 * w * w


@njit(**_OPTS)
def iform_cross_kernel(F_first, F_second, G_first, G_second,
                       o10, o11, o12, dv1, n1, o20, o21, o22, dv2, n2,
                       omg, womg, sigma2, alpha1, alpha2, w1, w2):
    """Symmetric cross collision form with species 1 at xi, species 2 at xi*."""
    P = omg.shape[0]
    total = 0.0
    for k0 in range(n1):
        xa0 = o10 + k0 * dv1
        for k1 in range(n1):
            xa1 = o11 + k1 * dv1
            for k2 in range(n1):
                xa2 = o12 + k2 * dv1
                f_k = F_first[k0, k1, k2]
                g_k = G_first[k0, k1, k2]
                for l0 in range(n2):
                    d0 = xa0 - (o20 + l0 * dv2)
                    for l1 in range(n2):
                        d1 = xa1 - (o21 + l1 * dv2)
                        for l2 in range(n2):
                            d2 = xa2 - (o22 + l2 * dv2)
                            f_l = F_second[l0, l1, l2]
                            g_l = G_second[l0, l1, l2]
                            for p in range(P):
                                w0 = omg[p, 0]
                                w1_ = omg[p, 1]
                                w2_ = omg[p, 2]
                                dot = d0 * w0 + d1 * w1_ + d2 * w2_
                                if dot == 0.0:
                                    continue
                                c1 = alpha1 * dot / dv1
                                c2 = alpha2 * dot / dv2
                                fp = _gather(F_first, k0 - c1 * w0,
                                             k1 - c1 * w1_, k2 - c1 * w2_, n1)
                                fsp = _gather(F_second, l0 + c2 * w0,
                                              l1 + c2 * w1_, l2 + c2 * w2_, n2)
                                gp = _gather(G_first, k0 - c1 * w0,
                                             k1 - c1 * w1_, k2 - c1 * w2_, n1)
                                gsp = _gather(G_second, l0 + c2 * w0,
                                              l1 + c2 * w1_, l2 + c2 * w2_, n2)
                                total += womg[p] * abs(dot) \
                                    * (fp * fsp - f_k * f_l) \
                                    * (gp + gsp - g_k - g_l)
    return total * sigma2 * w1 * w2


@njit(inline="always")
def _slot_fill(idx, wt, cnt, i0, i1, i2, val):
    idx[cnt, 0] = i0
    idx[cnt, 1] = i1
    idx[cnt, 2] = i2
    wt[cnt] = val
    return cnt + 1


@njit(inline="always")
def _slot_stencil(idx, wt, cnt, t0, t1, t2, n, sign):
    if t0 < 0.0 or t0 > n - 1.0 or t1 < 0.0 or t1 > n - 1.0 \
            or t2 < 0.0 or t2 > n - 1.0:
        return cnt
    i0 = int(t0)
    i1 = int(t1)
    i2 = int(t2)
    if i0 > n - 2:
        i0 = n - 2
    if i1 > n - 2:
        i1 = n - 2
    if i2 > n - 2:
        i2 = n - 2
    f0 = t0 - i0
    f1 = t1 - i1
    f2 = t2 - i2
    for c0 in range(2):
        w0 = f0 if c0 else 1.0 - f0
        for c1 in range(2):
            w1 = f1 if c1 else 1.0 - f1
            for c2 in range(2):
                w2 = f2 if c2 else 1.0 - f2
                cnt = _slot_fill(idx, wt, cnt, i0 + c0, i1 + c1, i2 + c2,
                                 sign * w0 * w1 * w2)
    return cnt


@njit(inline="always")
def _diag_accumulate(acc, idx, wt, cnt, kin, species):
    # merge duplicate nodes, then deposit kin * (total weight)^2
    for a in range(cnt):
        if wt[a] == 0.0:
            continue
        tot = wt[a]
        for b in range(a + 1, cnt):
            if species[a] == species[b] and idx[b, 0] == idx[a, 0] \
                    and idx[b, 1] == idx[a, 1] and idx[b, 2] == idx[a, 2]:
                tot += wt[b]
                wt[b] = 0.0
        acc[species[a], idx[a, 0], idx[a, 1], idx[a, 2]] += kin * tot * tot


@njit(**_OPTS)
def form_like_diag(M, n, dv, w, omg, womg, sigma2):
    """Diagonal of the like-species quarter form in the dE/dh normalisation."""
    acc = np.zeros((1, n, n, n))
    P = omg.shape[0]
    inv = 1.0 / dv
    idx = np.empty((18, 3), dtype=np.int64)
    wt = np.empty(18)
    spec = np.zeros(18, dtype=np.int64)
    for d0 in range(-(n - 1), n):
        for d1 in range(-(n - 1), n):
            for d2 in range(-(n - 1), n):
                dd0 = d0 * dv
                dd1 = d1 * dv
                dd2 = d2 * dv
                for p in range(P):
                    dot = dd0 * omg[p, 0] + dd1 * omg[p, 1] + dd2 * omg[p, 2]
                    if dot == 0.0:
                        continue
                    kin = 0.25 * sigma2 * womg[p] * abs(dot) * w * w
                    c = dot * inv
                    f0 = -c * omg[p, 0]
                    f1 = -c * omg[p, 1]
                    f2 = -c * omg[p, 2]
                    for k0 in range(max(0, d0), n + min(0, d0)):
                        l0 = k0 - d0
                        for k1 in range(max(0, d1), n + min(0, d1)):
                            l1 = k1 - d1
                            for k2 in range(max(0, d2), n + min(0, d2)):
                                l2 = k2 - d2
                                cnt = 0
                                cnt = _slot_fill(idx, wt, cnt, k0, k1, k2, -1.0)
                                cnt = _slot_fill(idx, wt, cnt, l0, l1, l2, -1.0)
                                cnt = _slot_stencil(idx, wt, cnt, k0 + f0,
                                                    k1 + f1, k2 + f2, n, 1.0)
                                cnt = _slot_stencil(idx, wt, cnt, l0 - f0,
                                                    l1 - f1, l2 - f2, n, 1.0)
                                e = kin * M[k0, k1, k2] * M[l0, l1, l2]
                                _diag_accumulate(acc, idx, wt, cnt, e, spec)
    return acc[0]


@njit(**_OPTS)
def form_cross_diag(Mi, Me, oI0, oI1, oI2, dvI, nI, oE0, oE1, oE2, dvE, nE,
                    omg, womg, sigma2, alphaI, alphaE, wI, wE):
    """Diagonals of the half cross form on both grids."""
    acc_i = np.zeros((1, nI, nI, nI))
    acc_e = np.zeros((1, nE, nE, nE))
    P = omg.shape[0]
    idx = np.empty((18, 3), dtype=np.int64)
    wt = np.empty(18)
    spec = np.zeros(18, dtype=np.int64)
    for k0 in range(nI):
        xa0 = oI0 + k0 * dvI
        for k1 in range(nI):
            xa1 = oI1 + k1 * dvI
            for k2 in range(nI):
                xa2 = oI2 + k2 * dvI
                mi = Mi[k0, k1, k2]
                for l0 in range(nE):
                    d0 = xa0 - (oE0 + l0 * dvE)
                    for l1 in range(nE):
                        d1 = xa1 - (oE1 + l1 * dvE)
                        for l2 in range(nE):
                            d2 = xa2 - (oE2 + l2 * dvE)
                            mm = mi * Me[l0, l1, l2]
                            if mm == 0.0:
                                continue
                            for p in range(P):
                                dot = d0 * omg[p, 0] + d1 * omg[p, 1] \
                                    + d2 * omg[p, 2]
                                if dot == 0.0:
                                    continue
                                kin = 0.5 * sigma2 * womg[p] * abs(dot) * wI * wE
                                ci = alphaI * dot / dvI
                                ce = alphaE * dot / dvE
                                # ion slots (species 0) then electron (1)
                                cnt = 0
                                cnt = _slot_fill(idx, wt, cnt, k0, k1, k2, -1.0)
                                spec[0] = 0
                                before = cnt
                                cnt = _slot_stencil(idx, wt, cnt,
                                                    k0 - ci * omg[p, 0],
                                                    k1 - ci * omg[p, 1],
                                                    k2 - ci * omg[p, 2], nI, 1.0)
                                for a in range(before, cnt):
                                    spec[a] = 0
                                before = cnt
                                cnt = _slot_fill(idx, wt, cnt, l0, l1, l2, -1.0)
                                spec[before] = 1
                                before = cnt
                                cnt = _slot_stencil(idx, wt, cnt,
                                                    l0 + ce * omg[p, 0],
                                                    l1 + ce * omg[p, 1],
                                                    l2 + ce * omg[p, 2], nE, 1.0)
                                for a in range(before, cnt):
                                    spec[a] = 1
                                e = kin * mm
                                # split accumulation per species array
                                for a in range(cnt):
                                    if wt[a] == 0.0:
                                        continue
                                    tot = wt[a]
                                    for b in range(a + 1, cnt):
                                        if spec[b] == spec[a] \
                                                and idx[b, 0] == idx[a, 0] \
                                                and idx[b, 1] == idx[a, 1] \
                                                and idx[b, 2] == idx[a, 2]:
                                            tot += wt[b]
                                            wt[b] = 0.0
                                    if spec[a] == 0:
                                        acc_i[0, idx[a, 0], idx[a, 1],
                                              idx[a, 2]] += e * tot * tot
                                    else:
                                        acc_e[0, idx[a, 0], idx[a, 1],
                                              idx[a, 2]] += e * tot * tot
    return acc_i[0], acc_e[0]
