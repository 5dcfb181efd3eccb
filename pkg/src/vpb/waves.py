"""Quasineutral Euler structure: characteristics, the 3-rarefaction curve,
exact self-similar fans, Burgers-smoothed waves, decay-rate measurements,
entropy/pressure, and the zero-order stability matrix with its minors.

Everything is closed-form except the Burgers characteristic root find and
the L^p norms of wave derivatives, which use guarded bisection/Newton and
composite Simpson quadrature respectively.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ConfigurationError, DomainError, PlasmaParams

ENTROPY_K = 1.0 / (2.0 * np.pi * np.e)


def pressure_coefficient(params: PlasmaParams) -> float:
    """c in P(n, S) = c n theta for the quasineutral mixture."""
    q_i, q_e = params.ion.charge, params.electron.charge
    m_i, m_e = params.ion.mass, params.electron.mass
    return 2.0 * (q_i - q_e) / (3.0 * (m_e * q_i - m_i * q_e))


def mixture_density_factor(params: PlasmaParams) -> float:
    """(n_i + n_e)/n_e under quasineutrality = (q_i - q_e)/q_i."""
    q_i, q_e = params.ion.charge, params.electron.charge
    return (q_i - q_e) / q_i


@dataclass(frozen=True)
class EulerParams:
    """Derived constants of the quasineutral Euler system."""

    params: PlasmaParams

    @property
    def c(self) -> float:
        return pressure_coefficient(self.params)

    @property
    def k(self) -> float:
        return ENTROPY_K

    def __post_init__(self):
        if self.c <= 0:
            raise DomainError("pressure coefficient must be positive")


def phi_convex(y):
    """Phi(y) = y - 1 - ln y >= 0 with equality iff y = 1."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise DomainError("Phi requires positive argument")
    return y - 1.0 - np.log(y)


def entropy_pressure(n_bar, theta, params: PlasmaParams = None):
    """Entropy S = -(2/3) ln n_bar + ln(4 pi theta / 3) + 1 and P = 2/3 n_bar theta.

    Inverse: theta = (3/2) k e^S n_bar^(2/3) with k = 1/(2 pi e).
    """
    n_bar = np.asarray(n_bar, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(n_bar <= 0) or np.any(theta <= 0):
        raise DomainError("entropy requires positive density and temperature")
    S = -(2.0 / 3.0) * np.log(n_bar) + np.log(4.0 * np.pi / 3.0 * theta) + 1.0
    P = (2.0 / 3.0) * n_bar * theta
    return S, P


def theta_from_entropy(n_bar, S):
    return 1.5 * ENTROPY_K * np.exp(S) * np.asarray(n_bar, dtype=float) ** (2.0 / 3.0)


def adiabat_coefficient(n, theta):
    """A = theta / n^(2/3), constant along the wave."""
    return theta / n ** (2.0 / 3.0)


def sound_coefficient(params: PlasmaParams, A: float) -> float:
    """B = sqrt(10 A (q_i - q_e) / (9 (m_e q_i - m_i q_e))); dP/dn = B^2 n^(2/3)."""
    q_i, q_e = params.ion.charge, params.electron.charge
    m_i, m_e = params.ion.mass, params.electron.mass
    val = 10.0 * A * (q_i - q_e) / (9.0 * (m_e * q_i - m_i * q_e))
    if val <= 0:
        raise DomainError("invalid sound coefficient")
    return np.sqrt(val)


def characteristics(n, u1, S, params: PlasmaParams):
    """(lambda_1, lambda_2, lambda_3) of the quasineutral Euler system."""
    if np.any(np.asarray(n) <= 0):
        raise DomainError("characteristics need n > 0")
    A = 1.5 * ENTROPY_K * np.exp(S) * mixture_density_factor(params) ** (2.0 / 3.0)
    B = sound_coefficient(params, A)
    c = B * np.asarray(n, dtype=float) ** (1.0 / 3.0)
    return u1 - c, u1, u1 + c


def entropy_of_state(n, theta, params: PlasmaParams):
    """Entropy of the quasineutral state with electron density n."""
    S, _ = entropy_pressure(mixture_density_factor(params) * n, theta)
    return S


@dataclass
class RarefactionWave:
    """Far-field data of a 3-family rarefaction with its derived constants.

    The left and right states must lie on the same adiabat and on the
    3-rarefaction curve; densities are electron densities (ion densities
    follow from quasineutrality).
    """

    params: PlasmaParams
    n_minus: float
    u1_minus: float
    theta_minus: float
    n_plus: float
    u1_plus: float
    theta_plus: float
    A: float = field(init=False)
    B: float = field(init=False)
    S_minus: float = field(init=False)
    w_minus: float = field(init=False)
    w_plus: float = field(init=False)
    strength: float = field(init=False)

    def __post_init__(self):
        if min(self.n_minus, self.n_plus, self.theta_minus, self.theta_plus) <= 0:
            raise DomainError("wave states need positive density and temperature")
        if not (self.n_plus > self.n_minus and self.u1_plus > self.u1_minus):
            raise DomainError("3-rarefaction needs n_+ > n_- and u_+ > u_-")
        A_minus = adiabat_coefficient(self.n_minus, self.theta_minus)
        A_plus = adiabat_coefficient(self.n_plus, self.theta_plus)
        if abs(A_plus - A_minus) > 1e-12 * A_minus:
            raise DomainError("end states are not on a common adiabat")
        self.A = A_minus
        self.B = sound_coefficient(self.params, self.A)
        self.S_minus = entropy_of_state(self.n_minus, self.theta_minus, self.params)
        self.w_minus = self.u1_minus + self.B * self.n_minus ** (1.0 / 3.0)
        self.w_plus = self.u1_plus + self.B * self.n_plus ** (1.0 / 3.0)
        self.strength = (abs(self.n_plus - self.n_minus)
                         + abs(self.u1_plus - self.u1_minus)
                         + abs(self.theta_plus - self.theta_minus))

    @property
    def riemann_invariant(self) -> float:
        """u1 - 3 B n^(1/3), constant across the wave."""
        return self.u1_minus - 3.0 * self.B * self.n_minus ** (1.0 / 3.0)

    def curve_u1(self, n):
        """u1 on the 3-rarefaction curve through the left state."""
        return self.u1_minus + 3.0 * self.B * (np.asarray(n, float) ** (1.0 / 3.0)
                                               - self.n_minus ** (1.0 / 3.0))

    def ion_density(self, n_e):
        return self.params.charge_ratio * np.asarray(n_e, dtype=float)


def wave_from_right_density(params: PlasmaParams, n_minus: float,
                            u1_minus: float, theta_minus: float,
                            n_plus: float) -> RarefactionWave:
    """Construct the wave whose right state sits on the curve at n_plus."""
    A = adiabat_coefficient(n_minus, theta_minus)
    B = sound_coefficient(params, A)
    u1_plus = u1_minus + 3.0 * B * (n_plus ** (1.0 / 3.0) - n_minus ** (1.0 / 3.0))
    theta_plus = A * n_plus ** (2.0 / 3.0)
    return RarefactionWave(params, n_minus, u1_minus, theta_minus,
                           n_plus, u1_plus, theta_plus)


def wave_from_strength(params: PlasmaParams, n_minus: float, u1_minus: float,
                       theta_minus: float, delta_r: float) -> RarefactionWave:
    """Construct a wave of prescribed total strength |dn| + |du1| + |dtheta|."""
    if delta_r <= 0:
        raise DomainError("wave strength must be positive")
    A = adiabat_coefficient(n_minus, theta_minus)
    B = sound_coefficient(params, A)

    def strength(n_plus):
        dn = n_plus - n_minus
        du = 3.0 * B * (n_plus ** (1.0 / 3.0) - n_minus ** (1.0 / 3.0))
        dth = A * (n_plus ** (2.0 / 3.0) - n_minus ** (2.0 / 3.0))
        return dn + du + dth

    lo, hi = n_minus, n_minus * 2.0
    while strength(hi) < delta_r:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if strength(mid) < delta_r:
            lo = mid
        else:
            hi = mid
    return wave_from_right_density(params, n_minus, u1_minus, theta_minus,
                                   0.5 * (lo + hi))


def r3_membership(left, right, params: PlasmaParams, tol: float = 1e-10):
    """Check whether `right` is connected to `left` by a 3-rarefaction.

    States are (n, u1, theta) triples with electron densities.  Returns
    (decision, residuals) where residuals holds the adiabat defect, the
    curve defect in u1, and the ordering margins.
    """
    n_m, u_m, th_m = left
    n_p, u_p, th_p = right
    if min(n_m, n_p, th_m, th_p) <= 0:
        raise DomainError("states need positive density and temperature")
    A = adiabat_coefficient(n_m, th_m)
    B = sound_coefficient(params, A)
    adiabat = n_p ** (2.0 / 3.0) / th_p - n_m ** (2.0 / 3.0) / th_m
    curve = (u_p - u_m) - 3.0 * B * (n_p ** (1.0 / 3.0) - n_m ** (1.0 / 3.0))
    residuals = {
        "adiabat": adiabat,
        "curve": curve,
        "dn": n_p - n_m,
        "du1": u_p - u_m,
    }
    ok = (abs(adiabat) <= tol * (n_m ** (2.0 / 3.0) / th_m)
          and abs(curve) <= tol * max(1.0, abs(u_p - u_m))
          and n_p > n_m and u_p > u_m)
    return ok, residuals


def rarefaction_fan(z, wave: RarefactionWave):
    """Exact self-similar fan (n, u1, theta) at z = x/t."""
    z = np.asarray(z, dtype=float)
    B = wave.B
    n13 = (z - wave.u1_minus + 3.0 * B * wave.n_minus ** (1.0 / 3.0)) / (4.0 * B)
    n13 = np.clip(n13, wave.n_minus ** (1.0 / 3.0), wave.n_plus ** (1.0 / 3.0))
    n = n13 ** 3
    u1 = wave.curve_u1(n)
    theta = wave.A * n ** (2.0 / 3.0)
    return n, u1, theta


def burgers_initial(x, wave: RarefactionWave):
    """Monotone tanh data for the smoothing Burgers problem."""
    return 0.5 * (wave.w_plus + wave.w_minus) \
        + 0.5 * (wave.w_plus - wave.w_minus) * np.tanh(x)


def _sech2(y):
    y = abs(y)
    if y > 30.0:
        return 4.0 * np.exp(-2.0 * y)
    return 1.0 / np.cosh(y) ** 2


def _burgers_scalar(t, x, wave, tol):
    wp, wm = wave.w_plus, wave.w_minus
    mid = 0.5 * (wp + wm)
    amp = 0.5 * (wp - wm)

    def w0(y):
        return mid + amp * np.tanh(y)

    def res(y):
        return x - y - w0(y) * t

    lo = x - wp * t - 1.0
    hi = x - wm * t + 1.0
    flo, fhi = res(lo), res(hi)
    if not (flo <= 0.0 <= fhi or flo >= 0.0 >= fhi):
        raise DomainError("Burgers bracket failed; data not monotone?")
    y = 0.5 * (lo + hi)
    for _ in range(200):
        f = res(y)
        if abs(f) <= tol:
            break
        # res decreases in y: shrink the bracket, then take a guarded Newton step
        if f > 0:
            lo = y
        else:
            hi = y
        d = -1.0 - amp * t * _sech2(y)
        y_new = y - f / d
        if not (lo < y_new < hi):
            y_new = 0.5 * (lo + hi)
        y = y_new
    return w0(y), y


def burgers_w(t, x, wave: RarefactionWave, tol: float = 1e-13):
    """Solution of the Burgers problem by the method of characteristics.

    The foot point x0 solves x = x0 + w0(x0) t, unique because the initial
    data increases monotonically; the residual of the returned root is at
    most tol.
    """
    if t < 0:
        raise DomainError("Burgers solution needs t >= 0")
    xs = np.asarray(x, dtype=float)
    if xs.ndim == 0:
        return _burgers_scalar(t, float(x), wave, tol)[0]
    return np.array([_burgers_scalar(t, xx, wave, tol)[0] for xx in xs.ravel()]
                    ).reshape(xs.shape)


def smooth_wave(t, x, wave: RarefactionWave):
    """Smooth rarefaction profile (n, u1, theta) at (t, x).

    n is recovered from the characteristic speed by the closed form
    n^(1/3) = (w - u1_- + 3 B n_-^(1/3)) / (4 B); u1 and theta follow from
    the curve and the adiabat.
    """
    w = burgers_w(t, x, wave)
    B = wave.B
    n13 = (np.asarray(w) - wave.u1_minus
           + 3.0 * B * wave.n_minus ** (1.0 / 3.0)) / (4.0 * B)
    n = n13 ** 3
    u1 = np.asarray(w) - B * n13
    theta = wave.A * n13 ** 2
    return n, u1, theta


def smooth_wave_dx(t, x, wave: RarefactionWave):
    """Analytic x-derivatives (dn, du1, dtheta) of the smooth profile."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    wp, wm = wave.w_plus, wave.w_minus
    amp = 0.5 * (wp - wm)
    out = np.empty((3, len(xs)))
    B = wave.B
    for j, xx in enumerate(xs):
        w, y0 = _burgers_scalar(t, xx, wave, 1e-13)
        wp0 = amp * _sech2(y0)
        dw = wp0 / (1.0 + wp0 * t)
        n13 = (w - wave.u1_minus + 3.0 * B * wave.n_minus ** (1.0 / 3.0)) / (4.0 * B)
        dn13 = dw / (4.0 * B)
        out[0, j] = 3.0 * n13 ** 2 * dn13
        out[1, j] = 0.75 * dw
        out[2, j] = wave.A * 2.0 * n13 * dn13
    if np.asarray(x).ndim == 0:
        return out[:, 0]
    return out


def _lp_norm(vals, x, p):
    if np.isinf(p):
        return np.max(np.abs(vals))
    return np.trapezoid(np.abs(vals) ** p, x) ** (1.0 / p)


def lemma31_rates(wave: RarefactionWave, p_values=(1, 2, 8),
                  times=None, fit_window=(10.0, 100.0), n_quad: int = 4001):
    """Measured L^p norms of the wave's x-derivatives and fitted decay slopes.

    Also checks the pointwise positivity of du1/dx and the sup-distance of
    the smooth wave to the fan at increasing times.  The fit is a least
    squares line through log ||d/dx .||_p against log t inside fit_window.
    """
    if times is None:
        times = np.geomspace(1.0, 200.0, 12)
    times = np.asarray(times, dtype=float)
    amp = 0.5 * (wave.w_plus - wave.w_minus)
    # window where w0' is above threshold, mapped through the characteristics
    y_max = np.arccosh(max(np.sqrt(amp / 1e-14), 2.0))
    norms = {p: [] for p in p_values}
    positive = True
    for t in times:
        lo = -y_max + wave.w_minus * t - 1.0
        hi = y_max + wave.w_plus * t + 1.0
        xg = np.linspace(lo, hi, n_quad)
        d = smooth_wave_dx(t, xg, wave)
        if np.any(d[1] <= 0):
            positive = False
        comp = np.abs(d).max(axis=0)
        for p in p_values:
            norms[p].append(_lp_norm(comp, xg, p))
    slopes = {}
    mask = (times >= fit_window[0]) & (times <= fit_window[1])
    for p in p_values:
        y = np.log(np.asarray(norms[p])[mask])
        X = np.log(times[mask])
        slopes[p] = float(np.polyfit(X, y, 1)[0])
    # distance of the smooth wave to the fan over time
    sup_dist = []
    for t in times:
        lo = -y_max + wave.w_minus * t - 1.0
        hi = y_max + wave.w_plus * t + 1.0
        xg = np.linspace(lo, hi, 2001)
        nw, uw, thw = smooth_wave(t, xg, wave)
        nf, uf, thf = rarefaction_fan(xg / t, wave)
        sup_dist.append(float(np.max(np.abs(np.stack([nw - nf, uw - uf,
                                                      thw - thf])))))
    return {
        "times": times,
        "norms": {p: np.asarray(v) for p, v in norms.items()},
        "slopes": slopes,
        "du1_positive": positive,
        "sup_dist_to_fan": np.asarray(sup_dist),
    }


@dataclass
class StabilityMatrix:
    """The 4x4 symmetric zero-order energy matrix and its leading minors."""

    matrix: np.ndarray
    minors: np.ndarray

    @property
    def positive_definite(self) -> bool:
        return bool(np.all(self.minors > 0))


def stability_matrix(n_r: float, A: float, params: PlasmaParams) -> StabilityMatrix:
    """Assemble the stability matrix at mixture state n_r on the adiabat A.

    Rows/columns order the perturbations (n_i, n_e, u_1, theta); starred
    entries are filled by symmetry and the four leading principal minors are
    returned alongside.
    """
    if n_r <= 0:
        raise DomainError("stability matrix needs n_r > 0")
    q_i, q_e = params.ion.charge, params.electron.charge
    m_i, m_e = params.ion.mass, params.electron.mass
    B = sound_coefficient(params, A)
    d = m_e * q_i - m_i * q_e
    n13 = n_r ** (1.0 / 3.0)
    M = np.zeros((4, 4))
    M[0, 0] = -(4.0 / 9.0) * A * (q_i / q_e) / n13
    M[1, 1] = (4.0 / 9.0) * A / n13
    M[0, 2] = M[2, 0] = -(2.0 * A / (9.0 * B)) * m_i * (q_i - q_e) / d * n13
    M[1, 2] = M[2, 1] = -(2.0 * A / (9.0 * B)) * m_e * (q_i - q_e) / d * n13
    M[2, 2] = d / q_i * n_r
    M[2, 3] = M[3, 2] = (q_i - q_e) / (3.0 * q_i * B) * n13 ** 2
    M[3, 3] = 2.0 * (q_i - q_e) / (3.0 * q_i * A) * n13
    minors = np.array([np.linalg.det(M[:k, :k]) for k in range(1, 5)])
    return StabilityMatrix(M, minors)
