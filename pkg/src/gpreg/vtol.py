"""VTOL lateral/angular regulation testbed.

The plant is the planar aircraft lateral position (y1, y2) and roll
(theta1, theta2) driven by a wingtip force u and a lateral wind disturbance
d(w) generated by one of three exosystems (a harmonic pair, a Duffing
oscillator, and an arctan-restoring oscillator, each with an independent
second harmonic block).  The change of coordinates

    chi1 = y1,  chi2 = y2,  chi3 = d(w) - g*tan(theta1),
    zeta = L_s d(w) - g*theta2 / cos(theta1)^2,

puts the system into a chain-of-integrators normal form

    chi1_dot = chi2, chi2_dot = chi3, chi3_dot = zeta,
    zeta_dot = q(w, x) + Omega(w, x) * u,

which is globally defined (the raw form is singular at |theta1| = pi/2).
The regulated error is the lateral position e = chi1.

:func:`assemble_closed_loop` wires the plant to the internal model,
high-gain observer, and either the event-triggered GP regressor or the
continuous-time least-squares baseline, returning a ready-to-simulate
:class:`~gpreg.hybrid.HybridSystem` plus bookkeeping for trace export.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._backend import impl as _impl
from .gp import KernelParams, SampleBuffer, fit, push_sample
from .hybrid import HybridSystem
from .regulator import InternalModelParams, ObserverParams, StabilizerParams

EXO_VARIANTS = ("linear", "duffing", "arctan")

# Lateral force numerators of the wind disturbance d(w) = (c_1 w1 + c_3 w3)/M.
W1_FORCE = 2.0e7
W3_FORCE = 1.0e6


@dataclass(frozen=True)
class VtolParams:
    """Aircraft mass, inertia, wing length, gravitational acceleration."""

    M: float
    J: float
    wing_l: float
    grav: float

    def __post_init__(self):
        for name in ("M", "J", "wing_l", "grav"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def _w2_accel(w1: float, variant: str) -> float:
    """Restoring acceleration of the first exosystem block."""
    if variant == "linear":
        return -w1
    if variant == "duffing":
        return 4.0 * w1 - w1**3
    if variant == "arctan":
        return 3.0 * math.atan(w1) - w1
    raise ValueError(f"unknown exosystem variant {variant!r}")


def exo_flow(w, variant: str) -> np.ndarray:
    """Exosystem vector field; the (w3, w4) block is always w4, -4*w3."""
    w = np.asarray(w, dtype=float)
    return np.array([w[1], _w2_accel(w[0], variant), w[3], -4.0 * w[2]])


def disturbance(w, variant: str, params: VtolParams):
    """Wind disturbance and its first two derivatives along the exosystem.

    Returns (d, L_s d, L_s^2 d); the derivatives use the closed-form chain
    rule through the selected exosystem rather than numerical
    differentiation.
    """
    w = np.asarray(w, dtype=float)
    d = (W1_FORCE * w[0] + W3_FORCE * w[2]) / params.M
    d1 = (W1_FORCE * w[1] + W3_FORCE * w[3]) / params.M
    d2 = (W1_FORCE * _w2_accel(w[0], variant) + W3_FORCE * (-4.0 * w[2])) / params.M
    return d, d1, d2


def q_omega(chi3: float, zeta: float, w, variant: str, params: VtolParams):
    """Drift q(w, x) and input gain Omega(w, x) of the transformed dynamics."""
    d, d1, d2 = disturbance(w, variant, params)
    a = (d - chi3) / params.grav  # tan(theta1)
    one_a2 = 1.0 + a * a
    sin2t = 2.0 * a / one_a2  # sin(2*atan(a))
    q = d2 - (d1 - zeta) ** 2 * sin2t / params.grav
    omega = -(2.0 * params.grav * params.wing_l / params.J) * one_a2
    return q, omega


def transformed_flow(chi, zeta: float, w, u: float, variant: str,
                     params: VtolParams):
    """Plant flow in the chain coordinates; globally defined."""
    chi = np.asarray(chi, dtype=float)
    q, omega = q_omega(chi[2], zeta, w, variant, params)
    chi_dot = np.array([chi[1], chi[2], zeta])
    zeta_dot = q + omega * u
    return chi_dot, zeta_dot


def vtol_raw_flow(y1, y2, theta1, theta2, w, u, variant: str,
                  params: VtolParams) -> np.ndarray:
    """Raw aircraft flow (vanishing vertical input); singular at |theta1| = pi/2."""
    if not abs(theta1) < math.pi / 2:
        raise ValueError(f"theta1 = {theta1} outside (-pi/2, pi/2)")
    d, _, _ = disturbance(w, variant, params)
    return np.array([
        y2,
        d - params.grav * math.tan(theta1),
        theta2,
        2.0 * params.wing_l / params.J * u,
    ])


def raw_to_transformed(y1, y2, theta1, theta2, w, variant: str,
                       params: VtolParams):
    """Chain coordinates of a raw state (requires |theta1| < pi/2)."""
    if not abs(theta1) < math.pi / 2:
        raise ValueError(f"theta1 = {theta1} outside (-pi/2, pi/2)")
    d, d1, _ = disturbance(w, variant, params)
    chi = np.array([y1, y2, d - params.grav * math.tan(theta1)])
    zeta = d1 - params.grav * theta2 / math.cos(theta1) ** 2
    return chi, zeta


def transformed_to_raw(chi, zeta, w, variant: str, params: VtolParams):
    """Raw state reconstructed from chain coordinates; always well defined."""
    chi = np.asarray(chi, dtype=float)
    d, d1, _ = disturbance(w, variant, params)
    theta1 = math.atan((d - chi[2]) / params.grav)
    theta2 = (d1 - zeta) * math.cos(theta1) ** 2 / params.grav
    return float(chi[0]), float(chi[1]), theta1, theta2


def vtol_control_law(y1, y2, theta1, theta2, eta1, stab: StabilizerParams,
                     params: VtolParams) -> float:
    """Measured-output control law of the testbed.

    u = L * [c1*l*delta^3*(y1 + eta1) + c2*l*delta^2*y2
             + c3*l*delta*(-g*tan(theta1)) + l*(-g*theta2/cos(theta1)^2)]

    with L read from ``stab.L_mat``.  The bracket absorbs the minus sign of
    the abstract stabilizer rows, so the loop-stabilizing choice here has
    the opposite sign of the abstract gain matrix (see
    :func:`assemble_closed_loop`).
    """
    if not abs(theta1) < math.pi / 2:
        raise ValueError(f"theta1 = {theta1} outside (-pi/2, pi/2)")
    c1, c2, c3 = stab.c[0]
    l, delta = stab.l, stab.delta
    L = float(stab.L_mat[0, 0])
    g = params.grav
    return L * (c1 * l * delta**3 * (y1 + eta1)
                + c2 * l * delta**2 * y2
                + c3 * l * delta * (-g * math.tan(theta1))
                + l * (-g * theta2 / math.cos(theta1) ** 2))


def ideal_friend(w, variant: str, params: VtolParams) -> float:
    """Steady-state input making the zero-error manifold invariant.

    Closed form of -q(w, 0) / Omega(w, 0):

        u* = g * ((g^2 + d^2) * L_s^2 d - 2 d (L_s d)^2)
             / (2 l J^-1 (g^2 + d^2)^2).

    Diagnostic only; never fed to the loop.
    """
    d, d1, d2 = disturbance(w, variant, params)
    g = params.grav
    g2d2 = g * g + d * d
    return g * (g2d2 * d2 - 2.0 * d * d1 * d1) / (
        2.0 * params.wing_l / params.J * g2d2 * g2d2)


@dataclass
class ClosedLoop:
    """Assembled closed loop plus the bookkeeping the exporter needs."""

    system: HybridSystem
    y0: np.ndarray
    disc0: object
    kind: str                  # "gp" | "baseline"
    variant: str
    d: int                     # internal-model order
    sigma_thr2: Optional[float]
    trace_row: Callable        # (t, j, y, disc) -> list[float]
    control_of: Callable       # (y, disc) -> float
    state_names: tuple


def _require_scalar_structure(stab: StabilizerParams, im: InternalModelParams):
    if stab.n_e != 1 or len(stab.c[0]) != 3:
        raise ValueError("the VTOL loop needs one error chain of length 3")
    if stab.L_mat.shape != (1, 1):
        raise ValueError("the VTOL loop needs a scalar L_mat")
    if im.d < 1:
        raise ValueError("internal model order must be >= 1")


def assemble_closed_loop(variant: str, kind: str, vtol: VtolParams,
                         stab: StabilizerParams, im: InternalModelParams,
                         obs: ObserverParams,
                         gp_params: Optional[KernelParams] = None,
                         sigma_thr2: Optional[float] = None,
                         n_ds: int = 100,
                         forgetting_rate: float = 0.125,
                         p0_scale: float = 1.0,
                         w0=(1.0, 0.0, 1.0, 0.0),
                         chi0=(0.0, 0.0, 0.0), zeta0: float = 0.0,
                         eta0=None, xi0=(0.0, 0.0),
                         theta0=None) -> ClosedLoop:
    """Build the hybrid closed loop for one exosystem and regulator kind.

    The flow stacks exosystem, transformed plant, internal model, and
    observer; the GP variant adds the hybrid clock and jumps on the variance
    threshold (admitting the current (eta, xi2, tau) triple), while the
    baseline variant integrates the least-squares identifier state in
    continuous time and never jumps.

    The plant input applies the measured-output law through the abstract
    stabilizer gain: u = (-L_mat) * l * [c1 d^3 (chi1+eta1) + c2 d^2 chi2
    + c3 d (chi3 - d(w)) + (zeta - L_s d(w))], which in raw coordinates is
    exactly :func:`vtol_control_law` evaluated with the opposite-signed L.
    """
    if variant not in EXO_VARIANTS:
        raise ValueError(f"unknown exosystem variant {variant!r}")
    if kind not in ("gp", "baseline"):
        raise ValueError(f"regulator kind must be 'gp' or 'baseline', got {kind!r}")
    _require_scalar_structure(stab, im)

    d_ord = im.d
    g = im.g
    gh = np.array([g ** (i + 1) * im.h[i] for i in range(d_ord)])
    m1r = obs.m1 * obs.rho
    m2r2 = obs.m2 * obs.rho**2

    c1, c2, c3 = stab.c[0]
    l, delta = stab.l, stab.delta
    L_iv = -float(stab.L_mat[0, 0])  # displayed-law gain; positive for -L_mat > 0
    k1 = L_iv * l * c1 * delta**3
    k2 = L_iv * l * c2 * delta**2
    k3 = L_iv * l * c3 * delta
    k4 = L_iv * l

    M, J, wl, grav = vtol.M, vtol.J, vtol.wing_l, vtol.grav
    a1, a3 = W1_FORCE / M, W3_FORCE / M
    om_fac = 2.0 * grav * wl / J
    variant_accel = {"linear": lambda w1: -w1,
                     "duffing": lambda w1: 4.0 * w1 - w1**3,
                     "arctan": lambda w1: 3.0 * math.atan(w1) - w1}[variant]

    i_eta = 8
    i_xi1 = 8 + d_ord
    i_xi2 = 9 + d_ord

    eta0 = np.zeros(d_ord) if eta0 is None else np.asarray(eta0, dtype=float)
    if eta0.shape != (d_ord,):
        raise ValueError(f"eta0 must have length {d_ord}")

    def control(y, d_w, d1_w, eta1):
        return (k1 * (y[4] + eta1) + k2 * y[5]
                + k3 * (y[6] - d_w) + k4 * (y[7] - d1_w))

    def plant_rates(y, u, d_w, d1_w, d2_w):
        a = (d_w - y[6]) / grav
        one_a2 = 1.0 + a * a
        q = d2_w - (d1_w - y[7]) ** 2 * (2.0 * a / one_a2) / grav
        zeta_dot = q - om_fac * one_a2 * u
        return zeta_dot

    def common_flow(y, dy, mu, mu_dot):
        """Exosystem, plant, internal model, observer; returns nothing."""
        w1, w2, w3, w4 = y[0], y[1], y[2], y[3]
        dy[0] = w2
        dy[1] = variant_accel(w1)
        dy[2] = w4
        dy[3] = -4.0 * w3
        d_w = a1 * w1 + a3 * w3
        d1_w = a1 * w2 + a3 * w4
        d2_w = a1 * dy[1] - 4.0 * a3 * w3
        e = y[4]
        u = control(y, d_w, d1_w, y[i_eta])
        dy[4] = y[5]
        dy[5] = y[6]
        dy[6] = y[7]
        dy[7] = plant_rates(y, u, d_w, d1_w, d2_w)
        for i in range(d_ord - 1):
            dy[i_eta + i] = y[i_eta + i + 1] + gh[i] * e
        dy[i_eta + d_ord - 1] = mu + gh[d_ord - 1] * e
        innov = y[i_xi1] - y[i_eta + d_ord - 1]
        dy[i_xi1] = y[i_xi2] - m1r * innov
        dy[i_xi2] = mu_dot - m2r2 * innov

    if kind == "gp":
        if gp_params is None or sigma_thr2 is None:
            raise ValueError("the GP loop needs gp_params and sigma_thr2")
        if gp_params.dim != d_ord:
            raise ValueError("kernel length scales must match the model order")
        inv_l2 = gp_params.inv_two_l2
        inv_lt2 = gp_params.inv_two_lt2
        sp2 = gp_params.sigma_p2
        i_tau = 10 + d_ord
        n_state = 11 + d_ord

        def flow(t, y, post):
            dy = np.empty(n_state)
            eta = y[i_eta:i_eta + d_ord]
            if post.n_samples:
                mu_v, grad = _impl.mean_and_grad(
                    post.train_eta, post.ages, post.weights, eta, y[i_tau],
                    inv_l2, inv_lt2, sp2)
                mu = mu_v[0]
            else:
                mu, grad = 0.0, None
            e = y[4]
            if grad is not None:
                mu_dot = grad[d_ord, 0]
                for i in range(d_ord - 1):
                    mu_dot += grad[i, 0] * (y[i_eta + i + 1] + gh[i] * e)
                mu_dot += grad[d_ord - 1, 0] * (mu + gh[d_ord - 1] * e)
            else:
                mu_dot = 0.0
            common_flow(y, dy, mu, mu_dot)
            dy[i_tau] = 1.0
            return dy

        def event(t, y, post):
            if post.n_samples == 0:
                return sp2 - sigma_thr2
            return _impl.variance(post.train_eta, post.ages, post.gamma,
                                  y[i_eta:i_eta + d_ord], y[i_tau],
                                  inv_l2, inv_lt2, sp2) - sigma_thr2

        def jump(t, y, post):
            buf = push_sample(post.buffer, y[i_eta:i_eta + d_ord].copy(),
                              np.array([y[i_xi2]]), y[i_tau])
            y2 = y.copy()
            y2[i_tau] = 0.0
            return y2, fit(buf, gp_params)

        y0 = np.concatenate([np.asarray(w0, float), np.asarray(chi0, float),
                             [zeta0], eta0, np.asarray(xi0, float), [0.0]])
        disc0 = fit(SampleBuffer(n_ds), gp_params)
        system = HybridSystem(flow, jump, event)

        def sigma2_of(y, post):
            return event(0.0, y, post) + sigma_thr2

        names = (("w1", "w2", "w3", "w4", "chi1", "chi2", "chi3", "zeta")
                 + tuple(f"eta_{i+1}" for i in range(d_ord))
                 + ("xi1", "xi2", "tau"))
    else:
        i_th = 10 + d_ord
        i_P = i_th + d_ord
        n_state = 10 + 2 * d_ord + d_ord * d_ord
        beta = forgetting_rate
        theta0 = np.zeros(d_ord) if theta0 is None else np.asarray(theta0, float)
        if theta0.shape != (d_ord,):
            raise ValueError(f"theta0 must have length {d_ord}")

        def flow(t, y, disc):
            dy = np.empty(n_state)
            eta = y[i_eta:i_eta + d_ord]
            theta = y[i_th:i_th + d_ord]
            P = y[i_P:].reshape(d_ord, d_ord)
            P = 0.5 * (P + P.T)
            mu = float(theta @ eta)
            resid = y[i_xi2] - mu
            P_eta = P @ eta
            theta_dot = P_eta * resid
            e = y[4]
            eta_dot_last = mu + gh[d_ord - 1] * e
            mu_dot = float(theta_dot @ eta)
            for i in range(d_ord - 1):
                mu_dot += theta[i] * (y[i_eta + i + 1] + gh[i] * e)
            mu_dot += theta[d_ord - 1] * eta_dot_last
            common_flow(y, dy, mu, mu_dot)
            dy[i_th:i_th + d_ord] = theta_dot
            dy[i_P:] = (beta * P - np.outer(P_eta, P_eta)).reshape(-1)
            return dy

        y0 = np.concatenate([np.asarray(w0, float), np.asarray(chi0, float),
                             [zeta0], eta0, np.asarray(xi0, float), theta0,
                             (p0_scale * np.eye(d_ord)).reshape(-1)])
        disc0 = None
        system = HybridSystem(flow, None, None)

        def sigma2_of(y, post):
            return 0.0

        names = (("w1", "w2", "w3", "w4", "chi1", "chi2", "chi3", "zeta")
                 + tuple(f"eta_{i+1}" for i in range(d_ord))
                 + ("xi1", "xi2")
                 + tuple(f"theta_{i+1}" for i in range(d_ord))
                 + tuple(f"P_{i+1}{k+1}" for i in range(d_ord) for k in range(d_ord)))

    def control_of(y, disc):
        d_w = a1 * y[0] + a3 * y[2]
        d1_w = a1 * y[1] + a3 * y[3]
        return control(y, d_w, d1_w, y[i_eta])

    def trace_row(t, j, y, disc):
        d_w = a1 * y[0] + a3 * y[2]
        d1_w = a1 * y[1] + a3 * y[3]
        u = control(y, d_w, d1_w, y[i_eta])
        row = [t, float(j), y[4]]
        row.extend(y[i_eta:i_eta + d_ord])
        row.extend([y[i_xi1], y[i_xi2], sigma2_of(y, disc), u,
                    y[0], y[1], y[2], y[3], d_w])
        return row

    return ClosedLoop(system, y0, disc0, kind, variant, d_ord, sigma_thr2,
                      trace_row, control_of, names)
