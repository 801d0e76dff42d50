"""Internal-model unit, high-gain observer, static stabilizer, and the
linearly-parametrized baseline identifier.

Everything here is parameterized over the error count ``n_e``, the per-error
chain lengths ``n_chi^i``, and the internal-model order ``d``.  The plant
class is a stack of integrator chains

    chi_dot = F chi + H zeta,   e = C chi,

with F/H/C assembled block-wise by :func:`build_F_H_C`.  The internal model
is a length-``d`` chain driven by the regulation error through powers of the
high-gain scalar ``g``; its last-block derivative is supplied by a learned
prediction (GP mean or the baseline's linear map).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gp import GpPosterior, KernelParams


def hurwitz_roots(leading_coeffs) -> np.ndarray:
    """Roots of s^n + a_1 s^(n-1) + ... + a_n given (a_1, ..., a_n)."""
    return np.roots(np.concatenate(([1.0], np.asarray(leading_coeffs, dtype=float))))


def _check_hurwitz(coeffs, what):
    roots = hurwitz_roots(coeffs)
    if not np.all(roots.real < 0):
        raise ValueError(f"{what} coefficients {tuple(coeffs)} are not Hurwitz "
                         f"(roots {roots})")


@dataclass(frozen=True)
class StructureParams:
    """Dimensions of the regulated plant: errors, chain lengths, model order."""

    n_e: int
    n_chi: tuple[int, ...]
    d: int
    n_u: int

    def __post_init__(self):
        if self.n_e < 1 or self.d < 1 or self.n_u < self.n_e:
            raise ValueError("need n_e >= 1, d >= 1, n_u >= n_e")
        if len(self.n_chi) != self.n_e or any(n < 1 for n in self.n_chi):
            raise ValueError("n_chi must list one positive length per error")

    @property
    def n_chi_total(self) -> int:
        return sum(self.n_chi)


@dataclass(frozen=True)
class InternalModelParams:
    """High-gain scalar g and the Hurwitz chain coefficients h_1..h_d."""

    g: float
    h: tuple[float, ...]

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError("g must be positive")
        # Stability of s^d + h_1 s^(d-1) + ... + h_d, via companion roots.
        _check_hurwitz(self.h, "internal model")

    @property
    def d(self) -> int:
        return len(self.h)


@dataclass(frozen=True)
class StabilizerParams:
    """Static stabilizer gains.

    ``c`` holds one Hurwitz coefficient tuple (c_1..c_{n_chi}) per chain,
    ordered so the chain polynomial is s^n + c_n s^(n-1) + ... + c_1.
    ``L_mat`` is the full-rank detectability matrix; ``K_w``/``nu`` are an
    optional feedforward pair, zero by default.
    """

    l: float
    delta: float
    c: tuple[tuple[float, ...], ...]
    L_mat: np.ndarray
    K_w: np.ndarray | None = None
    nu: np.ndarray | None = None

    def __post_init__(self):
        if not (self.l > 0 and self.delta > 0):
            raise ValueError("l and delta must be positive")
        object.__setattr__(self, "L_mat", np.atleast_2d(np.asarray(self.L_mat, float)))
        for ci in self.c:
            # Chain polynomial s^n + c_n s^(n-1) + ... + c_2 s + c_1.
            _check_hurwitz(tuple(reversed(ci)), "stabilizer chain")
        if np.linalg.matrix_rank(self.L_mat) < self.L_mat.shape[1]:
            raise ValueError("L_mat must have full column rank")

    @property
    def n_e(self) -> int:
        return len(self.c)


@dataclass(frozen=True)
class ObserverParams:
    """High-gain observer coefficients m_1, m_2 and scaling rho."""

    m1: float
    m2: float
    rho: float

    def __post_init__(self):
        if not (self.m1 > 0 and self.m2 > 0 and self.rho > 0):
            raise ValueError("m1, m2, rho must be positive")


def build_F_H_C(structure: StructureParams):
    """Block matrices of the chained plant: shift blocks F, impulse columns H,
    unit-row selectors C."""
    n, ne = structure.n_chi_total, structure.n_e
    F = np.zeros((n, n))
    H = np.zeros((n, ne))
    C = np.zeros((ne, n))
    offset = 0
    for i, ni in enumerate(structure.n_chi):
        F[offset:offset + ni - 1, offset + 1:offset + ni] = np.eye(ni - 1)
        H[offset + ni - 1, i] = 1.0
        C[i, offset] = 1.0
        offset += ni
    return F, H, C


def internal_model_flow(eta, e, mu_value, params: InternalModelParams) -> np.ndarray:
    """Time derivative of the internal-model state.

    eta stacks d blocks of size n_e; block i advances the chain and is
    injected with g^i h_i e, while the last block's feed is the learned
    prediction mu_value.
    """
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    e = np.atleast_1d(np.asarray(e, dtype=float))
    mu_value = np.atleast_1d(np.asarray(mu_value, dtype=float))
    d = params.d
    ne = eta.size // d
    if eta.size != d * ne or e.size != ne or mu_value.size != ne:
        raise ValueError("eta/e/mu dimensions inconsistent with the model order")
    blocks = eta.reshape(d, ne)
    out = np.empty_like(blocks)
    for i in range(d - 1):
        out[i] = blocks[i + 1] + params.g ** (i + 1) * params.h[i] * e
    out[d - 1] = mu_value + params.g ** d * params.h[d - 1] * e
    return out.reshape(-1)


def observer_flow(xi1, xi2, eta_d, mu_dot, params: ObserverParams):
    """Derivatives of the high-gain observer pair tracking (eta_d, eta_d_dot)."""
    xi1 = np.atleast_1d(np.asarray(xi1, dtype=float))
    xi2 = np.atleast_1d(np.asarray(xi2, dtype=float))
    eta_d = np.atleast_1d(np.asarray(eta_d, dtype=float))
    mu_dot = np.atleast_1d(np.asarray(mu_dot, dtype=float))
    innovation = xi1 - eta_d
    xi1_dot = xi2 - params.m1 * params.rho * innovation
    xi2_dot = mu_dot - params.m2 * params.rho**2 * innovation
    return xi1_dot, xi2_dot


def mu_total_derivative(post: GpPosterior, eta, tau, e, mu_value,
                        params: InternalModelParams) -> np.ndarray:
    """Total time derivative of the posterior mean along the regulator flow.

    Chain rule with eta_dot from :func:`internal_model_flow` (which needs the
    current error and prediction) and tau_dot = 1; never finite differences.
    """
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    _, grad = post.mean_and_grad(eta, tau)
    eta_dot = internal_model_flow(eta, e, mu_value, params)
    return grad[:-1].T @ eta_dot + grad[-1]


def stabilizer_gains(stab: StabilizerParams):
    """Gain matrices (K_chi, K_zeta, K_eta) of the static stabilizer.

    Each chain contributes the descending-power row
    -(c_1 delta^n, c_2 delta^(n-1), ..., c_n delta) scaled by l; K_eta picks
    the leading entry of each chain row, i.e. K_eta = K_chi C^T.
    """
    ne = stab.n_e
    rows = []
    for ci in stab.c:
        n = len(ci)
        powers = stab.delta ** np.arange(n, 0, -1)
        rows.append(-np.asarray(ci, dtype=float) * powers)
    n_total = sum(len(r) for r in rows)
    K_chi = np.zeros((ne, n_total))
    K_eta = np.zeros((ne, ne))
    offset = 0
    for i, row in enumerate(rows):
        K_chi[i, offset:offset + len(row)] = stab.l * row
        K_eta[i, i] = stab.l * row[0]
        offset += len(row)
    K_zeta = -stab.l * np.eye(ne)
    return K_chi, K_zeta, K_eta


def control_action(chi, zeta, eta1, stab: StabilizerParams) -> np.ndarray:
    """u = L (K_chi chi + K_zeta zeta + K_eta eta_1 + K_w nu)."""
    chi = np.atleast_1d(np.asarray(chi, dtype=float))
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    eta1 = np.atleast_1d(np.asarray(eta1, dtype=float))
    K_chi, K_zeta, K_eta = stabilizer_gains(stab)
    inner = K_chi @ chi + K_zeta @ zeta + K_eta @ eta1
    if stab.K_w is not None and stab.nu is not None:
        inner = inner + np.atleast_2d(stab.K_w) @ np.atleast_1d(stab.nu)
    return stab.L_mat @ inner


@dataclass(frozen=True)
class BaselineIdentifier:
    """Linear-in-eta least-squares identifier, psi(eta) = theta^T eta.

    The simplest member of a parametric model family, used as the comparison
    regulator.  ``P`` is the (symmetric positive definite) information
    matrix, ``forgetting`` the discrete exponential forgetting factor.
    """

    theta: np.ndarray
    P: np.ndarray
    forgetting: float = 1.0

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if theta.ndim == 1:
            theta = theta[:, None]  # 1-d input means a single output column
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "P", np.asarray(self.P, dtype=float))
        if not 0 < self.forgetting <= 1:
            raise ValueError("forgetting must lie in (0, 1]")
        if not np.all(np.linalg.eigvalsh(0.5 * (self.P + self.P.T)) > 0):
            raise ValueError("P must be symmetric positive definite")

    def predict(self, eta) -> np.ndarray:
        return self.theta.T @ np.atleast_1d(np.asarray(eta, dtype=float))


def baseline_step(ident: BaselineIdentifier, eta, xi2) -> BaselineIdentifier:
    """One recursive least-squares update toward xi2 ~ theta^T eta."""
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    xi2 = np.atleast_1d(np.asarray(xi2, dtype=float))
    lam = ident.forgetting
    P_eta = ident.P @ eta
    denom = lam + float(eta @ P_eta)
    gain = P_eta / denom
    resid = xi2 - ident.theta.T @ eta
    theta = ident.theta + np.outer(gain, resid)
    P = (ident.P - np.outer(gain, P_eta)) / lam
    P = 0.5 * (P + P.T)
    return BaselineIdentifier(theta, P, lam)


def baseline_flow(theta, P, eta, xi2, forgetting_rate: float):
    """Continuous-time least-squares flow used inside the comparison loop.

    theta_dot = P eta (xi2 - theta^T eta)^T,
    P_dot     = beta P - P eta eta^T P,
    the continuous limit of exponentially-forgetting least squares.
    """
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    xi2 = np.atleast_1d(np.asarray(xi2, dtype=float))
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    P_eta = P @ eta
    resid = xi2 - theta.T @ eta
    theta_dot = np.outer(P_eta, resid)
    P_dot = forgetting_rate * P - np.outer(P_eta, P_eta)
    return theta_dot, P_dot


def check_sigma_condition(params: KernelParams, sigma_thr2: float):
    """Admissibility of the variance threshold for event-triggered admission.

    The threshold must lie strictly between the single-sample training-point
    variance sigma_p2*sigma_n2/(sigma_p2+sigma_n2) (the post-admission
    worst case) and the prior variance sigma_p2.  Returns
    (ok, lower_bound, upper_bound).
    """
    lower = params.sigma_p2 * params.sigma_n2 / (params.sigma_p2 + params.sigma_n2)
    upper = params.sigma_p2
    return lower < sigma_thr2 < upper, lower, upper
