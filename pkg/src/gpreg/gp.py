"""Streaming Gaussian-process regressor with a time-forgetting kernel.

The regressor consumes triples ``(eta, xi2, tau)`` held in a fixed-capacity
shift buffer: ``eta`` is the internal-model state at admission, ``xi2`` the
observer's estimate of its last-block derivative (the regression target),
and ``tau`` the admission clock value, i.e. the time elapsed since the
previous admission.  The covariance is squared-exponential in ``eta`` and
decays exponentially with the total elapsed time separating two points:

    kappa(z, z') = sigma_p2 * exp(-(eta - eta')^T Lambda^-1 (eta - eta'))
                            * exp(-dt / (2 * lambda_tau^2))

with ``Lambda = diag(2*lambda_eta_i^2)``.  Between stored samples ``i <= j``
(oldest first) the separation is ``dt = sum(tau_k for k in i+1..j)``; between
the current query at clock ``tau`` and sample ``j`` it is ``tau`` plus the
stored inter-admission times of all newer samples.  The elapsed-time term
acts as a forgetting factor: with the buffer frozen, old samples lose weight
and the posterior variance climbs back toward ``sigma_p2``.

Fitting happens only at admissions; a fitted :class:`GpPosterior` is
immutable and evaluates mean, variance, and the mean's (eta, tau)-gradient
at any query through one of the interchangeable backends (compiled or pure
NumPy, see :mod:`gpreg._backend`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ._backend import impl as _impl


class GramFactorizationError(RuntimeError):
    """Internal error: the regularized Gram matrix failed to factorize.

    With sigma_n2 > 0 the matrix is positive definite by construction, so
    this indicates corrupted inputs rather than a user mistake.
    """


def _as_float_array(x, name):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {x!r}")
    return arr


@dataclass(frozen=True)
class KernelParams:
    """Hyperparameters of the time-forgetting squared-exponential kernel.

    sigma_p2   prior amplitude (signal variance)
    sigma_n2   observation noise variance
    lambda_eta per-dimension length scales over the eta input
    lambda_tau elapsed-time length scale, seconds
    """

    sigma_p2: float
    sigma_n2: float
    lambda_eta: np.ndarray
    lambda_tau: float

    def __post_init__(self):
        object.__setattr__(self, "lambda_eta",
                           _as_float_array(self.lambda_eta, "lambda_eta"))
        if self.lambda_eta.ndim != 1 or self.lambda_eta.size == 0:
            raise ValueError("lambda_eta must be a non-empty 1-d array")
        for name in ("sigma_p2", "sigma_n2", "lambda_tau"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if not np.all(self.lambda_eta > 0):
            raise ValueError("lambda_eta entries must be strictly positive")

    @property
    def dim(self) -> int:
        return self.lambda_eta.size

    @property
    def inv_two_l2(self) -> np.ndarray:
        return 1.0 / (2.0 * self.lambda_eta**2)

    @property
    def inv_two_lt2(self) -> float:
        return 1.0 / (2.0 * self.lambda_tau**2)


@dataclass(frozen=True)
class Sample:
    """One admitted triple (eta, xi2, tau_at_jump)."""

    eta: np.ndarray
    xi2: np.ndarray
    tau_at_jump: float

    def __post_init__(self):
        object.__setattr__(self, "eta", _as_float_array(self.eta, "eta"))
        object.__setattr__(self, "xi2",
                           np.atleast_1d(_as_float_array(self.xi2, "xi2")))
        if not np.isfinite(self.tau_at_jump) or self.tau_at_jump < 0:
            raise ValueError("tau_at_jump must be finite and >= 0")


@dataclass(frozen=True)
class SampleBuffer:
    """Fixed-capacity shift register of samples, oldest first.

    ``count`` is the number of admissions so far; it keeps growing after the
    buffer saturates, while ``entries`` holds only the ``capacity`` newest.
    """

    capacity: int
    entries: tuple[Sample, ...] = ()
    count: int = 0

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if len(self.entries) != min(self.count, self.capacity):
            raise ValueError("inconsistent buffer: len(entries) != min(count, capacity)")

    def __len__(self) -> int:
        return len(self.entries)


def push_sample(buffer: SampleBuffer, eta, xi2, tau) -> SampleBuffer:
    """Admit a sample, evicting the oldest entry when at capacity."""
    sample = Sample(eta, xi2, float(tau))
    entries = buffer.entries + (sample,)
    if len(entries) > buffer.capacity:
        entries = entries[1:]
    return SampleBuffer(buffer.capacity, entries, buffer.count + 1)


def _ages(entries) -> np.ndarray:
    """Elapsed time from each sample's admission to the newest admission.

    ages[j] = sum of tau_at_jump over all samples newer than j, so the age
    of sample j at clock tau is tau + ages[j].
    """
    taus = np.array([s.tau_at_jump for s in entries], dtype=float)
    if taus.size == 0:
        return taus
    rev_cum = np.concatenate(([0.0], np.cumsum(taus[::-1])[:-1]))[::-1]
    return np.ascontiguousarray(rev_cum)


def kernel_eval(z_a, z_b, buffer: SampleBuffer, params: KernelParams) -> float:
    """Covariance between two points relative to a buffer.

    A point is either a buffer index (int) or a query pair ``(eta, tau)``
    with ``tau`` the current clock.  The elapsed-time separation follows the
    admission bookkeeping described in the module docstring; it is zero for
    a point paired with itself.
    """
    ages = _ages(buffer.entries)

    def unpack(z):
        if isinstance(z, (int, np.integer)):
            if not 0 <= z < len(buffer):
                raise IndexError(f"buffer index {z} out of range")
            return buffer.entries[z].eta, float(ages[z])
        eta, tau = z
        eta = _as_float_array(eta, "query eta")
        if tau < 0:
            raise ValueError("query tau must be >= 0")
        # The query sits tau *after* the newest admission (age zero), so on
        # the common age axis its coordinate is -tau.
        return eta, -float(tau)

    eta_a, age_a = unpack(z_a)
    eta_b, age_b = unpack(z_b)
    if eta_a.shape != eta_b.shape:
        raise ValueError("kernel points have mismatched eta dimensions")
    if eta_a.shape != (params.dim,):
        raise ValueError(
            f"eta dimension {eta_a.shape} does not match kernel ({params.dim},)")
    dt = abs(age_a - age_b)
    if z_a is z_b or (isinstance(z_a, (int, np.integer))
                      and isinstance(z_b, (int, np.integer)) and z_a == z_b):
        dt = 0.0
    if not np.isfinite(dt) or dt < 0:
        raise ValueError("negative or non-finite elapsed time (corrupt buffer)")
    diff = eta_a - eta_b
    s = float(diff @ (params.inv_two_l2 * diff)) + dt * params.inv_two_lt2
    return params.sigma_p2 * float(np.exp(-s))


@dataclass(frozen=True)
class GpPosterior:
    """Immutable fitted posterior over the admitted samples.

    ``gamma`` is the inverse of the regularized Gram matrix (kept dense for
    the variance hot path, with the Cholesky factor retained), ``targets``
    stacks the xi2 values, and ``weights = gamma @ targets`` realizes the
    representer form of the mean.
    """

    params: KernelParams
    buffer: SampleBuffer
    train_eta: np.ndarray          # (n, dim)
    ages: np.ndarray               # (n,)
    targets: np.ndarray            # (n, n_out)
    gamma: np.ndarray              # (n, n)
    weights: np.ndarray            # (n, n_out)
    chol: np.ndarray = field(repr=False, default=None)

    @property
    def n_samples(self) -> int:
        return self.train_eta.shape[0]

    @property
    def n_out(self) -> int:
        return self.targets.shape[1]

    def mean(self, eta, tau) -> np.ndarray:
        eta = self._check_query(eta, tau)
        if self.n_samples == 0:
            return np.zeros(self.n_out)
        mu, _ = _impl.mean_and_grad(self.train_eta, self.ages, self.weights,
                                    eta, float(tau), self.params.inv_two_l2,
                                    self.params.inv_two_lt2, self.params.sigma_p2)
        return mu

    def mean_and_grad(self, eta, tau):
        eta = self._check_query(eta, tau)
        if self.n_samples == 0:
            return np.zeros(self.n_out), np.zeros((self.params.dim + 1, self.n_out))
        return _impl.mean_and_grad(self.train_eta, self.ages, self.weights,
                                   eta, float(tau), self.params.inv_two_l2,
                                   self.params.inv_two_lt2, self.params.sigma_p2)

    def var(self, eta, tau) -> float:
        eta = self._check_query(eta, tau)
        if self.n_samples == 0:
            return self.params.sigma_p2
        return _impl.variance(self.train_eta, self.ages, self.gamma,
                              eta, float(tau), self.params.inv_two_l2,
                              self.params.inv_two_lt2, self.params.sigma_p2)

    def _check_query(self, eta, tau) -> np.ndarray:
        eta = np.ascontiguousarray(eta, dtype=float)
        if eta.shape != (self.params.dim,):
            raise ValueError(
                f"query eta has shape {eta.shape}, kernel expects ({self.params.dim},)")
        if tau < 0:
            raise ValueError("query tau must be >= 0")
        return eta


def fit(buffer: SampleBuffer, params: KernelParams, n_out: int | None = None) -> GpPosterior:
    """Build the posterior over the admitted samples.

    An empty buffer yields the prior (zero mean, variance sigma_p2).  All
    output dimensions share one Gram matrix; the targets are stacked
    per-dimension.
    """
    n = len(buffer)
    if n == 0:
        n_out = 1 if n_out is None else n_out
        empty = np.zeros((0, params.dim))
        return GpPosterior(params, buffer, empty, np.zeros(0),
                           np.zeros((0, n_out)), np.zeros((0, 0)),
                           np.zeros((0, n_out)), np.zeros((0, 0)))

    train_eta = np.ascontiguousarray([s.eta for s in buffer.entries], dtype=float)
    if train_eta.shape[1] != params.dim:
        raise ValueError("sample eta dimension does not match kernel length scales")
    targets = np.ascontiguousarray([s.xi2 for s in buffer.entries], dtype=float)
    ages = _ages(buffer.entries)

    diff = train_eta[:, None, :] - train_eta[None, :, :]
    sq = np.einsum("ijk,k->ij", diff * diff, params.inv_two_l2)
    dt = np.abs(ages[:, None] - ages[None, :])
    gram = params.sigma_p2 * np.exp(-(sq + dt * params.inv_two_lt2))

    a = gram + params.sigma_n2 * np.eye(n)
    try:
        c, low = cho_factor(a, lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - sigma_n2 > 0 prevents this
        raise GramFactorizationError(str(exc)) from exc
    gamma = cho_solve((c, low), np.eye(n))
    gamma = np.ascontiguousarray(0.5 * (gamma + gamma.T))
    weights = np.ascontiguousarray(cho_solve((c, low), targets))
    return GpPosterior(params, buffer, train_eta, ages, targets, gamma,
                       weights, np.tril(c))


def posterior_mean(post: GpPosterior, eta, tau) -> np.ndarray:
    """Posterior mean at the query point."""
    return post.mean(eta, tau)


def posterior_var(post: GpPosterior, eta, tau) -> float:
    """Posterior variance at the query point; lies in (0, sigma_p2]."""
    return post.var(eta, tau)


def mean_gradient(post: GpPosterior, eta, tau) -> np.ndarray:
    """Gradient of the posterior mean w.r.t. (eta, tau), shape (dim+1, n_out)."""
    _, grad = post.mean_and_grad(eta, tau)
    return grad


def kernel_lipschitz_bound(params: KernelParams) -> float:
    """Upper bound on the kernel's gradient norm over (eta, tau).

    Per eta coordinate |d kappa / d eta_i| <= sigma_p2 * exp(-1/2) / lambda_i,
    and |d kappa / d tau| <= sigma_p2 / (2 lambda_tau^2); the Euclidean bound
    combines the per-coordinate maxima.
    """
    per_eta = np.exp(-0.5) / params.lambda_eta
    return params.sigma_p2 * float(
        np.sqrt(np.sum(per_eta**2) + params.inv_two_lt2**2))
