"""Pure NumPy implementation of the hot posterior-evaluation kernels.

Fallback twin of the compiled module ``gpreg._gpk``; both expose the same
functions and must return identical values (same formulas, same dtype).
The covariance between a query ``(eta, tau)`` and the ``j``-th stored sample
is

    k_j = sigma_p2 * exp(-sum_i (eta_i - E[j,i])^2 * inv_two_l2[i]
                         - (tau + ages[j]) * inv_two_lt2)

where ``ages[j]`` is the elapsed time from sample ``j``'s admission to the
most recent admission, so ``tau + ages[j]`` is the sample's age now.
"""

import numpy as np


def kernel_vector(train_eta, ages, eta, tau, inv_two_l2, inv_two_lt2, sigma_p2):
    """Covariances between the query point and every stored sample."""
    diff = eta[None, :] - train_eta
    s = (diff * diff) @ inv_two_l2 + (tau + ages) * inv_two_lt2
    return sigma_p2 * np.exp(-s)


def mean_and_grad(train_eta, ages, weights, eta, tau,
                  inv_two_l2, inv_two_lt2, sigma_p2):
    """Posterior mean and its gradient w.r.t. (eta, tau).

    ``weights`` is the precomputed (n, n_out) solve of the regularized Gram
    system against the targets.  Returns ``(mu, grad)`` with ``mu`` of shape
    (n_out,) and ``grad`` of shape (dim+1, n_out); the last gradient row is
    the tau derivative.
    """
    k = kernel_vector(train_eta, ages, eta, tau, inv_two_l2, inv_two_lt2, sigma_p2)
    mu = k @ weights
    kw = k[:, None] * weights
    # d k_j / d eta_i = -k_j * (eta_i - E[j,i]) / lambda_i^2
    deta = (train_eta - eta[None, :]) * (2.0 * inv_two_l2)[None, :]
    grad = np.empty((train_eta.shape[1] + 1, weights.shape[1]))
    grad[:-1] = deta.T @ kw
    grad[-1] = -inv_two_lt2 * kw.sum(axis=0)
    return mu, grad


def variance(train_eta, ages, gamma, eta, tau, inv_two_l2, inv_two_lt2, sigma_p2):
    """Posterior variance sigma_p2 - k^T gamma k at the query point."""
    k = kernel_vector(train_eta, ages, eta, tau, inv_two_l2, inv_two_lt2, sigma_p2)
    return float(sigma_p2 - k @ gamma @ k)
