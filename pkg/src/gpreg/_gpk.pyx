# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled posterior-evaluation kernels.

Twin of ``gpreg._gpk_py``; see that module for the formulas.  These loops run
inside the closed-loop flow map and the event function, so they are the hot
path of every simulation.
"""

import numpy as np

from libc.math cimport exp


def kernel_vector(double[:, ::1] train_eta, double[::1] ages,
                  double[::1] eta, double tau,
                  double[::1] inv_two_l2, double inv_two_lt2, double sigma_p2):
    cdef Py_ssize_t n = train_eta.shape[0]
    cdef Py_ssize_t dim = train_eta.shape[1]
    out = np.empty(n)
    cdef double[::1] k = out
    cdef Py_ssize_t j, i
    cdef double s, diff
    for j in range(n):
        s = (tau + ages[j]) * inv_two_lt2
        for i in range(dim):
            diff = eta[i] - train_eta[j, i]
            s += diff * diff * inv_two_l2[i]
        k[j] = sigma_p2 * exp(-s)
    return out


def mean_and_grad(double[:, ::1] train_eta, double[::1] ages,
                  double[:, ::1] weights, double[::1] eta, double tau,
                  double[::1] inv_two_l2, double inv_two_lt2, double sigma_p2):
    cdef Py_ssize_t n = train_eta.shape[0]
    cdef Py_ssize_t dim = train_eta.shape[1]
    cdef Py_ssize_t n_out = weights.shape[1]
    mu_arr = np.zeros(n_out)
    grad_arr = np.zeros((dim + 1, n_out))
    cdef double[::1] mu = mu_arr
    cdef double[:, ::1] grad = grad_arr
    cdef Py_ssize_t j, i, m
    cdef double s, diff, k, kw, dki
    for j in range(n):
        s = (tau + ages[j]) * inv_two_lt2
        for i in range(dim):
            diff = eta[i] - train_eta[j, i]
            s += diff * diff * inv_two_l2[i]
        k = sigma_p2 * exp(-s)
        for m in range(n_out):
            kw = k * weights[j, m]
            mu[m] += kw
            grad[dim, m] -= inv_two_lt2 * kw
            for i in range(dim):
                dki = (train_eta[j, i] - eta[i]) * 2.0 * inv_two_l2[i]
                grad[i, m] += dki * kw
    return mu_arr, grad_arr


def variance(double[:, ::1] train_eta, double[::1] ages, double[:, ::1] gamma,
             double[::1] eta, double tau,
             double[::1] inv_two_l2, double inv_two_lt2, double sigma_p2):
    cdef Py_ssize_t n = train_eta.shape[0]
    cdef Py_ssize_t dim = train_eta.shape[1]
    k_arr = np.empty(n)
    cdef double[::1] k = k_arr
    cdef Py_ssize_t j, i, h
    cdef double s, diff, acc, row
    for j in range(n):
        s = (tau + ages[j]) * inv_two_lt2
        for i in range(dim):
            diff = eta[i] - train_eta[j, i]
            s += diff * diff * inv_two_l2[i]
        k[j] = sigma_p2 * exp(-s)
    acc = 0.0
    for j in range(n):
        row = 0.0
        for h in range(n):
            row += gamma[j, h] * k[h]
        acc += k[j] * row
    return sigma_p2 - acc
