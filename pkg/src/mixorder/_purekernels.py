"""Pure-NumPy kernels for the EM hot loop.

This module is the reference implementation of the kernel contract; the
compiled twin in ``_fastkernels.pyx`` must agree with it to floating-point
round-off. Both operate on raw float64 arrays and know nothing about the
domain types.

Kernel contract
---------------
component_log_densities(X, means, covs) -> (n, g)
    Entry (i, z) is the Gaussian log density of row i under component z,
    evaluated through the Cholesky factor of covs[z]. Raises
    numpy.linalg.LinAlgError if any covariance is not positive definite.

em_step(X, weights, means, covs, ridge_add) -> (loglik, weights', means', covs')
    One E+M sweep. The returned log-likelihood is that of the INPUT
    parameters (so the sequence of values returned across iterations is the
    monotone EM objective path). ``ridge_add * I`` is added to every updated
    covariance. Inputs are never modified.
"""

import numpy as np

BACKEND_NAME = "python"

_LOG_2PI = float(np.log(2.0 * np.pi))


def component_log_densities(X, means, covs):
    X = np.asarray(X, dtype=np.float64)
    means = np.asarray(means, dtype=np.float64)
    covs = np.asarray(covs, dtype=np.float64)
    n, d = X.shape
    g = means.shape[0]
    out = np.empty((n, g), dtype=np.float64)
    for z in range(g):
        L = np.linalg.cholesky(covs[z])  # LinAlgError if not SPD
        half_logdet = float(np.log(np.diag(L)).sum())
        # y = L^{-1} (x - mu); inverting the small triangular factor once is
        # cheaper than a solve per row.
        Linv = np.linalg.inv(L)
        y = (X - means[z]) @ Linv.T
        quad = np.einsum("ij,ij->i", y, y)
        out[:, z] = -0.5 * (d * _LOG_2PI + quad) - half_logdet
    return out


def em_step(X, weights, means, covs, ridge_add):
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    g = means.shape[0]

    log_dens = component_log_densities(X, means, covs)
    with np.errstate(divide="ignore"):
        log_w = np.log(np.asarray(weights, dtype=np.float64))
    wlog = log_dens + log_w  # -inf column for an exactly-zero weight

    row_max = np.max(wlog, axis=1, keepdims=True)
    # All-(-inf) rows cannot occur: weights sum to 1, so some column is finite.
    e = np.exp(wlog - row_max)
    s = e.sum(axis=1, keepdims=True)
    loglik = float((row_max[:, 0] + np.log(s[:, 0])).sum())
    resp = e / s

    nk = resp.sum(axis=0)
    nk_safe = np.maximum(nk, 1e-300)
    new_weights = nk / n
    new_means = (resp.T @ X) / nk_safe[:, None]

    new_covs = np.empty((g, d, d), dtype=np.float64)
    eye = np.eye(d)
    for z in range(g):
        diff = X - new_means[z]
        C = (resp[:, z, None] * diff).T @ diff / nk_safe[z]
        C = 0.5 * (C + C.T)
        new_covs[z] = C + ridge_add * eye
    return loglik, new_weights, new_means, new_covs
