"""Pure-numpy likelihood kernels: the fallback when the compiled core is absent.

Function-for-function twin of ``qtomo._kernels``.  The theta layout matches
``qtomo.param.FactorLayout``: k real diagonals first, then below-diagonal
(Re, Im) pairs column by column.  ``kets`` is the (V, 4) complex array of
projector vectors, ``counts`` a float64 copy of the observed counts.

All rates are of the form M_v = t * ||T+ m_v||^2, so M is nonnegative by
construction and vanishes only where every rate derivative vanishes too.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def _factor(theta: np.ndarray, k: int) -> np.ndarray:
    T = np.zeros((4, k), dtype=np.complex128)
    diag = np.arange(k)
    T[diag, diag] = theta[:k]
    pos = k
    for c in range(k):
        nr = 3 - c
        if nr > 0:
            blk = theta[pos : pos + 2 * nr]
            T[c + 1 :, c] = blk[0::2] + 1j * blk[1::2]
            pos += 2 * nr
    return T


def expected_rates(theta, k: int, kets: np.ndarray, t: float) -> np.ndarray:
    """M_v = t * <m_v| T T+ |m_v> for every projector."""
    theta = np.asarray(theta, dtype=float)
    U = kets @ _factor(theta, k).conj()
    return t * np.einsum("vc,vc->v", U, U.conj()).real


def rate_jacobian(theta, k: int, kets: np.ndarray, t: float) -> np.ndarray:
    """dM_v / dtheta_i as a (V, n_params) matrix."""
    theta = np.asarray(theta, dtype=float)
    T = _factor(theta, k)
    U = kets @ T.conj()
    Z = kets.conj()
    n = theta.shape[0]
    dM = np.empty((kets.shape[0], n))
    diag = np.arange(k)
    dM[:, :k] = 2.0 * t * (Z[:, diag] * U[:, diag]).real
    pos = k
    for c in range(k):
        for r in range(c + 1, 4):
            zc = Z[:, r] * U[:, c]
            dM[:, pos] = 2.0 * t * zc.real
            dM[:, pos + 1] = -2.0 * t * zc.imag
            pos += 2
    return dM


def neg_loglik(theta, k: int, kets, counts, t: float, mu_floor: float, lgamma_total: float) -> float:
    """Negative Poisson log-likelihood, including the log-factorial constant.

    Zero counts contribute only their rate; positive counts against a rate
    at or below ``mu_floor`` use log(mu_floor) to stay finite.
    """
    M = expected_rates(theta, k, kets, t)
    pos = counts > 0.0
    val = M.sum() + lgamma_total
    if np.any(pos):
        val -= float(np.dot(counts[pos], np.log(np.maximum(M[pos], mu_floor))))
    return float(val)


def neg_loglik_grad(theta, k, kets, counts, t, mu_floor, lgamma_total):
    """Value and gradient of ``neg_loglik`` in one pass."""
    theta = np.asarray(theta, dtype=float)
    M = expected_rates(theta, k, kets, t)
    dM = rate_jacobian(theta, k, kets, t)
    pos = counts > 0.0
    mf = np.maximum(M, mu_floor)
    val = M.sum() + lgamma_total
    w = np.ones_like(M)
    if np.any(pos):
        val -= float(np.dot(counts[pos], np.log(mf[pos])))
        w[pos] -= counts[pos] / mf[pos]
    return float(val), w @ dM
