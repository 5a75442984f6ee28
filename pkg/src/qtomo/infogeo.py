"""Fisher information of the count model and the Bures-distance error bound.

Two Fisher matrices live here.  The classical one belongs to the Poisson
count model and grows linearly with both the rate C and the time t, so it
factors as J = Ct * J_normalized.  The quantum one is built from symmetric
logarithmic derivatives (SLD) of the state alone and gives the local
quadratic form of the Bures distance.  Combining the two yields the
asymptotic lower bound on the average Bures distance achievable with a
given projector set:

    bures >= Tr[J_sld pinv(J_normalized)] / (4 Ct)

Directions that change only the overall rate leave the state fixed, so
they are null directions of J_sld and drop out of the trace.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import ContractError, IllPosedBoundError, SingularModelError
from .measure import ProjectorSet
from .param import RankKParams, d_rho_all, to_state
from .qstate import hermitian_eig

SLD_TOL_REL = 1e-10
PINV_TOL = 1e-10
_NULL_OVERLAP_TOL = 1e-8


@dataclass(frozen=True)
class FisherBundle:
    """Classical and quantum Fisher data at one parameter point.

    ``fisher`` is the count-model matrix at exposure ``ct`` (the product of
    rate and time), ``fisher_normalized`` the per-unit-exposure matrix with
    fisher = ct * fisher_normalized exactly, and ``fisher_sld`` the SLD
    quantum Fisher matrix of the encoded state.
    """

    k: int
    theta0: RankKParams
    fisher: np.ndarray
    fisher_normalized: np.ndarray
    fisher_sld: np.ndarray
    ct: float

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "Ct": self.ct,
            "J": self.fisher.tolist(),
            "J_sld": self.fisher_sld.tolist(),
            "cr_bound": cr_bound_from_matrices(self.fisher_sld, self.fisher_normalized, self.ct),
        }


def fisher_from_rates(rates: np.ndarray, rate_jac: np.ndarray) -> np.ndarray:
    """Classical Fisher matrix of independent Poisson channels.

    J_ij = sum_v dM_v/dth_i * dM_v/dth_j / M_v.  Channels with zero rate
    must have a zero derivative row (they carry no events); otherwise the
    model is singular along that channel.
    """
    rates = np.asarray(rates, dtype=float)
    rate_jac = np.asarray(rate_jac, dtype=float)
    if rate_jac.ndim != 2 or rate_jac.shape[0] != rates.shape[0]:
        raise ContractError("rate_jac must have one row per channel")
    zero = rates <= 0.0
    if np.any(zero):
        bad = np.abs(rate_jac[zero]).max(axis=1) > 0.0
        if np.any(bad):
            channel = int(np.flatnonzero(zero)[np.argmax(bad)])
            raise SingularModelError(channel)
    keep = ~zero
    scaled = rate_jac[keep] / rates[keep, None]
    return scaled.T @ rate_jac[keep]


def classical_fisher(p: RankKParams, ps: ProjectorSet, t: float) -> np.ndarray:
    """Count-model Fisher matrix at p for acquisition time t."""
    if not t > 0.0:
        raise ContractError("t must be positive")
    kern = _backend.active()
    rates = kern.expected_rates(p.theta, p.k, ps.kets, t)
    jac = kern.rate_jacobian(p.theta, p.k, ps.kets, t)
    return fisher_from_rates(rates, jac)


def sld_operators_matrices(rho, drhos, tol_rel: float = SLD_TOL_REL) -> list[np.ndarray]:
    """Symmetric logarithmic derivatives for the given state derivatives.

    Each L solves drho = (L rho + rho L) / 2 on the support of rho; matrix
    elements between directions where the eigenvalue sum is below
    tol_rel * lambda_max are set to zero (the standard support convention).
    """
    w, v = hermitian_eig(rho)
    tol = tol_rel * w[0]
    denom = w[:, None] + w[None, :]
    mask = denom > tol
    out = []
    for drho in drhos:
        d = v.conj().T @ np.asarray(drho, dtype=np.complex128) @ v
        lt = np.where(mask, 2.0 * d / np.where(mask, denom, 1.0), 0.0)
        L = v @ lt @ v.conj().T
        out.append(0.5 * (L + L.conj().T))
    return out


def sld_fisher_matrices(rho, drhos, tol_rel: float = SLD_TOL_REL) -> np.ndarray:
    """SLD quantum Fisher matrix for the given state derivatives.

    J_ij = Re Tr[rho (L_i L_j + L_j L_i)] / 2, evaluated in the eigenbasis
    of rho with the same support convention as the operators themselves.
    """
    w, v = hermitian_eig(rho)
    tol = tol_rel * w[0]
    denom = w[:, None] + w[None, :]
    mask = denom > tol
    safe = np.where(mask, denom, 1.0)
    lts = []
    for drho in drhos:
        d = v.conj().T @ np.asarray(drho, dtype=np.complex128) @ v
        lts.append(np.where(mask, 2.0 * d / safe, 0.0))
    n = len(lts)
    J = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            val = 0.5 * np.sum(denom * (lts[i] * lts[j].conj()).real * mask)
            J[i, j] = J[j, i] = val
    return J


def sld_operators(p: RankKParams) -> list[np.ndarray]:
    """SLD operators along every theta direction of the rank-k model."""
    rho, _ = to_state(p)
    return sld_operators_matrices(rho, d_rho_all(p))


def sld_fisher(p: RankKParams) -> np.ndarray:
    """SLD quantum Fisher matrix in the theta coordinates of the model."""
    rho, _ = to_state(p)
    return sld_fisher_matrices(rho, d_rho_all(p))


def local_bures_quadratic(J_sld: np.ndarray, V: np.ndarray) -> float:
    """Quarter trace of J_sld V: the local quadratic form of Bures distance."""
    J_sld = np.asarray(J_sld, dtype=float)
    V = np.asarray(V, dtype=float)
    if J_sld.shape != V.shape or J_sld.ndim != 2 or J_sld.shape[0] != J_sld.shape[1]:
        raise ContractError(f"shape mismatch: {J_sld.shape} vs {V.shape}")
    return 0.25 * float(np.trace(J_sld @ V))


def _pinv_with_null(Jt: np.ndarray, pinv_tol: float) -> tuple[np.ndarray, np.ndarray]:
    w, u = np.linalg.eigh(0.5 * (Jt + Jt.T))
    cutoff = pinv_tol * max(float(w.max()), 0.0)
    keep = w > cutoff
    pinv = (u[:, keep] / w[keep]) @ u[:, keep].T
    return pinv, u[:, ~keep]


def cr_bound_from_matrices(J_sld: np.ndarray, J_normalized: np.ndarray, ct: float,
                           pinv_tol: float = PINV_TOL) -> float:
    """Tr[J_sld pinv(J_normalized)] / (4 ct), guarding the shared null space.

    Raises when the normalized Fisher matrix is singular along a direction
    the quantum Fisher matrix can see: the bound would be infinite there,
    which signals a rank mismatch between model and measurement.
    """
    if not ct > 0.0:
        raise ContractError("ct must be positive")
    J_sld = np.asarray(J_sld, dtype=float)
    J_normalized = np.asarray(J_normalized, dtype=float)
    pinv, null_vecs = _pinv_with_null(J_normalized, pinv_tol)
    if null_vecs.shape[1]:
        scale = max(float(np.abs(J_sld).max()), 1.0)
        overlap = float(np.abs(null_vecs.T @ J_sld @ null_vecs).max())
        if overlap > _NULL_OVERLAP_TOL * scale:
            raise IllPosedBoundError(
                "normalized Fisher matrix is singular along directions with "
                f"quantum information (overlap {overlap:.3e})"
            )
    return float(np.trace(J_sld @ pinv)) / (4.0 * ct)


def cr_bound_bures(p0: RankKParams, ps: ProjectorSet, ct: float,
                   pinv_tol: float = PINV_TOL) -> float:
    """Asymptotic lower bound on the average Bures distance 2(1 - F).

    Evaluated within the rank-k model of p0; halves exactly when the
    exposure ct doubles.
    """
    _, c_rate = to_state(p0)
    J_normalized = classical_fisher(p0, ps, t=1.0) / c_rate
    J_sld = sld_fisher(p0)
    return cr_bound_from_matrices(J_sld, J_normalized, ct, pinv_tol)


def empirical_covariance(theta_hats, theta0: RankKParams) -> np.ndarray:
    """Second moment of estimates about the true point (not the sample mean)."""
    hats = list(theta_hats)
    if len(hats) < 2:
        raise ContractError("need at least two estimates")
    for p in hats:
        if p.k != theta0.k:
            raise ContractError(f"mixed ranks: {p.k} vs {theta0.k}")
    D = np.stack([p.theta for p in hats]) - theta0.theta
    return D.T @ D / len(hats)


def fisher_bundle(p0: RankKParams, ps: ProjectorSet, ct: float) -> FisherBundle:
    """Classical and quantum Fisher matrices of the model at exposure ct."""
    if not ct > 0.0:
        raise ContractError("ct must be positive")
    _, c_rate = to_state(p0)
    J_normalized = classical_fisher(p0, ps, t=1.0) / c_rate
    return FisherBundle(
        k=p0.k,
        theta0=p0,
        fisher=ct * J_normalized,
        fisher_normalized=J_normalized,
        fisher_sld=sld_fisher(p0),
        ct=float(ct),
    )
