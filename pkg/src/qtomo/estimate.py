"""Maximum-likelihood fitting within a fixed rank and AIC rank selection.

Each rank is fitted by multi-start optimization: a derivative-free simplex
stage followed by a quasi-Newton polish on the analytic gradient.  The
deterministic first start projects a regularized linear-inversion estimate
into the rank-k model; remaining starts are seeded random draws, and rank
selection additionally re-starts each rank from the previous rank's
solution so the fitted likelihood is non-decreasing in k.  Model choice is
the minimum-AIC rule over ranks 1..4.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln

from . import _backend
from ._rng import derive_seed
from .errors import (
    ContractError,
    InvalidStateError,
    NoInformationError,
    NotInformationallyCompleteError,
)
from .measure import MU_FLOOR, CountRecord, ProjectorSet, hermitian_from_coords
from .param import (
    RankKParams,
    canonical_theta,
    embed_params,
    param_count,
    project_to_rank,
    random_params,
    to_state,
)
from .qstate import DensityMatrix

# Blend weight pulling the linear-inversion start off the PSD boundary.
_INIT_BLEND = 1e-3
# Simplex-stage evaluation budget per start; the gradient polish does the
# precise convergence, the simplex only has to land in a basin.
_SIMPLEX_EVALS_PER_PARAM = 40
_POLISH_MAX_ITER = 500


@dataclass(frozen=True)
class FitOptions:
    """Optimizer knobs; the defaults are frozen and used everywhere."""

    n_starts: int = 5
    max_iters: int = 20000
    f_tol: float = 1e-9
    x_tol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.n_starts < 1:
            raise ContractError("n_starts must be >= 1")
        if self.max_iters < 1:
            raise ContractError("max_iters must be >= 1")
        if not (self.f_tol > 0.0 and self.x_tol > 0.0):
            raise ContractError("tolerances must be positive")


@dataclass(frozen=True)
class RankFit:
    """Best point found in one rank-k model."""

    k: int
    theta_hat: RankKParams
    log_lf: float
    aic: float
    converged: bool
    n_evals: int
    best_start_index: int

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "log_lf": self.log_lf,
            "aic": self.aic,
            "converged": self.converged,
        }


@dataclass(frozen=True)
class MaiceResult:
    """The four rank fits plus the minimum-AIC choice among them."""

    fits: tuple[RankFit, RankFit, RankFit, RankFit]
    selected_k: int
    rho_hat: DensityMatrix
    C_hat: float

    def fit_for(self, k: int) -> RankFit:
        return self.fits[k - 1]

    def to_json(self) -> dict:
        return {
            "selected_k": self.selected_k,
            "fits": [f.to_json() for f in self.fits],
            "rho_hat": self.rho_hat.to_json(),
            "C_hat": self.C_hat,
        }


def aic(log_lf: float, k: int) -> float:
    """Akaike information criterion -2 log L + 2 (parameter count of rank k)."""
    return -2.0 * log_lf + 2.0 * param_count(k)


def linear_inversion_init(rec: CountRecord, ps: ProjectorSet) -> DensityMatrix:
    """Least-squares state estimate, projected onto the PSD cone.

    Solves n_v / t = C <m_v|X|m_v> for an unnormalized Hermitian X, splits
    off the trace as the rate estimate, clamps negative eigenvalues, and
    renormalizes.  Requires an informationally complete projector set.
    """
    if rec.counts.size != ps.size:
        raise ContractError(f"record has {rec.counts.size} counts for {ps.size} projectors")
    A = ps.design_matrix()
    y, _, rank, _ = np.linalg.lstsq(A, rec.counts / rec.t, rcond=None)
    if rank < 16:
        raise NotInformationallyCompleteError(
            f"projector set spans only {rank} of 16 Hermitian directions"
        )
    Y = hermitian_from_coords(y)
    c_hat = float(Y.trace().real)
    if c_hat <= 0.0:
        raise InvalidStateError("linear inversion produced a non-positive total rate")
    w, v = np.linalg.eigh(Y / c_hat)
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0.0:
        raise InvalidStateError("linear inversion produced no positive eigenvalue mass")
    m = (v * (w / w.sum())) @ v.conj().T
    return DensityMatrix(0.5 * (m + m.conj().T))


def _scaled_to_counts(theta: np.ndarray, k: int, kets, t: float, total: float, kern) -> np.ndarray:
    """Rescale a factor so its predicted total counts match the observed total."""
    predicted = float(kern.expected_rates(theta, k, kets, t).sum())
    if predicted <= 0.0:
        return theta
    return theta * np.sqrt(total / predicted)


def _run_start(objective, obj_grad, theta0: np.ndarray, n: int, opts: FitOptions):
    """Simplex stage then gradient polish; returns (f, theta, nfev, converged)."""
    best_f = objective(theta0)
    best_x = theta0
    nfev = 1

    simplex_budget = min(opts.max_iters, _SIMPLEX_EVALS_PER_PARAM * n + 200)
    scale = float(np.max(np.abs(theta0))) + 1.0
    res = minimize(
        objective,
        theta0,
        method="Nelder-Mead",
        options={
            "maxfev": simplex_budget,
            "xatol": 1e-4 * scale,
            "fatol": max(1e-7 * abs(best_f), 1e-10),
            "adaptive": True,
        },
    )
    nfev += res.nfev
    if res.fun < best_f:
        best_f, best_x = float(res.fun), res.x

    res = minimize(
        obj_grad,
        best_x,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": _POLISH_MAX_ITER, "ftol": opts.f_tol, "gtol": 1e-8},
    )
    nfev += res.nfev
    converged = bool(res.status == 0)
    if res.fun < best_f:
        best_f, best_x = float(res.fun), res.x
    return best_f, best_x, nfev, converged


def mle_fit(
    rec: CountRecord,
    ps: ProjectorSet,
    k: int,
    opts: FitOptions | None = None,
    extra_starts: tuple[RankKParams, ...] = (),
) -> RankFit:
    """Best local maximum of the rank-k log-likelihood over multiple starts.

    Start 0 projects a regularized linear-inversion estimate into the model;
    ``extra_starts`` (used by rank selection to embed the lower-rank
    solution) come next, then seeded random starts.  The returned point is
    never worse than any start.
    """
    param_count(k)
    opts = opts or FitOptions()
    total = rec.total
    if total == 0:
        raise NoInformationError("all counts are zero; nothing to fit")

    kern = _backend.active()
    kets = ps.kets
    counts = rec.counts.astype(float)
    t = rec.t
    lg = float(gammaln(counts + 1.0).sum())

    def objective(theta):
        return kern.neg_loglik(theta, k, kets, counts, t, MU_FLOOR, lg)

    def obj_grad(theta):
        return kern.neg_loglik_grad(theta, k, kets, counts, t, MU_FLOOR, lg)

    rho_li = linear_inversion_init(rec, ps)
    blended = (1.0 - _INIT_BLEND) * rho_li.matrix + _INIT_BLEND * np.eye(4) / 4.0
    p_init = project_to_rank(DensityMatrix(blended), k)
    starts = [_scaled_to_counts(p_init.theta, k, kets, t, total, kern)]
    for p in extra_starts:
        if p.k != k:
            raise ContractError(f"extra start has rank {p.k}, expected {k}")
        starts.append(np.array(p.theta))
    for j in range(1, opts.n_starts):
        draw = random_params(k, derive_seed(opts.seed, k, j))
        starts.append(_scaled_to_counts(draw.theta, k, kets, t, total, kern))

    best = None
    n_evals = 0
    for idx, theta0 in enumerate(starts):
        f, x, nfev, converged = _run_start(objective, obj_grad, theta0, param_count(k), opts)
        n_evals += nfev
        if best is None or f < best[0]:
            best = (f, x, idx, converged)

    f_best, x_best, idx_best, converged = best
    theta_hat = RankKParams(k, canonical_theta(x_best, k))
    log_lf = -f_best
    return RankFit(
        k=k,
        theta_hat=theta_hat,
        log_lf=log_lf,
        aic=aic(log_lf, k),
        converged=converged,
        n_evals=n_evals,
        best_start_index=idx_best,
    )


def maice_fit(rec: CountRecord, ps: ProjectorSet, opts: FitOptions | None = None) -> MaiceResult:
    """Fit ranks 1..4 and keep the minimum-AIC model (ties go to smaller k).

    Each rank k >= 2 receives the rank-(k-1) solution, embedded with a zero
    factor column, as an extra start, which makes the fitted log-likelihood
    non-decreasing in k up to optimizer tolerance.
    """
    opts = opts or FitOptions()
    fits: list[RankFit] = []
    previous: RankKParams | None = None
    for k in (1, 2, 3, 4):
        extra = (embed_params(previous, k),) if previous is not None else ()
        fit = mle_fit(rec, ps, k, opts, extra_starts=extra)
        fits.append(fit)
        previous = fit.theta_hat
    selected = min(fits, key=lambda f: (f.aic, f.k))
    rho_hat, c_hat = to_state(selected.theta_hat)
    return MaiceResult(
        fits=tuple(fits),
        selected_k=selected.k,
        rho_hat=rho_hat,
        C_hat=c_hat,
    )


def write_fit_report(result: MaiceResult | RankFit, path) -> None:
    """Fit report JSON; a single RankFit is wrapped in the same schema."""
    if isinstance(result, RankFit):
        rho_hat, c_hat = to_state(result.theta_hat)
        obj = {
            "selected_k": result.k,
            "fits": [result.to_json()],
            "rho_hat": rho_hat.to_json(),
            "C_hat": c_hat,
        }
    else:
        obj = result.to_json()
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def fit_options_with_seed(opts: FitOptions | None, seed: int) -> FitOptions:
    """Copy of opts (or defaults) with the seed replaced."""
    return replace(opts or FitOptions(), seed=seed)
