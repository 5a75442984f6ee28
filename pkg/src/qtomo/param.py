"""Rank-k factor parametrization of two-qubit states.

A state of rank at most k is encoded by a real vector ``theta`` describing
a 4 x k lower-trapezoidal complex factor T (zero above the diagonal).  The
layout is frozen: the k diagonal entries (real, gauge-fixed nonnegative)
come first, then the below-diagonal entries column by column as (Re, Im)
pairs, column j contributing rows j+1..4.  That gives 7, 12, 15, and 16
real parameters for k = 1..4.

G = T T+ carries both the state and the overall rate: rho = G / Tr[G] and
C = Tr[G], so the single extra degree of freedom of the unnormalized factor
plays the role of the a-priori-unknown count-rate parameter.  Analytic
derivatives of rho and C with respect to every theta component feed the
likelihood gradients and Fisher matrices downstream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ._rng import philox_stream
from .errors import ContractError, DegenerateParameterError
from .qstate import DensityMatrix, hermitian_eig

DIM = 4


def param_count(k: int) -> int:
    """Number of real parameters of the rank-k factor: 7, 12, 15, 16."""
    if k not in (1, 2, 3, 4):
        raise ContractError(f"rank k must be in 1..4, got {k!r}")
    return 8 * k - k * k


@dataclass(frozen=True)
class FactorLayout:
    """Index map between theta components and entries of the 4 x k factor."""

    k: int

    def __post_init__(self):
        param_count(self.k)

    @property
    def n_params(self) -> int:
        return param_count(self.k)

    def entries(self) -> list[tuple[int, int, str]]:
        """(row, col, part) per theta component; part is 'diag', 're', or 'im'."""
        out: list[tuple[int, int, str]] = [(j, j, "diag") for j in range(self.k)]
        for c in range(self.k):
            for r in range(c + 1, DIM):
                out.append((r, c, "re"))
                out.append((r, c, "im"))
        return out


def build_factor(theta, k: int) -> np.ndarray:
    """The 4 x k lower-trapezoidal complex factor encoded by theta."""
    theta = np.asarray(theta, dtype=float)
    n = param_count(k)
    if theta.shape != (n,):
        raise ContractError(f"theta must have length {n} for k={k}, got {theta.shape}")
    T = np.zeros((DIM, k), dtype=np.complex128)
    diag = np.arange(k)
    T[diag, diag] = theta[:k]
    pos = k
    for c in range(k):
        nr = DIM - (c + 1)
        if nr:
            blk = theta[pos : pos + 2 * nr]
            T[c + 1 :, c] = blk[0::2] + 1j * blk[1::2]
            pos += 2 * nr
    return T


def flatten_factor(T: np.ndarray) -> np.ndarray:
    """Inverse of build_factor; imaginary residue on the diagonal is dropped."""
    T = np.asarray(T, dtype=np.complex128)
    if T.ndim != 2 or T.shape[0] != DIM or T.shape[1] not in (1, 2, 3, 4):
        raise ContractError(f"factor must be 4 x k with k in 1..4, got {T.shape}")
    k = T.shape[1]
    theta = np.empty(param_count(k))
    theta[:k] = T[np.arange(k), np.arange(k)].real
    pos = k
    for c in range(k):
        for r in range(c + 1, DIM):
            theta[pos] = T[r, c].real
            theta[pos + 1] = T[r, c].imag
            pos += 2
    return theta


def canonical_theta(theta, k: int) -> np.ndarray:
    """Flip the sign of every factor column whose diagonal is negative.

    G = T T+ is invariant under per-column sign flips, so this fixes the
    reporting gauge without touching the encoded state or rate.
    """
    theta = np.array(theta, dtype=float)
    T = build_factor(theta, k)
    for c in range(k):
        if T[c, c].real < 0.0:
            T[:, c] = -T[:, c]
    return flatten_factor(T)


@dataclass(frozen=True)
class RankKParams:
    """Validated parameter point of the rank-k model.

    Diagonal factor entries must be nonnegative (the reporting gauge) and
    the vector must be nonzero, since the all-zero factor encodes no state.
    """

    k: int
    theta: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = param_count(self.k)
        theta = np.array(self.theta, dtype=float).reshape(-1)
        if theta.shape != (n,):
            raise ContractError(f"theta must have length {n} for k={self.k}, got {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise ContractError("theta must be finite")
        if np.any(theta[: self.k] < 0.0):
            raise ContractError("diagonal factor entries must be nonnegative")
        if not np.any(theta):
            raise DegenerateParameterError("the all-zero theta encodes no state")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def n_params(self) -> int:
        return param_count(self.k)

    def factor(self) -> np.ndarray:
        return build_factor(self.theta, self.k)

    def to_json(self) -> dict:
        return {"k": self.k, "theta": self.theta.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "RankKParams":
        try:
            return cls(int(obj["k"]), np.array(obj["theta"], dtype=float))
        except (KeyError, TypeError) as exc:
            raise ContractError(f"malformed parameter JSON: {exc}") from exc

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "RankKParams":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def to_state(p: RankKParams) -> tuple[DensityMatrix, float]:
    """The (state, rate) pair encoded by p: rho = G / Tr[G], C = Tr[G]."""
    T = p.factor()
    G = T @ T.conj().T
    c = float(G.trace().real)
    if c <= 0.0:
        raise DegenerateParameterError("factor has zero norm")
    return DensityMatrix(G / c), c


def gram_and_rate(theta, k: int) -> tuple[np.ndarray, float]:
    """Unnormalized G = T T+ and its trace, without state validation."""
    T = build_factor(theta, k)
    G = T @ T.conj().T
    return G, float(G.trace().real)


def _d_gram(T: np.ndarray, entry: tuple[int, int, str]) -> np.ndarray:
    r, c, part = entry
    scale = 1.0 if part != "im" else 1.0j
    col = T[:, c]
    dG = np.zeros((DIM, DIM), dtype=np.complex128)
    dG[r, :] += scale * col.conj()
    dG[:, r] += np.conj(scale) * col
    return dG


def d_C_d_theta(p: RankKParams, i: int) -> float:
    """Derivative of the rate C = Tr[T T+] along theta component i."""
    entries = FactorLayout(p.k).entries()
    if not 0 <= i < len(entries):
        raise ContractError(f"parameter index {i} out of range for k={p.k}")
    r, c, part = entries[i]
    T = p.factor()
    if part == "diag":
        return 2.0 * float(T[r, c].real)
    if part == "re":
        return 2.0 * float(T[r, c].real)
    return 2.0 * float(T[r, c].imag)


def d_rho_d_theta(p: RankKParams, i: int) -> np.ndarray:
    """Analytic derivative of rho = G / Tr[G] along theta component i.

    Hermitian and traceless: (dG * C - G * Tr[dG]) / C^2 with
    dG = dT T+ + T dT+.
    """
    entries = FactorLayout(p.k).entries()
    if not 0 <= i < len(entries):
        raise ContractError(f"parameter index {i} out of range for k={p.k}")
    T = p.factor()
    G = T @ T.conj().T
    c = float(G.trace().real)
    dG = _d_gram(T, entries[i])
    dc = float(dG.trace().real)
    out = (dG * c - G * dc) / (c * c)
    return 0.5 * (out + out.conj().T)


def d_rho_all(p: RankKParams) -> list[np.ndarray]:
    """All state derivatives at p, ordered by the layout."""
    T = p.factor()
    G = T @ T.conj().T
    c = float(G.trace().real)
    out = []
    for entry in FactorLayout(p.k).entries():
        dG = _d_gram(T, entry)
        dc = float(dG.trace().real)
        d = (dG * c - G * dc) / (c * c)
        out.append(0.5 * (d + d.conj().T))
    return out


def project_to_rank(rho, k: int) -> RankKParams:
    """Factor the best rank-k truncation of rho into layout parameters.

    Keeps the k largest eigenpairs, renormalizes, and builds the unique
    lower-trapezoidal factor with nonnegative diagonal (via QR of the
    truncated spectral factor, then per-column phase fixing).  The result
    always encodes a unit-rate point: Tr[T T+] = 1.
    """
    param_count(k)
    w, v = hermitian_eig(rho)
    wk = np.clip(w[:k], 0.0, None)
    total = wk.sum()
    if total <= 0.0:
        raise ContractError("state has no positive eigenvalue mass to project")
    wk = wk / total
    A = v[:, :k] * np.sqrt(wk)
    # A A+ equals the truncated state; the LQ shape of A gives the
    # trapezoidal factor: A+ = Q R  =>  A A+ = R+ R.
    _, r = np.linalg.qr(A.conj().T)
    T = r.conj().T
    for c in range(k):
        d = T[c, c]
        if abs(d) > 0.0:
            T[:, c] *= np.conj(d) / abs(d)
        T[c, c] = abs(d)
    return RankKParams(k, flatten_factor(T))


def random_params(k: int, seed: int) -> RankKParams:
    """Standard-normal parameter draw with nonnegative diagonal, per seed."""
    n = param_count(k)
    gen = philox_stream(seed)
    theta = gen.standard_normal(n)
    theta[:k] = np.abs(theta[:k])
    return RankKParams(k, theta)


def embed_params(p: RankKParams, k_new: int) -> RankKParams:
    """Re-express a rank-k point inside a larger rank-k_new model.

    Appended factor columns are zero, so the encoded G is unchanged.
    """
    if k_new < p.k:
        raise ContractError(f"cannot embed rank {p.k} into smaller rank {k_new}")
    if k_new == p.k:
        return p
    T = np.zeros((DIM, k_new), dtype=np.complex128)
    T[:, : p.k] = p.factor()
    return RankKParams(k_new, flatten_factor(T))
