"""Density matrices and the metrics used on them throughout the package.

A state is a Hermitian, positive semidefinite, unit-trace complex matrix;
two-qubit states (4x4) are the main subject, single-qubit states (2x2) are
supported for small test families.  Fidelity and Bures distance compare an
estimate against a reference state; entropy, concurrence, and entanglement
of formation characterize a single state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, InvalidStateError

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-10
EIGENVALUE_CLAMP = 1e-9
RANK_TOL = 1e-6

_LOG2 = np.log(2.0)

# sigma_y (x) sigma_y in the product basis (HH, HV, VH, VV); used by the
# spin-flip construction behind concurrence.
_SPIN_FLIP = np.array(
    [
        [0, 0, 0, -1],
        [0, 0, 1, 0],
        [0, 1, 0, 0],
        [-1, 0, 0, 0],
    ],
    dtype=np.complex128,
)


def _as_matrix(rho) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        return rho.matrix
    return np.asarray(rho, dtype=np.complex128)


class DensityMatrix:
    """Validated quantum state.

    Construction checks Hermiticity (1e-12 element-wise), unit trace
    (1e-10), and positivity: eigenvalues below -1e-9 are rejected, while
    eigenvalues in [-1e-9, 0) are clamped to zero and the spectrum is
    renormalized, so the stored matrix is exactly PSD with unit trace.
    Instances are immutable and safe to share between tasks.
    """

    __slots__ = ("_m",)

    def __init__(self, matrix) -> None:
        m = np.array(matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] not in (2, 4):
            raise ContractError(f"expected a 2x2 or 4x4 matrix, got shape {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > HERMITICITY_TOL:
            raise InvalidStateError("matrix is not Hermitian within 1e-12")
        if abs(m.trace() - 1.0) > TRACE_TOL:
            raise InvalidStateError(f"trace {m.trace():.6e} differs from 1 beyond 1e-10")
        m = 0.5 * (m + m.conj().T)
        w = np.linalg.eigvalsh(m)
        if w[0] < -EIGENVALUE_CLAMP:
            raise InvalidStateError(f"smallest eigenvalue {w[0]:.3e} is below -1e-9")
        if w[0] < 0.0:
            # Clamp round-off negatives to zero and renormalize the spectrum.
            w_full, v = np.linalg.eigh(m)
            w_full = np.clip(w_full, 0.0, None)
            m = (v * (w_full / w_full.sum())) @ v.conj().T
            m = 0.5 * (m + m.conj().T)
        self._m = m
        self._m.setflags(write=False)

    @property
    def dim(self) -> int:
        return self._m.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        """The underlying read-only complex array."""
        return self._m

    def __array__(self, dtype=None, copy=None):
        if dtype is not None:
            return self._m.astype(dtype)
        return self._m

    def __repr__(self) -> str:
        return f"DensityMatrix(dim={self.dim})"

    def __reduce__(self):
        # restore the already-validated matrix verbatim: re-running the
        # constructor would re-clamp and perturb the stored bytes
        return (DensityMatrix._restore, (np.array(self._m),))

    @classmethod
    def _restore(cls, matrix: np.ndarray) -> "DensityMatrix":
        self = cls.__new__(cls)
        self._m = matrix
        self._m.setflags(write=False)
        return self

    def to_json(self) -> dict:
        """JSON object with row-major real and imaginary parts."""
        return {
            "dim": self.dim,
            "re": self._m.real.tolist(),
            "im": self._m.imag.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DensityMatrix":
        try:
            dim = obj["dim"]
            m = np.array(obj["re"], dtype=float) + 1j * np.array(obj["im"], dtype=float)
        except (KeyError, TypeError) as exc:
            raise ContractError(f"malformed density-matrix JSON: {exc}") from exc
        if m.shape != (dim, dim):
            raise ContractError(f"JSON dim {dim} does not match entries of shape {m.shape}")
        return cls(m)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "DensityMatrix":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True)
class StateCharacter:
    """Summary numbers for a two-qubit state: von Neumann entropy and
    entanglement of formation in bits, concurrence, and the numerical rank
    (count of eigenvalues above ``RANK_TOL``)."""

    entropy_bits: float
    eof_bits: float
    concurrence: float
    rank: int


def hermitian_eig(rho) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in descending order with matching orthonormal eigenvectors.

    Accepts a DensityMatrix or a raw Hermitian array; eigenvectors are the
    columns of the returned matrix.
    """
    m = _as_matrix(rho)
    if np.max(np.abs(m - m.conj().T)) > HERMITICITY_TOL:
        raise InvalidStateError("matrix is not Hermitian within 1e-12")
    w, v = np.linalg.eigh(m)
    return w[::-1].copy(), v[:, ::-1].copy()


def matrix_sqrt_psd(rho) -> np.ndarray:
    """Hermitian PSD square root, via eigendecomposition.

    Eigenvalues in [-1e-9, 0) are treated as zero; anything lower is an
    invalid state.  Eigenvalues below machine noise relative to the largest
    one are also zeroed, since their square roots would otherwise inject
    sqrt(eps)-scale dirt into rank-deficient results.
    """
    m = _as_matrix(rho)
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    if w[0] < -EIGENVALUE_CLAMP:
        raise InvalidStateError(f"matrix has eigenvalue {w[0]:.3e} below -1e-9")
    w = np.clip(w, 0.0, None)
    w[w < 1e-14 * w[-1]] = 0.0
    w = np.sqrt(w)
    s = (v * w) @ v.conj().T
    return 0.5 * (s + s.conj().T)


def fidelity(rho0, rho) -> float:
    """Uhlmann fidelity Tr sqrt(sqrt(rho0) rho sqrt(rho0)), in [0, 1].

    Both square roots come from eigendecompositions; the trace of the
    remaining PSD square root is evaluated as the singular-value sum of
    sqrt(rho0) sqrt(rho), which is the same eigensum without squaring the
    small eigenvalues first, so near-degenerate states lose no precision
    and no square root of a non-Hermitian product is ever formed.
    """
    m0 = _as_matrix(rho0)
    m1 = _as_matrix(rho)
    if m0.shape != m1.shape:
        raise ContractError(f"dimension mismatch: {m0.shape} vs {m1.shape}")
    f = float(np.linalg.svd(matrix_sqrt_psd(m0) @ matrix_sqrt_psd(m1), compute_uv=False).sum())
    return min(f, 1.0)


def bures_distance(rho0, rho) -> float:
    """2 (1 - fidelity); experiment reports divide this by 2."""
    return 2.0 - 2.0 * fidelity(rho0, rho)


def von_neumann_entropy(rho) -> float:
    """Spectral entropy in bits; 0 log 0 counts as 0."""
    w = np.linalg.eigvalsh(_as_matrix(rho))
    w = np.clip(w, 0.0, None)
    pos = w[w > 0.0]
    return float(-(pos * (np.log(pos) / _LOG2)).sum())


def concurrence(rho) -> float:
    """Wootters concurrence of a two-qubit state.

    max(0, l1 - l2 - l3 - l4) where the l's are the descending square roots
    of the eigenvalues of rho (sy x sy) rho* (sy x sy), evaluated through
    the Hermitian matrix sqrt(rho) rho~ sqrt(rho) for numerical stability.
    """
    m = _as_matrix(rho)
    if m.shape[0] != 4:
        raise ContractError("concurrence is defined for two-qubit (4x4) states only")
    flipped = _SPIN_FLIP @ m.conj() @ _SPIN_FLIP
    s = matrix_sqrt_psd(m)
    inner = s @ flipped @ s
    w = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    lam = np.sqrt(np.clip(w, 0.0, None))[::-1]
    c = float(lam[0] - lam[1] - lam[2] - lam[3])
    return min(max(c, 0.0), 1.0)


def binary_entropy(p: float) -> float:
    """h(p) in bits, with h(0) = h(1) = 0."""
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return float(-(p * np.log(p) + (1.0 - p) * np.log(1.0 - p)) / _LOG2)


def entanglement_of_formation(rho) -> float:
    """h((1 + sqrt(1 - C^2)) / 2) in bits, with C the concurrence."""
    c = concurrence(rho)
    return binary_entropy(0.5 * (1.0 + np.sqrt(max(0.0, 1.0 - c * c))))


def characterize(rho, rank_tol: float = RANK_TOL) -> StateCharacter:
    """Entropy, entanglement of formation, concurrence, and numerical rank."""
    m = _as_matrix(rho)
    if m.shape[0] != 4:
        raise ContractError("characterize expects a two-qubit (4x4) state")
    w = np.linalg.eigvalsh(m)
    c = concurrence(m)
    return StateCharacter(
        entropy_bits=von_neumann_entropy(m),
        eof_bits=entanglement_of_formation(m),
        concurrence=c,
        rank=int((w > rank_tol).sum()),
    )
