"""Tomographic measurement model.

A projector set lists the polarization settings; every setting is read out
as an independent Poisson channel with mean M_v = C t <m_v|rho|m_v>, where
C is the overall coincidence rate and t the acquisition time.  This module
provides the default 16-setting product basis, count sampling, the count
log-likelihood and its gradient, and the relative entropy between Poisson
rate vectors.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, kl_div

from . import _backend
from ._rng import poisson_draw
from .errors import ContractError, InvalidStateError
from .param import RankKParams
from .qstate import _as_matrix

KET_NORM_TOL = 1e-10
MU_FLOOR = 1e-12

_SQ2 = np.sqrt(2.0)
_SINGLE_KETS = {
    "H": np.array([1.0, 0.0], dtype=np.complex128),
    "V": np.array([0.0, 1.0], dtype=np.complex128),
    "D": np.array([1.0, 1.0], dtype=np.complex128) / _SQ2,
    "L": np.array([1.0, 1.0j], dtype=np.complex128) / _SQ2,
    "R": np.array([1.0, -1.0j], dtype=np.complex128) / _SQ2,
}

DEFAULT_LABELS = (
    "HH", "HV", "VV", "VH",
    "RH", "RV", "DV", "DH",
    "DR", "DD", "RD", "HD",
    "VD", "VL", "HL", "RL",
)


class ProjectorSet:
    """Ordered list of labelled projector kets |m_v>.

    Only unit norm is enforced, so entangled (inseparable) kets are valid
    entries.  ``informationally_complete`` reports whether the projectors
    span the 16-dimensional real space of Hermitian 4x4 matrices.
    """

    __slots__ = ("_labels", "_kets", "_design", "_complete")

    def __init__(self, labels, kets) -> None:
        kets = np.array(kets, dtype=np.complex128)
        labels = tuple(str(x) for x in labels)
        if kets.ndim != 2 or kets.shape[1] != 4 or kets.shape[0] < 1:
            raise ContractError(f"kets must be a (V, 4) array with V >= 1, got {kets.shape}")
        if len(labels) != kets.shape[0]:
            raise ContractError("label count does not match ket count")
        norms = np.linalg.norm(kets, axis=1)
        if np.max(np.abs(norms - 1.0)) > KET_NORM_TOL:
            raise ContractError("every ket must have unit norm within 1e-10")
        self._labels = labels
        self._kets = kets
        self._kets.setflags(write=False)
        self._design = None
        self._complete = None

    @property
    def size(self) -> int:
        return self._kets.shape[0]

    @property
    def labels(self) -> tuple[str, ...]:
        return self._labels

    @property
    def kets(self) -> np.ndarray:
        return self._kets

    def __len__(self) -> int:
        return self.size

    def __repr__(self) -> str:
        return f"ProjectorSet(V={self.size})"

    def design_matrix(self) -> np.ndarray:
        """(V, 16) real matrix of projector coordinates in a Hermitian basis.

        Row v holds <m_v|B_a|m_v> for the basis of 4 diagonal units and the
        12 symmetric / antisymmetric off-diagonal combinations; it is the
        linear map from Hermitian observables to expected rates.
        """
        if self._design is None:
            V = self.size
            A = np.empty((V, 16))
            P = self._kets.conj()[:, :, None] * self._kets[:, None, :]  # m* m^T per row
            col = 0
            for a in range(4):
                A[:, col] = P[:, a, a].real
                col += 1
            for a in range(4):
                for b in range(a + 1, 4):
                    A[:, col] = 2.0 * P[:, a, b].real
                    A[:, col + 1] = -2.0 * P[:, a, b].imag
                    col += 2
            A.setflags(write=False)
            self._design = A
        return self._design

    @property
    def informationally_complete(self) -> bool:
        if self._complete is None:
            self._complete = bool(np.linalg.matrix_rank(self.design_matrix(), tol=1e-10) == 16)
        return self._complete

    def to_json(self) -> dict:
        return {
            "projectors": [
                {"label": lab, "re": ket.real.tolist(), "im": ket.imag.tolist()}
                for lab, ket in zip(self._labels, self._kets)
            ]
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ProjectorSet":
        try:
            rows = obj["projectors"]
            labels = [row["label"] for row in rows]
            kets = [np.array(row["re"], float) + 1j * np.array(row["im"], float) for row in rows]
        except (KeyError, TypeError) as exc:
            raise ContractError(f"malformed projector JSON: {exc}") from exc
        return cls(labels, np.array(kets))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ProjectorSet":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def hermitian_from_coords(y: np.ndarray) -> np.ndarray:
    """Inverse of the design-matrix basis: coordinates -> Hermitian matrix."""
    y = np.asarray(y, dtype=float)
    if y.shape != (16,):
        raise ContractError(f"expected 16 coordinates, got {y.shape}")
    m = np.zeros((4, 4), dtype=np.complex128)
    col = 0
    for a in range(4):
        m[a, a] = y[col]
        col += 1
    for a in range(4):
        for b in range(a + 1, 4):
            m[a, b] = y[col] + 1j * y[col + 1]
            m[b, a] = y[col] - 1j * y[col + 1]
            col += 2
    return m


def product_ket(label: str) -> np.ndarray:
    """Two-letter polarization label -> 4-component product ket."""
    if len(label) != 2 or label[0] not in _SINGLE_KETS or label[1] not in _SINGLE_KETS:
        raise ContractError(f"unknown polarization label {label!r}")
    return np.kron(_SINGLE_KETS[label[0]], _SINGLE_KETS[label[1]])


def default_projectors() -> ProjectorSet:
    """The standard 16-setting product-basis tomography set."""
    kets = np.array([product_ket(lab) for lab in DEFAULT_LABELS])
    return ProjectorSet(DEFAULT_LABELS, kets)


@dataclass(frozen=True)
class CountRecord:
    """Observed coincidence counts with their acquisition time and seed.

    ``seed`` is None for imported (real) data.
    """

    counts: np.ndarray
    t: float
    seed: int | None = None

    def __post_init__(self):
        counts = np.array(self.counts)
        if counts.ndim != 1 or counts.size < 1:
            raise ContractError("counts must be a nonempty vector")
        if np.any(counts < 0) or not np.all(counts == np.floor(counts)):
            raise ContractError("counts must be nonnegative integers")
        if not self.t > 0.0:
            raise ContractError("acquisition time must be positive")
        counts = counts.astype(np.int64)
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "t", float(self.t))

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def expected_counts(rho, C: float, t: float, ps: ProjectorSet) -> np.ndarray:
    """M_v = C t <m_v|rho|m_v>, clamped at zero within round-off."""
    if not C > 0.0 or not t > 0.0:
        raise ContractError("C and t must be positive")
    m = _as_matrix(rho)
    if m.shape != (4, 4):
        raise ContractError("expected a two-qubit state")
    p = np.einsum("vi,ij,vj->v", ps.kets.conj(), m, ps.kets).real
    if np.min(p) < -1e-9:
        raise InvalidStateError(f"projector expectation {np.min(p):.3e} below -1e-9")
    return C * t * np.clip(p, 0.0, None)


def sample_counts(rho, C: float, t: float, ps: ProjectorSet, seed: int) -> CountRecord:
    """Independent Poisson draw per projector, keyed by (seed, index)."""
    M = expected_counts(rho, C, t, ps)
    counts = np.array([poisson_draw(seed, v, M[v]) for v in range(ps.size)], dtype=np.int64)
    return CountRecord(counts, t, seed)


def _check_sizes(rec: CountRecord, ps: ProjectorSet) -> None:
    if rec.counts.size != ps.size:
        raise ContractError(f"record has {rec.counts.size} counts for {ps.size} projectors")


def log_likelihood(p: RankKParams, rec: CountRecord, ps: ProjectorSet) -> float:
    """Poisson log-likelihood of the counts at parameter point p.

    Includes the -log(n!) terms, so the value matches the full count
    probability rather than a likelihood shifted by a data constant.
    """
    _check_sizes(rec, ps)
    counts = rec.counts.astype(float)
    lg = float(gammaln(counts + 1.0).sum())
    return -_backend.active().neg_loglik(p.theta, p.k, ps.kets, counts, rec.t, MU_FLOOR, lg)


def grad_log_likelihood(p: RankKParams, rec: CountRecord, ps: ProjectorSet) -> np.ndarray:
    """Gradient of the log-likelihood along every theta component."""
    _check_sizes(rec, ps)
    counts = rec.counts.astype(float)
    _, g = _backend.active().neg_loglik_grad(p.theta, p.k, ps.kets, counts, rec.t, MU_FLOOR, 0.0)
    return -g


def poisson_relative_entropy(M0, M) -> float:
    """Relative entropy between independent Poisson vectors with means M0, M.

    Closed form sum of M0 log(M0/M) - M0 + M per channel; infinite when
    some channel has M0 > 0 but M = 0.
    """
    M0 = np.asarray(M0, dtype=float)
    M = np.asarray(M, dtype=float)
    if M0.shape != M.shape:
        raise ContractError(f"rate vectors differ in shape: {M0.shape} vs {M.shape}")
    if np.any(M0 < 0.0) or np.any(M < 0.0):
        raise ContractError("rates must be nonnegative")
    return float(kl_div(M0, M).sum())


def write_count_file(rec: CountRecord, ps: ProjectorSet, path) -> None:
    """CSV of label,count rows plus a JSON sidecar with t and seed.

    The sidecar lives at ``<path>.meta.json``.
    """
    _check_sizes(rec, ps)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "count"])
        for lab, n in zip(ps.labels, rec.counts):
            writer.writerow([lab, int(n)])
    with open(f"{path}.meta.json", "w") as fh:
        json.dump({"t": rec.t, "seed": rec.seed}, fh)
        fh.write("\n")


def read_count_file(path, ps: ProjectorSet | None = None) -> tuple[CountRecord, tuple[str, ...]]:
    """Load a count CSV and its sidecar; labels are checked against ps if given."""
    labels: list[str] = []
    counts: list[int] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["label", "count"]:
            raise ContractError(f"count file {path} has header {header}, expected label,count")
        for row in reader:
            if not row:
                continue
            labels.append(row[0])
            counts.append(int(row[1]))
    with open(f"{path}.meta.json") as fh:
        meta = json.load(fh)
    seed = meta.get("seed")
    rec = CountRecord(np.array(counts), float(meta["t"]), None if seed is None else int(seed))
    if ps is not None and tuple(labels) != ps.labels:
        raise ContractError("count-file labels do not match the projector set")
    return rec, tuple(labels)
