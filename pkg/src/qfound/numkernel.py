"""Hermitian eigen-machinery with explicit clustering of degenerate eigenvalues.

Everything downstream works with *clustered* spectra: eigenvalues that agree
up to round-off are merged and their eigenvectors summed into one spectral
projector.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .config import DEFAULT_TOLERANCES
from .errors import NotHermitian, NumericalFailure

ComplexMatrix = np.ndarray


@dataclass(frozen=True)
class EigenSystem:
    eigenvalues: np.ndarray          # distinct, ascending
    projectors: tuple                # one Hermitian projector per eigenvalue
    multiplicities: tuple

    @property
    def dimension(self) -> int:
        return self.projectors[0].shape[0]

    def reconstruct(self) -> ComplexMatrix:
        return sum(a * p for a, p in zip(self.eigenvalues, self.projectors))

    def apply(self, f: Callable[[float], float]) -> ComplexMatrix:
        """Matrix functional calculus: sum of f(alpha) E_alpha."""
        return sum(f(a) * p for a, p in zip(self.eigenvalues, self.projectors))

    def index_of(self, value: float, tol: float = 1e-9) -> int:
        return value_index(self.eigenvalues, value, tol)


def value_index(values: Sequence[float], value: float, tol: float = 1e-9) -> int:
    """Position of ``value`` in a sorted spectrum, matched within tolerance."""
    values = np.asarray(values, dtype=float)
    i = int(np.argmin(np.abs(values - value)))
    if abs(values[i] - value) > tol * (1.0 + abs(value)):
        raise KeyError(value)
    return i


def frobenius(m: np.ndarray) -> float:
    return float(np.linalg.norm(m))


def hermitian_residual(m: ComplexMatrix) -> float:
    return frobenius(m - m.conj().T)


def is_hermitian(m: ComplexMatrix, tol: float = DEFAULT_TOLERANCES["hermitian"]) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    if not np.all(np.isfinite(m)):
        return False
    return hermitian_residual(m) <= tol * (1.0 + frobenius(m))


def cluster_values(values, tol_abs: float = DEFAULT_TOLERANCES["cluster_abs"],
                   tol_rel: float = DEFAULT_TOLERANCES["cluster_rel"]):
    """Group reals connected by chains of small gaps.

    Two values share a cluster iff a chain of consecutive (sorted) gaps, each
    at most ``tol_abs + tol_rel * max|value|``, connects them.  Returns a list
    of ``(representative, member_indices)`` with the representative the mean
    of the members, ordered by strictly increasing representative.
    """
    vals = np.asarray(values, dtype=float).ravel()
    if vals.size == 0:
        return []
    gap = tol_abs + tol_rel * float(np.max(np.abs(vals)))
    order = np.argsort(vals, kind="stable")
    clusters = [[int(order[0])]]
    for prev, cur in zip(order[:-1], order[1:]):
        if vals[cur] - vals[prev] <= gap:
            clusters[-1].append(int(cur))
        else:
            clusters.append([int(cur)])
    return [(float(np.mean(vals[c])), sorted(c)) for c in clusters]


def hermitian_eigendecompose(m: ComplexMatrix, tol: float = DEFAULT_TOLERANCES["hermitian"],
                             tol_abs: float = DEFAULT_TOLERANCES["cluster_abs"],
                             tol_rel: float = DEFAULT_TOLERANCES["cluster_rel"]) -> EigenSystem:
    """Clustered spectral decomposition of a Hermitian matrix.

    Raises NotHermitian when ``||M - M^dagger||_F > tol (1 + ||M||_F)`` and
    NumericalFailure when LAPACK does not converge.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotHermitian(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NotHermitian("matrix has non-finite entries")
    if hermitian_residual(m) > tol * (1.0 + frobenius(m)):
        raise NotHermitian("matrix is not Hermitian within tolerance")
    h = 0.5 * (m + m.conj().T)
    try:
        w, v = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalFailure(str(exc)) from exc
    eigenvalues, projectors, mults = [], [], []
    for rep, members in cluster_values(w, tol_abs, tol_rel):
        vecs = v[:, members]
        p = vecs @ vecs.conj().T
        p = 0.5 * (p + p.conj().T)
        eigenvalues.append(rep)
        projectors.append(p)
        mults.append(int(round(float(np.trace(p).real))))
    return EigenSystem(np.array(eigenvalues), tuple(projectors), tuple(mults))


def eigensystem_from_blocks(values, projectors,
                            tol_abs: float = DEFAULT_TOLERANCES["cluster_abs"],
                            tol_rel: float = DEFAULT_TOLERANCES["cluster_rel"]) -> EigenSystem:
    """Build an EigenSystem from known orthogonal projectors and their values.

    Projectors whose values cluster together are summed, which is how the
    spectrum of f(A) is formed from the spectrum of A without re-diagonalizing.
    """
    eigenvalues, merged, mults = [], [], []
    for rep, members in cluster_values(values, tol_abs, tol_rel):
        p = sum(projectors[i] for i in members)
        p = 0.5 * (p + p.conj().T)
        eigenvalues.append(rep)
        merged.append(p)
        mults.append(int(round(float(np.trace(p).real))))
    return EigenSystem(np.array(eigenvalues), tuple(merged), tuple(mults))


def matrix_function(m: ComplexMatrix, f: Callable[[float], float]) -> ComplexMatrix:
    return hermitian_eigendecompose(m).apply(f)


def numerical_rank(m: ComplexMatrix, tol: float = DEFAULT_TOLERANCES["rank"]) -> int:
    w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    return int(np.sum(w > tol))


def commutator_norm(a: ComplexMatrix, b: ComplexMatrix) -> float:
    return frobenius(a @ b - b @ a)


def commute(a: ComplexMatrix, b: ComplexMatrix,
            tol: float = DEFAULT_TOLERANCES["commutator"]) -> bool:
    scale = 1.0 + frobenius(a) * frobenius(b)
    return commutator_norm(a, b) <= tol * scale
