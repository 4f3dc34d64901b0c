"""Matrix realization of an operational system: Born rule and Lueders updates."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, NoNondegenerateObservable, NotDensity, NotHermitian
from .numkernel import (EigenSystem, eigensystem_from_blocks, frobenius, hermitian_eigendecompose,
                        is_hermitian, numerical_rank)
from .system import MIXED, NULL, DistributionTable, EventSpec, OperationalSystem, SpectrumSet


@dataclass(eq=False)
class HermitianObservable:
    name: str
    matrix: np.ndarray
    _eig: EigenSystem | None = field(default=None, repr=False)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if not is_hermitian(self.matrix):
            raise NotHermitian(f"observable {self.name!r} is not Hermitian")

    @property
    def eig(self) -> EigenSystem:
        if self._eig is None:
            self._eig = hermitian_eigendecompose(self.matrix)
        return self._eig

    @property
    def spectrum(self) -> SpectrumSet:
        return SpectrumSet(self.eig.eigenvalues)


@dataclass(eq=False)
class DensityState:
    name: str | None
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)

    def validate(self, tol: float = 1e-10):
        m = self.matrix
        if not is_hermitian(m, tol):
            raise NotDensity(f"state {self.name!r} is not Hermitian")
        if np.allclose(m, 0):
            return self
        w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        if w.min() < -tol:
            raise NotDensity(f"state {self.name!r} is not positive semidefinite")
        if abs(np.trace(m).real - 1.0) > tol:
            raise NotDensity(f"state {self.name!r} does not have unit trace")
        return self


def pure_state(vector, name=None) -> DensityState:
    v = np.asarray(vector, dtype=complex)
    v = v / np.linalg.norm(v)
    return DensityState(name, np.outer(v, v.conj()))


def born_distribution(rho: DensityState, A: HermitianObservable, drift: float = 1e-10) -> DistributionTable:
    if rho.matrix.shape != A.matrix.shape:
        raise DimensionMismatch("state and observable dimensions differ")
    p = _born(rho.matrix, A.eig, drift)
    return DistributionTable((A.spectrum,), p, (A.name,))


def _born(rho: np.ndarray, eig: EigenSystem, drift: float = 1e-10) -> np.ndarray:
    # tr(rho E) = sum_ij rho_ij E_ji
    p = np.array([np.real(np.sum(rho * e.T)) for e in eig.projectors])
    total = p.sum()
    if total <= drift:
        return np.zeros_like(p)
    p = np.clip(p, 0.0, 1.0)
    s = p.sum()
    if abs(s - 1.0) <= drift and s > 0:
        p = p / s
    return p


def luders_update(rho: DensityState, event: EventSpec, A: HermitianObservable,
                  zero: float = 1e-14) -> DensityState:
    """sum_{alpha in Delta} E rho E / tr(rho E_Delta); zero matrix if improbable."""
    if rho.matrix.shape != A.matrix.shape:
        raise DimensionMismatch("state and observable dimensions differ")
    spec = A.spectrum
    idx = sorted({spec.index(v) for v in event.subset})
    return DensityState(None, _luders(rho.matrix, [A.eig.projectors[i] for i in idx], zero))


def _luders(rho: np.ndarray, projectors: Sequence[np.ndarray], zero: float = 1e-14) -> np.ndarray:
    out = sum(e @ rho @ e for e in projectors)
    t = np.trace(out).real
    if t <= zero:
        return np.zeros_like(rho)
    out = out / t
    return 0.5 * (out + out.conj().T)


class HilbertSystem(OperationalSystem):
    """Observables are Hermitian matrices, states density matrices."""

    def __init__(self, n: int, tolerances: Mapping | None = None):
        super().__init__(n, tolerances)
        self.register_state(MIXED, DensityState(MIXED, np.eye(n) / n))
        self.register_state(NULL, DensityState(NULL, np.zeros((n, n))))

    # hooks
    def _spectrum(self, obs):
        return obs.spectrum

    def _probabilities(self, state, obs):
        return _born(state.matrix, obs.eig)

    def _objective_update(self, state, name, index):
        e = self.observable(name).eig.projectors[index]
        return DensityState(None, _luders(state.matrix, [e], self.tol["zero_probability"]))

    def subjective_update(self, state, name, indices):
        st = self.state(state)
        eig = self.observable(name).eig
        return DensityState(None, _luders(st.matrix, [eig.projectors[i] for i in indices],
                                          self.tol["zero_probability"]))

    def mix(self, weights, states):
        m = sum(float(w) * self.state(s).matrix for w, s in zip(weights, states))
        return DensityState(None, m)

    def is_null(self, state):
        return float(np.trace(self.state(state).matrix).real) <= self.tol["zero_probability"]

    def is_pure(self, state):
        return numerical_rank(self.state(state).matrix, self.tol["rank"]) == 1

    def _function_observable(self, name, values):
        base = self.observable(name)
        eig = eigensystem_from_blocks(values, base.eig.projectors,
                                      self.tol["cluster_abs"], self.tol["cluster_rel"])
        obs = HermitianObservable("", eig.reconstruct())
        obs._eig = eig
        return obs

    def _observable_key(self, obs):
        key = getattr(obs, "_key", None)
        if key is None:
            key = (float(np.trace(obs.matrix).real), frobenius(obs.matrix))
            obs._key = key
        return key

    def _same_observable(self, a, b):
        return frobenius(a.matrix - b.matrix) <= 1e-9 * (1.0 + frobenius(a.matrix))

    def states_equal(self, s1, s2, tol=None):
        tol = self.tol["equivalence"] if tol is None else tol
        return frobenius(self.state(s1).matrix - self.state(s2).matrix) <= tol

    def register_observable(self, name, obs, dedup=True):
        if not isinstance(obs, HermitianObservable):
            obs = HermitianObservable(name, obs)
        if obs.matrix.shape != (self.dimension, self.dimension):
            raise DimensionMismatch(f"observable {name!r} has shape {obs.matrix.shape}")
        return super().register_observable(name, obs, dedup)

    def matrix(self, name: str) -> np.ndarray:
        return self.observable(name).matrix

    def add_state(self, name: str, matrix) -> str:
        st = DensityState(name, matrix)
        if st.matrix.shape != (self.dimension, self.dimension):
            raise DimensionMismatch(f"state {name!r} has shape {st.matrix.shape}")
        st.validate()
        return self.register_state(name, st)


def build_hilbert_system(n: int, observables, states=(), tolerances=None) -> HilbertSystem:
    """Build a system from named matrices.

    ``observables`` and ``states`` are sequences of HermitianObservable /
    DensityState or ``(name, matrix)`` pairs.  Declared observables are kept
    under their own names even when two of them coincide.
    """
    sys = HilbertSystem(n, tolerances)
    names = []
    for item in observables:
        obs = item if isinstance(item, HermitianObservable) else HermitianObservable(*item)
        if obs.matrix.shape != (n, n):
            raise DimensionMismatch(f"observable {obs.name!r} has shape {obs.matrix.shape}, expected {(n, n)}")
        names.append(sys.register_observable(obs.name, obs, dedup=False))
    if not any(len(sys.spectrum(o)) == n for o in names):
        raise NoNondegenerateObservable("at least one observable must have n distinct eigenvalues")
    snames = []
    for item in states:
        st = item if isinstance(item, DensityState) else DensityState(*item)
        if st.matrix.shape != (n, n):
            raise DimensionMismatch(f"state {st.name!r} has shape {st.matrix.shape}, expected {(n, n)}")
        st.validate()
        snames.append(sys.register_state(st.name, st))
    sys.declared_observables = tuple(names)
    sys.declared_states = tuple(snames)
    return sys
