"""Deliberately broken systems, each violating one postulate.

They exist to show that the auditor catches what it claims to catch.
"""
from __future__ import annotations

import numpy as np

from .hilbert import DensityState, HilbertSystem, build_hilbert_system, pure_state
from .library import I2, X, Z, kron
from .system import MIXED, OperationalSystem
from .table import TableSystem


class _NoUpdate(HilbertSystem):
    def _objective_update(self, state, name, index):
        return state

    def subjective_update(self, state, name, indices):
        return self.state(state)


class _Dephasing(HilbertSystem):
    """Degenerate events dephase in the computational basis inside the
    eigenspace instead of projecting coherently."""

    def _objective_update(self, state, name, index):
        e = self.observable(name).eig.projectors[index]
        n = self.dimension
        inside = [k for k in range(n) if abs(e[k, k] - 1.0) < 1e-9]
        if len(inside) <= 1 or np.linalg.norm(e - sum(np.outer(np.eye(n)[k], np.eye(n)[k]) for k in inside)) > 1e-9:
            return super()._objective_update(state, name, index)
        rho = state.matrix
        out = np.zeros_like(rho)
        for k in inside:
            out[k, k] = rho[k, k]
        t = np.trace(out).real
        return DensityState(None, out / t if t > self.tol["zero_probability"] else out)

    def subjective_update(self, state, name, indices):
        return OperationalSystem.subjective_update(self, state, name, indices)


def _rebuild(cls, n, observables, states):
    ref = build_hilbert_system(n, observables, states)
    sys = cls(n)
    for name in ref.declared_observables:
        sys.register_observable(name, ref.observable(name), dedup=False)
    for name in ref.declared_states:
        sys.register_state(name, ref.state(name))
    sys.declared_observables = ref.declared_observables
    sys.declared_states = ref.declared_states
    return sys


def broken_update_mutant() -> HilbertSystem:
    """Qubit whose updates leave every state unchanged (targets P2)."""
    return _rebuild(_NoUpdate, 2, [("sz", Z), ("sx", X)],
                    [pure_state([1, 0], "zero"), pure_state([1, 1], "plus")])


def nonuniform_mixed_mutant() -> HilbertSystem:
    """Qubit whose 'completely mixed' state is diag(0.7, 0.3) (targets P3)."""
    sys = build_hilbert_system(2, [("sz", Z), ("sx", X)], [pure_state([1, 0], "zero")])
    sys._states[MIXED] = DensityState(MIXED, np.diag([0.7, 0.3]))
    return sys


def signaling_table(honest: bool = False) -> TableSystem:
    """Classical three-level device C with coarse-grainings A = [C in {1,2}]
    and B = [C = 2].  The dishonest version sends every A = 1 event to the
    C = 1 state, so measuring A disturbs the statistics its cone predicts
    (targets P4).  ``honest=True`` gives the consistent device."""
    obs = {"c": [0.0, 1.0, 2.0], "a": [0.0, 1.0], "b": [0.0, 1.0]}
    states = {
        "mixed": {"c": [1 / 3, 1 / 3, 1 / 3], "a": [1 / 3, 2 / 3], "b": [2 / 3, 1 / 3]},
        "c0": {"c": [1, 0, 0], "a": [1, 0], "b": [1, 0]},
        "c1": {"c": [0, 1, 0], "a": [0, 1], "b": [1, 0]},
        "c2": {"c": [0, 0, 1], "a": [0, 1], "b": [0, 1]},
    }
    a_of = {0: 0, 1: 1, 2: 1}
    b_of = {0: 0, 1: 0, 2: 1}
    updates = {}
    for k in range(3):
        updates[(f"c{k}", "c", k)] = f"c{k}"
        updates[(f"c{k}", "a", a_of[k])] = f"c{k}"
        updates[(f"c{k}", "b", b_of[k])] = f"c{k}"
        updates[("mixed", "c", k)] = f"c{k}"
    updates[("mixed", "a", 0)] = "c0"
    updates[("mixed", "a", 1)] = {"c1": 0.5, "c2": 0.5}
    updates[("mixed", "b", 0)] = {"c0": 0.5, "c1": 0.5}
    updates[("mixed", "b", 1)] = "c2"
    if not honest:
        updates[("mixed", "a", 1)] = "c1"
        updates[("c2", "a", 1)] = "c1"
    return TableSystem(3, obs, states, updates, mixed="mixed")


def dephasing_mutant() -> HilbertSystem:
    """Two qubits where degenerate events dephase (targets P8)."""
    plus = np.array([1.0, 1.0]) / np.sqrt(2)
    psi = np.kron([1.0, 0.0], plus)
    obs = [("zi", kron(Z, I2)), ("iz", kron(I2, Z)), ("w", kron(Z, I2) + 3 * kron(I2, Z))]
    return _rebuild(_Dephasing, 4, obs, [pure_state(psi, "zero_plus")])


def bayes_without_cone() -> TableSystem:
    """Two bits read off a hidden pair, updated by Bayesian conditioning, in a
    registry too small to hold their joint refinement (targets P5)."""
    labels = ["00", "01", "10", "11"]
    states = {"mixed": {"a": [0.5, 0.5], "b": [0.5, 0.5]}}
    for lam in labels:
        states[lam] = {"a": [1.0 - int(lam[0]), float(lam[0])], "b": [1.0 - int(lam[1]), float(lam[1])]}
    updates = {}
    for lam in labels:
        updates[(lam, "a", int(lam[0]))] = lam
        updates[(lam, "b", int(lam[1]))] = lam
    for v in (0, 1):
        updates[("mixed", "a", v)] = {lam: 0.5 for lam in labels if int(lam[0]) == v}
        updates[("mixed", "b", v)] = {lam: 0.5 for lam in labels if int(lam[1]) == v}
    return TableSystem(2, {"a": [0.0, 1.0], "b": [0.0, 1.0]}, states, updates, mixed="mixed")


MUTANTS = {
    "broken_update": (broken_update_mutant, "P2"),
    "nonuniform_mixed": (nonuniform_mixed_mutant, "P3"),
    "signaling_table": (signaling_table, "P4"),
    "dephasing": (dephasing_mutant, "P8"),
    "bayes_without_cone": (bayes_without_cone, "P5"),
}
