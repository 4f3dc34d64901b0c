"""Finite table-driven systems.

States are convex weights over a finite set of base labels, probabilities are
linear in the weights, and updates are read from a lookup table keyed by
(base label, observable, outcome index).  Used for devices that are not
quantum, including the deliberately broken ones the auditor must catch.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import SchemaError
from .system import MIXED, NULL, OperationalSystem, SpectrumSet, coarse_spectrum


@dataclass(frozen=True)
class TableState:
    weights: tuple   # ((label, weight), ...) sorted by label

    @classmethod
    def of(cls, mapping: Mapping) -> "TableState":
        return cls(tuple(sorted((str(k), float(v)) for k, v in mapping.items() if v > 0)))

    def as_dict(self) -> dict:
        return dict(self.weights)


@dataclass(frozen=True)
class TableObservable:
    spectrum: SpectrumSet
    base: str | None = None
    image: tuple = ()      # base spectrum index -> own spectrum index
    name: str = ""         # primitive observables only


class TableSystem(OperationalSystem):
    def __init__(self, n: int, observables: Mapping, base_states: Mapping, updates: Mapping,
                 mixed: str = MIXED, pure: Sequence[str] | None = None, tolerances=None):
        super().__init__(n, tolerances)
        self._base_probs = {}
        for label, table in base_states.items():
            self._base_probs[str(label)] = {o: np.asarray(p, dtype=float) for o, p in table.items()}
        if mixed not in self._base_probs:
            raise SchemaError("completely mixed base state missing", "completely_mixed")
        for name, spec in observables.items():
            spec = SpectrumSet(spec)
            self._observables[name] = TableObservable(spec, name=name)
            for label, table in self._base_probs.items():
                if name not in table or len(table[name]) != len(spec):
                    raise SchemaError(f"state {label!r} lacks a distribution for {name!r}", "states")
        self._updates = {}
        for (label, name, idx), target in updates.items():
            if isinstance(target, str):
                target = {target: 1.0}
            self._updates[(str(label), name, int(idx))] = TableState.of(target)
        for label, table in self._base_probs.items():
            for name in observables:
                for i, p in enumerate(table[name]):
                    if p > self.tol["zero_probability"] and (label, name, i) not in self._updates:
                        raise SchemaError(f"no update for state {label!r}, observable {name!r}, outcome {i}",
                                          "updates")
        self.mixed_label = mixed
        self.pure_labels = frozenset(pure if pure is not None else
                                     [lbl for lbl in self._base_probs if lbl != mixed])
        self._states[MIXED] = TableState.of({mixed: 1.0})
        self._states[NULL] = TableState(())
        for label in self._base_probs:
            if label != mixed:
                self._states[label] = TableState.of({label: 1.0})
        self.declared_observables = tuple(observables)
        self.declared_states = tuple(lbl for lbl in self._base_probs if lbl != mixed)

    @property
    def base_labels(self) -> list:
        return list(self._base_probs)

    # hooks
    def _spectrum(self, obs):
        return obs.spectrum

    def _probabilities(self, state, obs):
        if obs.base is None:
            return sum(w * self._base_probs[lbl][obs.name] for lbl, w in state.weights)
        p_base = self._probabilities(state, self._observables[obs.base])
        out = np.zeros(len(obs.spectrum))
        np.add.at(out, list(obs.image), p_base)
        return out

    def _objective_update(self, state, name, index):
        obs = self.observable(name)
        if obs.base is not None:
            pre = [i for i, j in enumerate(obs.image) if j == index]
            return self.subjective_update(state, obs.base, pre)
        zero = self.tol["zero_probability"]
        weights, parts = [], []
        for lbl, w in state.weights:
            p = self._base_probs[lbl][name][index]
            if w * p > zero:
                weights.append(w * p)
                parts.append(self._updates[(lbl, name, index)])
        total = sum(weights)
        return self.mix([w / total for w in weights], parts)

    def mix(self, weights, states):
        acc = {}
        for w, s in zip(weights, states):
            for lbl, x in self.state(s).weights:
                acc[lbl] = acc.get(lbl, 0.0) + float(w) * x
        return TableState.of(acc)

    def is_null(self, state):
        return not self.state(state).weights

    def is_pure(self, state):
        ws = self.state(state).weights
        return len(ws) == 1 and ws[0][0] in self.pure_labels and abs(ws[0][1] - 1.0) <= 1e-12

    def _function_observable(self, name, values):
        obs = self.observable(name)
        if obs.base is not None:
            # f(g(A)) is rebuilt as (f o g)(A) on the primitive A
            values = [values[j] for j in obs.image]
            name = obs.base
        spec, image = coarse_spectrum(values, self.tol["cluster_abs"], self.tol["cluster_rel"])
        return TableObservable(spec, name, tuple(image))

    def _same_observable(self, a, b):
        if len(a.spectrum) != len(b.spectrum):
            return False
        if np.max(np.abs(np.array(a.spectrum.values) - np.array(b.spectrum.values))) > 1e-9:
            return False
        for lbl in self._base_probs:
            st = TableState.of({lbl: 1.0})
            if np.max(np.abs(self._probabilities(st, a) - self._probabilities(st, b))) > self.tol["equivalence"]:
                return False
        return True

    def _observable_key(self, obs):
        return None

    def states_equal(self, s1, s2, tol=None):
        tol = self.tol["equivalence"] if tol is None else tol
        for name, obs in self._observables.items():
            if obs.base is not None:
                continue
            if np.max(np.abs(self.probabilities(s1, name) - self.probabilities(s2, name))) > tol:
                return False
        return True
