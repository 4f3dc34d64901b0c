"""Backend-independent operational systems and the event calculus.

A system is a registry of observables and states together with two
callbacks: the outcome distribution of an observable in a state and the
state update after an objective event.  Subjective updates, sequential
measures and statistical equivalence are built generically on top.
"""
from __future__ import annotations

import itertools
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .config import DEFAULT_PROBE_MIXTURES, DEFAULT_TOLERANCES
from .errors import EmptyProbeSet, PartialFunction, UnknownObservable, UnknownState
from .numkernel import cluster_values, value_index

MIXED = "mixed"
NULL = "null"


@dataclass(frozen=True)
class SpectrumSet:
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def index(self, value: float, tol: float = 1e-9) -> int:
        return value_index(self.values, value, tol)


@dataclass(frozen=True)
class EventSpec:
    """Outcome of ``observable`` lies in ``subset``."""

    observable: str
    subset: tuple

    def __post_init__(self):
        object.__setattr__(self, "subset", tuple(sorted(float(v) for v in self.subset)))

    @property
    def is_objective(self) -> bool:
        return len(self.subset) == 1

    def indices(self, sys: "OperationalSystem") -> tuple:
        spec = sys.spectrum(self.observable)
        try:
            return tuple(sorted({spec.index(v) for v in self.subset}))
        except KeyError as exc:
            raise ValueError(f"event value {exc.args[0]} not in spectrum of {self.observable}") from None


@dataclass(frozen=True)
class SequentialEvent:
    steps: tuple

    def __post_init__(self):
        if not self.steps:
            raise ValueError("a sequential event needs at least one step")
        object.__setattr__(self, "steps", tuple(self.steps))


@dataclass
class DistributionTable:
    """Probabilities over a product of spectra, stored as a dense array."""

    support: tuple                       # one SpectrumSet per axis
    probabilities: np.ndarray
    labels: tuple = field(default=())    # observable names, optional

    @property
    def total(self) -> float:
        return float(self.probabilities.sum())

    def prob(self, *values) -> float:
        idx = tuple(s.index(v) for s, v in zip(self.support, values))
        return float(self.probabilities[idx])

    def marginal(self, axes: Sequence[int]) -> "DistributionTable":
        axes = list(axes)
        drop = tuple(i for i in range(len(self.support)) if i not in axes)
        p = self.probabilities.sum(axis=drop) if drop else self.probabilities
        # sum keeps remaining axes in original order; reorder to requested
        kept = [i for i in range(len(self.support)) if i in axes]
        p = np.moveaxis(p, [kept.index(a) for a in axes], list(range(len(axes))))
        labels = tuple(self.labels[a] for a in axes) if self.labels else ()
        return DistributionTable(tuple(self.support[a] for a in axes), p, labels)

    def items(self):
        for idx in itertools.product(*(range(len(s)) for s in self.support)):
            yield tuple(s[i] for s, i in zip(self.support, idx)), float(self.probabilities[idx])

    def as_dict(self) -> dict:
        return {vals if len(vals) > 1 else vals[0]: p for vals, p in self.items()}


class OperationalSystem(ABC):
    """Registry of observables and states with P and T callbacks.

    Observables are addressed by name.  States are backend objects; most
    operations also accept a registered state name.
    """

    def __init__(self, dimension: int, tolerances: Mapping | None = None):
        self.dimension = int(dimension)
        self.tol = dict(DEFAULT_TOLERANCES)
        if tolerances:
            self.tol.update(tolerances)
        self._observables: dict = {}
        self._states: dict = {}
        self._fn_counter = 0
        self.declared_observables: tuple = ()
        self.declared_states: tuple = ()

    # backend hooks -------------------------------------------------------
    @abstractmethod
    def _spectrum(self, obs) -> SpectrumSet: ...

    @abstractmethod
    def _probabilities(self, state, obs) -> np.ndarray: ...

    @abstractmethod
    def _objective_update(self, state, name: str, index: int): ...

    @abstractmethod
    def mix(self, weights: Sequence[float], states: Sequence): ...

    @abstractmethod
    def is_null(self, state) -> bool: ...

    @abstractmethod
    def is_pure(self, state) -> bool: ...

    @abstractmethod
    def _function_observable(self, name: str, values: Sequence[float]):
        """Backend object realizing f(A) from f's values on sigma(A)."""

    @abstractmethod
    def _same_observable(self, a, b) -> bool: ...

    def _observable_key(self, obs):
        """Cheap invariant used to skip obviously different observables."""
        return None

    # registry ------------------------------------------------------------
    def observable_names(self) -> list:
        return list(self._observables)

    def has_observable(self, name: str) -> bool:
        return name in self._observables

    def observable(self, name: str):
        try:
            return self._observables[name]
        except (KeyError, TypeError):
            raise UnknownObservable(name) from None

    def spectrum(self, name: str) -> SpectrumSet:
        return self._spectrum(self.observable(name))

    def is_nondegenerate(self, name: str) -> bool:
        return len(self.spectrum(name)) == self.dimension

    def state_names(self) -> list:
        return list(self._states)

    def state(self, ref):
        if isinstance(ref, str):
            try:
                return self._states[ref]
            except KeyError:
                raise UnknownState(ref) from None
        if ref is None:
            raise UnknownState(ref)
        return ref

    @property
    def mixed_state(self):
        return self._states[MIXED]

    @property
    def null_state(self):
        return self._states[NULL]

    def register_observable(self, name: str, obs, dedup: bool = True) -> str:
        if dedup:
            existing = self.find_observable(obs)
            if existing is not None:
                return existing
        if name in self._observables:
            raise ValueError(f"duplicate observable name {name!r}")
        self._observables[name] = obs
        return name

    def register_state(self, name: str, state) -> str:
        if name in self._states:
            raise ValueError(f"duplicate state name {name!r}")
        self._states[name] = state
        return name

    def find_observable(self, obs):
        key = self._observable_key(obs)
        for name, other in self._observables.items():
            if key is not None and not _keys_close(key, self._observable_key(other)):
                continue
            if self._same_observable(obs, other):
                return name
        return None

    # P and T -------------------------------------------------------------
    def probabilities(self, state, name: str) -> np.ndarray:
        obs = self.observable(name)
        st = self.state(state)
        if self.is_null(st):
            return np.zeros(len(self._spectrum(obs)))
        return self._probabilities(st, obs)

    def objective_update(self, state, name: str, index: int):
        st = self.state(state)
        self.observable(name)
        if self.is_null(st):
            return st
        p = self.probabilities(st, name)[index]
        if p <= self.tol["zero_probability"]:
            return self.null_state
        return self._objective_update(st, name, index)

    def subjective_update(self, state, name: str, indices: Sequence[int]):
        """Convex combination of objective updates weighted by P(alpha | Delta)."""
        st = self.state(state)
        if self.is_null(st):
            return st
        p = self.probabilities(st, name)
        idx = [i for i in indices if p[i] > self.tol["zero_probability"]]
        total = float(sum(p[i] for i in idx))
        if total <= self.tol["zero_probability"]:
            return self.null_state
        if len(idx) == 1:
            return self._objective_update(st, name, idx[0])
        weights = [p[i] / total for i in idx]
        return self.mix(weights, [self._objective_update(st, name, i) for i in idx])

    def update(self, state, name: str, indices):
        if isinstance(indices, (int, np.integer)):
            indices = (int(indices),)
        indices = tuple(sorted(set(int(i) for i in indices)))
        if len(indices) == 1:
            return self.objective_update(state, name, indices[0])
        return self.subjective_update(state, name, indices)

    def eigenstate(self, name: str, index: int):
        """Projective eigenstate: the completely mixed state after (alpha; A)."""
        return self.objective_update(self.mixed_state, name, index)

    def states_equal(self, s1, s2, tol: float | None = None) -> bool:
        tol = self.tol["equivalence"] if tol is None else tol
        for name in self._observables:
            if np.max(np.abs(self.probabilities(s1, name) - self.probabilities(s2, name))) > tol:
                return False
        return True

    # functions of observables -------------------------------------------
    def apply_function(self, name: str, f, label: str | None = None) -> str:
        """Register f(A) and return its name; equal observables are reused."""
        spec = self.spectrum(name)
        values = function_values(spec, f)
        obs = self._function_observable(name, values)
        existing = self.find_observable(obs)
        if existing is not None:
            return existing
        if label is None:
            self._fn_counter += 1
            label = f"f#{self._fn_counter}({name})"
        elif label in self._observables:
            self._fn_counter += 1
            label = f"{label}#{self._fn_counter}"
        self._observables[label] = obs
        return label

    def indicator(self, name: str, values: Iterable[float]) -> str:
        """Projection chi_Delta(A)."""
        spec = self.spectrum(name)
        chosen = {spec.index(v) for v in values}
        table = {a: (1.0 if i in chosen else 0.0) for i, a in enumerate(spec)}
        shown = ",".join(f"{spec[i]:g}" for i in sorted(chosen))
        return self.apply_function(name, table, label=f"chi[{shown}]({name})")


def _keys_close(a, b, tol=1e-6) -> bool:
    if b is None:
        return True
    return all(abs(x - y) <= tol * (1.0 + abs(x)) for x, y in zip(a, b))


def function_values(spec: SpectrumSet, f) -> list:
    """Values of f on every spectrum point; raises PartialFunction if missing."""
    if callable(f):
        return [float(f(a)) for a in spec]
    if isinstance(f, Mapping):
        keys = list(f.keys())
        out = []
        for a in spec:
            hit = [k for k in keys if abs(float(k) - a) <= 1e-9 * (1.0 + abs(a))]
            if not hit:
                raise PartialFunction(f"function undefined at spectrum point {a}")
            out.append(float(f[hit[0]]))
        return out
    vals = [float(v) for v in f]
    if len(vals) != len(spec):
        raise PartialFunction("value list does not match the spectrum size")
    return vals


def coarse_spectrum(values: Sequence[float], tol_abs: float, tol_rel: float):
    """Clustered image of a value list: (spectrum, index map into it)."""
    clusters = cluster_values(values, tol_abs, tol_rel)
    image = [0] * len(values)
    for k, (_, members) in enumerate(clusters):
        for m in members:
            image[m] = k
    return SpectrumSet([c[0] for c in clusters]), image


# ---------------------------------------------------------------------------
# generic operations
# ---------------------------------------------------------------------------

def outcome_distribution(sys: OperationalSystem, state, observable: str) -> DistributionTable:
    p = sys.probabilities(state, observable)
    return DistributionTable((sys.spectrum(observable),), np.asarray(p, dtype=float), (observable,))


def normalize_event(sys: OperationalSystem, event) -> EventSpec:
    """Accept EventSpec, (observable, subset) or a measurement event.

    A measurement event ``(subset, B, A)`` with B = f(A) is rewritten as the
    observable event (f^-1(subset); A).
    """
    if isinstance(event, EventSpec):
        ev = event
    elif len(event) == 3:
        subset, coarse, fine = event
        from .commutative import find_functional_relation  # local: avoids a cycle
        arrow = find_functional_relation(sys, fine, coarse)
        if arrow is None:
            raise ValueError(f"{coarse} is not a function of {fine}")
        want = {sys.spectrum(coarse).index(v) for v in subset}
        cod = sys.spectrum(coarse)
        pre = [a for a, b in zip(sys.spectrum(fine), arrow.values) if cod.index(b) in want]
        ev = EventSpec(fine, pre)
    else:
        ev = EventSpec(event[0], event[1])
    sys.observable(ev.observable)
    if not ev.subset:
        raise ValueError("event subset must be nonempty")
    ev.indices(sys)
    return ev


def event_probability(sys: OperationalSystem, state, event) -> float:
    ev = normalize_event(sys, event)
    p = sys.probabilities(state, ev.observable)
    return float(sum(p[i] for i in ev.indices(sys)))


def update_state(sys: OperationalSystem, state, event):
    ev = normalize_event(sys, event)
    return sys.update(state, ev.observable, ev.indices(sys))


def sequential_distribution(sys: OperationalSystem, state, observables: Sequence[str]) -> DistributionTable:
    """Joint table of outcomes of measuring ``observables`` in order."""
    if not observables:
        raise ValueError("need at least one observable")
    spectra = tuple(sys.spectrum(o) for o in observables)
    out = np.zeros(tuple(len(s) for s in spectra))
    zero = sys.tol["zero_probability"]

    def walk(st, depth, prefix, weight):
        p = sys.probabilities(st, observables[depth])
        for i, pi in enumerate(p):
            if pi <= zero:
                continue
            w = weight * pi
            if depth == len(observables) - 1:
                out[prefix + (i,)] = w
            else:
                walk(sys.objective_update(st, observables[depth], i), depth + 1, prefix + (i,), w)

    walk(sys.state(state), 0, (), 1.0)
    return DistributionTable(spectra, out, tuple(observables))


def sequential_probability(sys: OperationalSystem, state, events: Sequence) -> float:
    """P(A_1^D_1, ..., A_m^D_m) via chained subjective updates."""
    st = sys.state(state)
    prob = 1.0
    for event in events:
        ev = normalize_event(sys, event)
        p = event_probability(sys, st, ev)
        if p <= sys.tol["zero_probability"]:
            return 0.0
        prob *= p
        st = sys.update(st, ev.observable, ev.indices(sys))
    return prob


def conditional_probability(sys: OperationalSystem, state, event, given) -> float:
    """P(event | given): probability of ``event`` after updating by ``given``."""
    g = normalize_event(sys, given)
    if event_probability(sys, state, g) <= sys.tol["zero_probability"]:
        return 0.0
    return event_probability(sys, update_state(sys, state, g), event)


def statistically_equivalent(sys: OperationalSystem, e1, e2, probe_states, tol: float | None = None) -> bool:
    return equivalence_witness(sys, e1, e2, probe_states, tol) is None


def equivalence_witness(sys, e1, e2, probe_states, tol=None):
    """First probe state separating the two events, or None."""
    probes = list(probe_states)
    if not probes:
        raise EmptyProbeSet("statistical equivalence needs at least one probe state")
    tol = sys.tol["equivalence"] if tol is None else tol
    for st in probes:
        if abs(event_probability(sys, st, e1) - event_probability(sys, st, e2)) > tol:
            return st
    return None


def probe_states(sys: OperationalSystem, mixtures: int = DEFAULT_PROBE_MIXTURES, seed: int = 0,
                 observables: Sequence[str] | None = None, eigenstates: bool = True) -> list:
    """Finite probe set: the mixed state, declared states, projective
    eigenstates of ``observables`` (default: declared ones) and random mixtures."""
    base = [sys.mixed_state]
    for name in sys.state_names():
        if name in (MIXED, NULL):
            continue
        base.append(sys.state(name))
    if eigenstates:
        names = sys.declared_observables if observables is None else observables
        for o in names:
            for i in range(len(sys.spectrum(o))):
                base.append(sys.eigenstate(o, i))
    base = [s for s in base if not sys.is_null(s)]
    rng = np.random.default_rng(seed)
    mixed = []
    for _ in range(mixtures if len(base) > 1 else 0):
        k = int(rng.integers(2, min(4, len(base)) + 1))
        pick = rng.choice(len(base), size=k, replace=False)
        w = rng.dirichlet(np.ones(k))
        mixed.append(sys.mix(list(w), [base[i] for i in pick]))
    return base + mixed
