"""Functional relations, cones, conjunctions and everything built from them:
the partial algebra of compatible observables, projections and their order,
spectral decompositions, expectations and traces.

All routines talk to the system only through P, T and the registry, except
``find_cone`` which uses simultaneous diagonalization when the backend is
the matrix one (and falls back to a registry search otherwise).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NotCompatible, NotProjection, NumericalFailure, UnknownObservable
from .hilbert import HermitianObservable, HilbertSystem
from .numkernel import EigenSystem, commute, hermitian_eigendecompose
from .system import OperationalSystem, probe_states, sequential_distribution


@dataclass(frozen=True)
class FunctionalArrow:
    domain: str
    codomain: str
    values: tuple          # f(alpha) for alpha in sigma(domain), in spectrum order
    index_map: tuple       # same, as indices into sigma(codomain)

    def as_dict(self, sys: OperationalSystem) -> dict:
        return dict(zip(sys.spectrum(self.domain), self.values))

    def __call__(self, value_index: int) -> float:
        return self.values[value_index]


@dataclass(frozen=True)
class Cone:
    apex: str
    arrows: tuple

    @property
    def legs(self) -> tuple:
        return tuple(a.codomain for a in self.arrows)


@dataclass(frozen=True)
class Conjunction:
    name: str
    left: FunctionalArrow      # conjunction -> A
    right: FunctionalArrow     # conjunction -> B
    pairing: dict              # (i, j) spectrum indices -> label
    cone: Cone


@dataclass(frozen=True)
class SpectralDecomposition:
    observable: str
    eigenvalues: tuple
    projections: tuple
    multiplicities: tuple
    residual: float


@dataclass(frozen=True)
class DensityDecomposition:
    weights: tuple
    projections: tuple       # pairwise orthogonal rank-1 projections


def _cache(sys, key):
    store = sys.__dict__.setdefault("_commutative_cache", {})
    return store, key


def _local_probes(sys, names, mixtures=8):
    return probe_states(sys, mixtures=mixtures, observables=list(names))


# ---------------------------------------------------------------------------
# functional relations
# ---------------------------------------------------------------------------

def find_functional_relation(sys: OperationalSystem, A: str, B: str, probes=None):
    """Arrow A -> B with B = f(A), or None.

    The candidate value f(alpha) is read off the distribution of B in the
    projective eigenstate of (alpha; A); it must be a point mass.  The
    candidate is then checked as a pushforward on probe states.
    """
    store, key = _cache(sys, ("arrow", A, B))
    if probes is None and key in store:
        return store[key]
    sa, sb = sys.spectrum(A), sys.spectrum(B)
    tol = sys.tol["equivalence"]
    if A == B:
        arrow = FunctionalArrow(A, B, tuple(sa), tuple(range(len(sa))))
        store[key] = arrow
        return arrow
    index_map = []
    for i in range(len(sa)):
        p = sys.probabilities(sys.eigenstate(A, i), B)
        j = int(np.argmax(p))
        if p[j] < 1.0 - 1e-9:
            return _remember(store, key, None, probes)
        index_map.append(j)
    if set(index_map) != set(range(len(sb))):
        return _remember(store, key, None, probes)
    states = probes if probes is not None else _local_probes(sys, [A, B])
    for st in states:
        pa = sys.probabilities(st, A)
        pb = sys.probabilities(st, B)
        push = np.zeros(len(sb))
        np.add.at(push, index_map, pa)
        if np.max(np.abs(push - pb)) > tol:
            return _remember(store, key, None, probes)
    arrow = FunctionalArrow(A, B, tuple(sb[j] for j in index_map), tuple(index_map))
    return _remember(store, key, arrow, probes)


def _remember(store, key, value, probes):
    if probes is None:
        store[key] = value
    return value


def apply_function(sys: OperationalSystem, A: str, f, label: str | None = None) -> str:
    return sys.apply_function(A, f, label)


def compose(first: FunctionalArrow, second: FunctionalArrow, sys: OperationalSystem) -> FunctionalArrow:
    if first.codomain != second.domain:
        raise ValueError("arrows do not compose")
    idx = tuple(second.index_map[j] for j in first.index_map)
    spec = sys.spectrum(second.codomain)
    return FunctionalArrow(first.domain, second.codomain, tuple(spec[j] for j in idx), idx)


# ---------------------------------------------------------------------------
# cones
# ---------------------------------------------------------------------------

def _joint_apex(mats: Sequence[np.ndarray]) -> EigenSystem:
    """Nondegenerate refinement sum_k k |v_k><v_k| of a commuting family."""
    n = mats[0].shape[0]
    blocks = [np.eye(n, dtype=complex)]
    for m in mats:
        eig = hermitian_eigendecompose(m)
        refined = []
        for p in blocks:
            for e in eig.projectors:
                q = p @ e
                q = 0.5 * (q + q.conj().T)
                if np.trace(q).real > 0.5:
                    refined.append(q)
        blocks = refined
    rank_one = []
    for p in blocks:
        w, v = np.linalg.eigh(p)
        for k in np.nonzero(w > 0.5)[0]:
            rank_one.append(np.outer(v[:, k], v[:, k].conj()))
    return EigenSystem(np.arange(float(len(rank_one))), tuple(rank_one), (1,) * len(rank_one))


def find_cone(sys: OperationalSystem, observables: Sequence[str]):
    """A nondegenerate common refinement of the family, or None."""
    names = list(dict.fromkeys(observables))
    if not names:
        raise ValueError("find_cone needs a nonempty family")
    for o in names:
        sys.observable(o)
    store, key = _cache(sys, ("cone", tuple(names)))
    if key in store:
        return store[key]
    cone = _find_cone(sys, names)
    store[key] = cone
    return cone


def _arrows_from(sys, apex, names):
    arrows = []
    for o in names:
        a = find_functional_relation(sys, apex, o)
        if a is None:
            return None
        arrows.append(a)
    return Cone(apex, tuple(arrows))


def _find_cone(sys, names):
    if isinstance(sys, HilbertSystem):
        mats = [sys.matrix(o) for o in names]
        for a, b in itertools.combinations(mats, 2):
            if not commute(a, b, sys.tol["commutator"]):
                return None
    for o in names:
        if sys.is_nondegenerate(o):
            cone = _arrows_from(sys, o, names)
            if cone is not None:
                return cone
    # registered nondegenerate observables before inventing a new apex
    for c in sys.observable_names():
        if c in names or not sys.is_nondegenerate(c):
            continue
        if isinstance(sys, HilbertSystem) and not all(
                commute(sys.matrix(c), m, sys.tol["commutator"]) for m in mats):
            continue
        cone = _arrows_from(sys, c, names)
        if cone is not None:
            return cone
    if isinstance(sys, HilbertSystem):
        eig = _joint_apex(mats)
        label = "apex(" + ",".join(names) + ")"
        obs = HermitianObservable(label, eig.reconstruct())
        obs._eig = eig
        apex_name = sys.register_observable(label, obs)
        cone = _arrows_from(sys, apex_name, names)
        if cone is None:
            raise NumericalFailure("joint apex does not refine the family")
        return cone
    for c in sys.observable_names():
        if sys.is_nondegenerate(c):
            continue
        cone = _arrows_from(sys, c, names)
        if cone is not None:
            return cone
    return None


def compatible(sys: OperationalSystem, A: str, B: str) -> bool:
    return find_cone(sys, [A, B]) is not None


def joint_pushforward_residual(sys: OperationalSystem, cone: Cone, states) -> float:
    """max over states and singleton boxes of
    |P(beta_1..beta_m; A_1..A_m) - p^C(f_1^-1(beta_1) ∩ ... )|."""
    worst = 0.0
    shape = tuple(len(sys.spectrum(a.codomain)) for a in cone.arrows)
    for st in states:
        seq = sequential_distribution(sys, st, list(cone.legs)).probabilities
        pc = sys.probabilities(st, cone.apex)
        push = np.zeros(shape)
        for g, p in enumerate(pc):
            push[tuple(a.index_map[g] for a in cone.arrows)] += p
        worst = max(worst, float(np.max(np.abs(seq - push))))
    return worst


# ---------------------------------------------------------------------------
# conjunctions
# ---------------------------------------------------------------------------

def conjunction(sys: OperationalSystem, A: str, B: str, pairing=None) -> Conjunction:
    """Binary product of compatible A and B.

    ``pairing`` maps (alpha, beta) to a real label and must be injective; the
    default enumerates sigma(A) x sigma(B) lexicographically as 0, 1, 2, ...
    """
    cone = find_cone(sys, [A, B])
    if cone is None:
        raise NotCompatible(f"{A} and {B} are not compatible")
    f, g = (cone.arrows[0], cone.arrows[1]) if A != B else (cone.arrows[0], cone.arrows[0])
    sa, sb = sys.spectrum(A), sys.spectrum(B)
    if pairing is None:
        table = {(i, j): float(i * len(sb) + j) for i in range(len(sa)) for j in range(len(sb))}
    else:
        table = {}
        for i, a in enumerate(sa):
            for j, b in enumerate(sb):
                table[(i, j)] = float(pairing(a, b) if callable(pairing) else pairing[(a, b)])
        if len(set(table.values())) != len(table):
            raise ValueError("pairing is not injective")
    values = [table[(f.index_map[k], g.index_map[k])] for k in range(len(sys.spectrum(cone.apex)))]
    name = sys.apply_function(cone.apex, values, label=f"[{A},{B}]")
    spec = sys.spectrum(name)
    inverse = {v: ij for ij, v in table.items()}
    left_idx, right_idx = [], []
    for lab in spec:
        hit = min(inverse, key=lambda v: abs(v - lab))
        i, j = inverse[hit]
        left_idx.append(i)
        right_idx.append(j)
    left = FunctionalArrow(name, A, tuple(sa[i] for i in left_idx), tuple(left_idx))
    right = FunctionalArrow(name, B, tuple(sb[j] for j in right_idx), tuple(right_idx))
    return Conjunction(name, left, right, table, cone)


def universal_property_check(sys: OperationalSystem, conj: Conjunction, samples: int = 8,
                             seed: int = 0) -> list:
    """Sample cones (D, f', g') over A and B and check that the mediating
    arrow D -> conjunction exists, commutes with both projections and is the
    only candidate.  Returns one (ok, description) pair per sampled cone."""
    rng = np.random.default_rng(seed)
    apex = conj.cone.apex
    f, g = conj.cone.arrows[0], conj.cone.arrows[-1]
    A, B = conj.left.codomain, conj.right.codomain
    m = len(sys.spectrum(apex))
    results = []
    for k in range(samples):
        if k == 0:
            d_name = apex
        else:
            extra = rng.integers(0, 1 + k % 3, size=m)
            keys = [(f.index_map[c], g.index_map[c], int(extra[c])) for c in range(m)]
            distinct = sorted(set(keys))
            relabel = rng.permutation(len(distinct)) * 1.0 + rng.uniform(-0.25, 0.25)
            values = [float(relabel[distinct.index(key)]) for key in keys]
            d_name = sys.apply_function(apex, values, label="cone")
        fa = find_functional_relation(sys, d_name, A)
        gb = find_functional_relation(sys, d_name, B)
        u = find_functional_relation(sys, d_name, conj.name)
        if fa is None or gb is None or u is None:
            results.append((False, f"{d_name}: missing arrow"))
            continue
        ok_left = compose(u, conj.left, sys).index_map == fa.index_map
        ok_right = compose(u, conj.right, sys).index_map == gb.index_map
        # the mediating arrow is forced by the pairing
        spec = sys.spectrum(conj.name)
        forced = tuple(spec.index(conj.pairing[(fa.index_map[d], gb.index_map[d])])
                       for d in range(len(sys.spectrum(d_name))))
        results.append((ok_left and ok_right and forced == u.index_map, d_name))
    return results


# ---------------------------------------------------------------------------
# algebra
# ---------------------------------------------------------------------------

def algebra_op(sys: OperationalSystem, op: str, *args, cone: Cone | None = None) -> str:
    """``add``/``mul`` of compatible observables, or ``scale`` (c, A)."""
    if op == "scale":
        c, A = args
        return sys.apply_function(A, lambda a: c * a)
    if op not in ("add", "mul"):
        raise ValueError(f"unknown algebra op {op!r}")
    names = list(args)
    if cone is None:
        cone = find_cone(sys, names)
    if cone is None:
        raise NotCompatible(f"{', '.join(names)} are not compatible")
    by_leg = {a.codomain: a for a in cone.arrows}
    m = len(sys.spectrum(cone.apex))
    values = []
    for k in range(m):
        parts = [by_leg[o].values[k] for o in names]
        values.append(float(np.sum(parts)) if op == "add" else float(np.prod(parts)))
    return sys.apply_function(cone.apex, values)


def unit(sys: OperationalSystem) -> str:
    return sys.apply_function(sys.declared_observables[0], lambda a: 1.0, label="unit")


def zero(sys: OperationalSystem) -> str:
    return sys.apply_function(sys.declared_observables[0], lambda a: 0.0, label="zero")


# ---------------------------------------------------------------------------
# projections
# ---------------------------------------------------------------------------

def is_projection(sys: OperationalSystem, E: str) -> bool:
    return all(min(abs(v), abs(v - 1.0)) <= 1e-9 for v in sys.spectrum(E))


def _require_projection(sys, *names):
    for e in names:
        if not is_projection(sys, e):
            raise NotProjection(f"{e} has spectrum outside {{0, 1}}")


def projection_expectation(sys: OperationalSystem, state, E: str) -> float:
    """<E>_rho = probability of the value 1."""
    spec = sys.spectrum(E)
    p = sys.probabilities(state, E)
    return float(sum(pi for v, pi in zip(spec, p) if abs(v - 1.0) <= 1e-9))


def orthocomplement(sys: OperationalSystem, E: str) -> str:
    _require_projection(sys, E)
    return sys.apply_function(E, lambda a: 1.0 - a, label=f"perp({E})")


def projection_leq(sys: OperationalSystem, E: str, F: str, probes=None) -> bool:
    """E <= F, decided algebraically (E F = E) and through states; the two
    routes must agree."""
    _require_projection(sys, E, F)
    cone = find_cone(sys, [E, F])
    algebraic = cone is not None and algebra_op(sys, "mul", E, F, cone=cone) == E
    states = probes if probes is not None else _local_probes(sys, [E, F])
    tol = sys.tol["equivalence"]
    by_states = all(projection_expectation(sys, s, E) <= projection_expectation(sys, s, F) + tol
                    for s in states)
    if algebraic != by_states:
        raise NumericalFailure(f"order of {E} and {F}: algebraic {algebraic} vs states {by_states}")
    return algebraic


def orthogonal(sys: OperationalSystem, E: str, F: str, probes=None) -> bool:
    _require_projection(sys, E, F)
    cone = find_cone(sys, [E, F])
    algebraic = False
    if cone is not None:
        prod = algebra_op(sys, "mul", E, F, cone=cone)
        algebraic = all(abs(v) <= 1e-9 for v in sys.spectrum(prod))
    states = probes if probes is not None else _local_probes(sys, [E, F])
    tol = sys.tol["equivalence"]
    by_states = all(projection_expectation(sys, s, E) + projection_expectation(sys, s, F) <= 1.0 + tol
                    for s in states)
    routes = [algebraic, by_states]
    if round(trace(sys, E)) == 1 and round(trace(sys, F)) == 1:
        routes.append(transition_probability(sys, E, F) <= tol)
    if len(set(routes)) != 1:
        raise NumericalFailure(f"orthogonality of {E} and {F}: routes disagree {routes}")
    return algebraic


def transition_probability(sys: OperationalSystem, E: str, F: str) -> float:
    """<F> in the projective state of E."""
    return projection_expectation(sys, projective_state(sys, E), F)


def projective_state(sys: OperationalSystem, E: str):
    spec = sys.spectrum(E)
    return sys.eigenstate(E, spec.index(1.0))


def meet(sys: OperationalSystem, E: str, F: str) -> str:
    return algebra_op(sys, "mul", E, F)


def join(sys: OperationalSystem, E: str, F: str) -> str:
    cone = find_cone(sys, [E, F])
    if cone is None:
        raise NotCompatible(f"{E} and {F} are not compatible")
    f, g = cone.arrows
    values = [a + b - a * b for a, b in zip(f.values, g.values)]
    return sys.apply_function(cone.apex, values)


# ---------------------------------------------------------------------------
# spectral theory, expectations, traces
# ---------------------------------------------------------------------------

def spectral_decomposition(sys: OperationalSystem, A: str, probes=None) -> SpectralDecomposition:
    spec = sys.spectrum(A)
    projections = tuple(sys.indicator(A, [a]) for a in spec)
    states = probes if probes is not None else _local_probes(sys, [A], mixtures=4)
    residual = 0.0
    for st in states:
        pe = np.array([projection_expectation(sys, st, e) for e in projections])
        pa = sys.probabilities(st, A)
        residual = max(residual, float(np.max(np.abs(pe - pa))), abs(float(pe.sum()) - 1.0))
    mults = tuple(int(round(trace(sys, e))) for e in projections)
    return SpectralDecomposition(A, tuple(spec), projections, mults, residual)


def expectation(sys: OperationalSystem, state, A: str) -> float:
    """sum_alpha alpha <E_alpha>_rho with E_alpha the spectral projections."""
    spec = sys.spectrum(A)
    if is_projection(sys, A):
        return projection_expectation(sys, state, A)
    total = 0.0
    for a in spec:
        total += a * projection_expectation(sys, state, sys.indicator(A, [a]))
    return total


def trace(sys: OperationalSystem, A: str) -> float:
    return sys.dimension * expectation(sys, sys.mixed_state, A)


def rank_one_split(sys: OperationalSystem, E: str) -> list:
    """Pairwise orthogonal rank-1 projections summing to E."""
    _require_projection(sys, E)
    if isinstance(sys, HilbertSystem):
        w, v = np.linalg.eigh(sys.matrix(E))
        out = []
        for k in np.nonzero(w > 0.5)[0]:
            p = np.outer(v[:, k], v[:, k].conj())
            out.append(sys.register_observable(f"rank1#{len(sys.observable_names())}",
                                               HermitianObservable("", p)))
        return out
    for c in sys.observable_names():
        if not sys.is_nondegenerate(c):
            continue
        arrow = find_functional_relation(sys, c, E)
        if arrow is None:
            continue
        spec = sys.spectrum(c)
        return [sys.indicator(c, [spec[k]]) for k, v in enumerate(arrow.values) if abs(v - 1.0) <= 1e-9]
    raise NotCompatible(f"no nondegenerate observable refines {E}")


def is_density_operator(sys: OperationalSystem, A: str, decompose: bool = True):
    """(True, DensityDecomposition) when A is positive with unit trace."""
    spec = sys.spectrum(A)
    if min(spec) < -1e-10 or abs(trace(sys, A) - 1.0) > 1e-9:
        return False, None
    if not decompose:
        return True, None
    weights, parts = [], []
    for a in spec:
        e = sys.indicator(A, [a])
        for r in rank_one_split(sys, e):
            weights.append(max(float(a), 0.0))
            parts.append(r)
    return True, DensityDecomposition(tuple(weights), tuple(parts))
