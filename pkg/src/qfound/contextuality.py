"""Behaviors of states on scenarios and the classical tests applied to them.

Three questions are asked of a behavior: whether shared observables keep
their marginals across contexts, whether one global distribution explains
every context table (a linear feasibility problem solved here by a dense
phase-one simplex), and whether exclusive event families stay below one.
Independently, ``valuation_search`` looks for a value assignment that
respects every functional relation of a finite problem.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .commutative import FunctionalArrow, compatible, compose, conjunction, orthogonal, projection_expectation
from .config import DEFAULT_LP_CAP
from .errors import (IncompatibleContext, InconsistentArrows, MalformedFamily, NumericalFailure,
                     ProblemTooLarge)
from .system import DistributionTable, OperationalSystem, SpectrumSet, sequential_distribution


# ---------------------------------------------------------------------------
# scenarios and behaviors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    """Observables with their spectra and a list of contexts over them."""

    spectra: Mapping[str, SpectrumSet]
    contexts: tuple
    name: str = ""

    def __post_init__(self):
        spectra = {k: v if isinstance(v, SpectrumSet) else SpectrumSet(v) for k, v in self.spectra.items()}
        object.__setattr__(self, "spectra", spectra)
        ctxs = tuple(tuple(c) for c in self.contexts)
        if not ctxs:
            raise ValueError("a scenario needs at least one context")
        for c in ctxs:
            if not c:
                raise ValueError("contexts must be nonempty")
            if len(set(c)) != len(c):
                raise ValueError(f"context {c} repeats an observable")
            for o in c:
                if o not in spectra:
                    raise ValueError(f"context member {o!r} has no spectrum")
        object.__setattr__(self, "contexts", ctxs)

    @classmethod
    def from_system(cls, sys: OperationalSystem, contexts, name: str = "") -> "Scenario":
        names = dict.fromkeys(o for c in contexts for o in c)
        return cls({o: sys.spectrum(o) for o in names}, contexts, name)

    @property
    def observables(self) -> tuple:
        """Observables that occur in some context, in first-occurrence order."""
        return tuple(dict.fromkeys(o for c in self.contexts for o in c))

    def outcomes(self, k: int):
        return itertools.product(*(self.spectra[o] for o in self.contexts[k]))


@dataclass
class Behavior:
    scenario: Scenario
    tables: tuple                         # DistributionTable per context
    permutation_residual: float = 0.0

    def __post_init__(self):
        self.tables = tuple(self.tables)
        if len(self.tables) != len(self.scenario.contexts):
            raise ValueError("one table per context is required")
        for ctx, t in zip(self.scenario.contexts, self.tables):
            shape = tuple(len(self.scenario.spectra[o]) for o in ctx)
            if t.probabilities.shape != shape:
                raise ValueError(f"table for {ctx} has shape {t.probabilities.shape}, expected {shape}")
            if np.any(t.probabilities < -1e-12):
                raise ValueError(f"table for {ctx} has negative entries")
            if abs(t.total - 1.0) > 1e-12:
                raise ValueError(f"table for {ctx} sums to {t.total}")

    @classmethod
    def from_arrays(cls, scenario: Scenario, arrays: Sequence) -> "Behavior":
        tables = []
        for ctx, arr in zip(scenario.contexts, arrays):
            tables.append(DistributionTable(tuple(scenario.spectra[o] for o in ctx),
                                            np.asarray(arr, dtype=float), ctx))
        return cls(scenario, tables)

    def table(self, context) -> DistributionTable:
        if not isinstance(context, int):
            context = self.scenario.contexts.index(tuple(context))
        return self.tables[context]

    def prob(self, k: int, outcome: Sequence[float]) -> float:
        return self.tables[k].prob(*outcome)


def behavior_from_system(sys: OperationalSystem, state, scenario: Scenario,
                         tol: float = 1e-10) -> Behavior:
    """Tables of sequential measurements along each context.

    Every ordering of each context is measured and must agree with the
    declared order within ``tol``; otherwise the context is rejected.
    """
    tables = []
    worst = 0.0
    for ctx in scenario.contexts:
        for a, b in itertools.combinations(ctx, 2):
            if not compatible(sys, a, b):
                raise IncompatibleContext(f"{a} and {b} are not compatible")
        t = sequential_distribution(sys, state, list(ctx))
        for perm in itertools.permutations(range(len(ctx))):
            if perm == tuple(range(len(ctx))):
                continue
            other = sequential_distribution(sys, state, [ctx[i] for i in perm]).probabilities
            back = np.transpose(other, np.argsort(perm))
            worst = max(worst, float(np.max(np.abs(back - t.probabilities))))
        if worst > tol:
            raise IncompatibleContext(f"statistics of {ctx} depend on measurement order ({worst:.3e})")
        tables.append(t)
    return Behavior(scenario, tables, worst)


def deterministic_behavior(scenario: Scenario, assignment: Mapping[str, float]) -> Behavior:
    """Point-mass tables induced by one global value assignment."""
    arrays = []
    for ctx in scenario.contexts:
        arr = np.zeros(tuple(len(scenario.spectra[o]) for o in ctx))
        arr[tuple(scenario.spectra[o].index(assignment[o]) for o in ctx)] = 1.0
        arrays.append(arr)
    return Behavior.from_arrays(scenario, arrays)


def pr_box() -> Behavior:
    """p(a, b | x, y) = 1/2 when a xor b = x*y, on bits."""
    sc = Scenario({o: (0.0, 1.0) for o in ("a0", "a1", "b0", "b1")},
                  [(f"a{x}", f"b{y}") for x in (0, 1) for y in (0, 1)], "pr")
    arrays = []
    for x in (0, 1):
        for y in (0, 1):
            arrays.append([[0.5 if (a ^ b) == x * y else 0.0 for b in (0, 1)] for a in (0, 1)])
    return Behavior.from_arrays(sc, arrays)


def correlator(table: DistributionTable) -> float:
    """E[product of outcomes] for a context table."""
    return float(sum(np.prod(vals) * p for vals, p in table.items()))


def chsh_value(b: Behavior, signs=(1, 1, 1, -1)) -> float:
    return float(sum(s * correlator(t) for s, t in zip(signs, b.tables)))


# ---------------------------------------------------------------------------
# nondisturbance
# ---------------------------------------------------------------------------

@dataclass
class NondisturbanceReport:
    passed: bool
    discrepancy: float
    witness: tuple | None      # (observable, context_i, context_j)
    tol: float


def nondisturbance_check(b: Behavior, tol: float = 1e-10) -> NondisturbanceReport:
    ctxs = b.scenario.contexts
    marginals: dict = {}
    for k, ctx in enumerate(ctxs):
        for pos, o in enumerate(ctx):
            marginals.setdefault(o, []).append((k, b.tables[k].marginal([pos]).probabilities))
    worst, witness = 0.0, None
    for o, rows in marginals.items():
        for (i, p), (j, q) in itertools.combinations(rows, 2):
            d = float(np.max(np.abs(p - q)))
            if d > worst:
                worst, witness = d, (o, ctxs[i], ctxs[j])
    return NondisturbanceReport(worst <= tol, worst, witness, tol)


# ---------------------------------------------------------------------------
# joint-distribution feasibility
# ---------------------------------------------------------------------------

@dataclass
class JointFeasibilityResult:
    feasible: bool
    observables: tuple
    distribution: np.ndarray | None = None     # shape = product of spectra
    certificate: np.ndarray | None = None      # one weight per marginal row
    rows: tuple = ()                           # (context index, outcome) per row
    residual: float = 0.0                      # max marginal error, or certificate value
    iterations: int = 0
    tol: float = 1e-9

    @property
    def status(self) -> str:
        return "feasible" if self.feasible else "infeasible"


def marginal_system(b: Behavior):
    """(M, rhs, rows, observables, shape) where column g of M is the global
    assignment g and row (k, t) sums the assignments restricting to outcome t
    on context k."""
    sc = b.scenario
    obs = sc.observables
    shape = tuple(len(sc.spectra[o]) for o in obs)
    grid = np.indices(shape).reshape(len(obs), -1)
    pos = {o: i for i, o in enumerate(obs)}
    rows, blocks, rhs = [], [], []
    for k, ctx in enumerate(sc.contexts):
        axes = [pos[o] for o in ctx]
        cshape = tuple(shape[a] for a in axes)
        flat = np.ravel_multi_index(grid[axes], cshape)
        block = np.zeros((int(np.prod(cshape)), grid.shape[1]))
        block[flat, np.arange(grid.shape[1])] = 1.0
        blocks.append(block)
        rhs.append(b.tables[k].probabilities.reshape(-1))
        for idx in itertools.product(*(range(s) for s in cshape)):
            rows.append((k, tuple(sc.spectra[ctx[i]][j] for i, j in enumerate(idx))))
    return np.vstack(blocks), np.concatenate(rhs), tuple(rows), obs, shape


def _phase_one(A: np.ndarray, rhs: np.ndarray, pivot_tol: float = 1e-12):
    """min 1'a  s.t.  A x + a = rhs, x, a >= 0, by tableau simplex with
    Bland's rule.  Returns (objective, x, duals, iterations) where ``duals``
    are the row multipliers of the optimal basis in the caller's row signs."""
    m, n = A.shape
    sign = np.where(rhs < 0, -1.0, 1.0)
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A * sign[:, None]
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = rhs * sign
    T[m, n:n + m] = 1.0
    T[m] -= T[:m].sum(axis=0)
    basis = list(range(n, n + m))
    it = 0
    while True:
        cand = np.nonzero(T[m, :-1] < -pivot_tol)[0]
        if len(cand) == 0:
            break
        j = int(cand[0])
        col = T[:m, j]
        ok = np.nonzero(col > pivot_tol)[0]
        if len(ok) == 0:   # cannot happen: the objective is bounded below
            raise NumericalFailure("phase-one simplex found an unbounded ray")
        ratios = T[ok, -1] / col[ok]
        best = ratios.min()
        ties = ok[ratios <= best + 1e-15 * max(1.0, abs(best))]
        i = int(min(ties, key=lambda r: basis[r]))
        T[i] /= T[i, j]
        piv = T[i].copy()
        T -= np.outer(T[:, j], piv)
        T[i] = piv
        basis[i] = j
        it += 1
    x = np.zeros(n + m)
    for r, bvar in enumerate(basis):
        x[bvar] = T[r, -1]
    duals = (1.0 - T[m, n:n + m]) * sign
    return float(-T[m, -1]), x[:n], duals, it


def certificate_value(M: np.ndarray, rhs: np.ndarray, y: np.ndarray, tol: float) -> float:
    """y'rhs + tol*|y|_1 - min_g (y'M)_g.  Negative means no distribution
    reproduces ``rhs`` within ``tol``: every distribution x has
    y'Mx >= min_g (y'M)_g, while matching the marginals would force
    y'Mx <= y'rhs + tol*|y|_1."""
    return float(y @ rhs + tol * np.abs(y).sum() - np.min(y @ M))


def joint_distribution_feasible(b: Behavior, tol: float = 1e-9,
                                cap: int = DEFAULT_LP_CAP) -> JointFeasibilityResult:
    """Is there a distribution over global assignments whose marginals match
    every context table within ``tol``?"""
    sc = b.scenario
    size = int(np.prod([len(sc.spectra[o]) for o in sc.observables], dtype=float))
    if size > cap:
        raise ProblemTooLarge(f"{size} global assignments exceed the cap of {cap}")
    M, rhs, rows, obs, shape = marginal_system(b)
    R, G = M.shape
    # M x + s1 = rhs + slack ; -M x + s2 = slack - rhs ; 1'x = 1
    A = np.zeros((2 * R + 1, G + 2 * R))
    A[:R, :G] = M
    A[:R, G:G + R] = np.eye(R)
    A[R:2 * R, :G] = -M
    A[R:2 * R, G + R:] = np.eye(R)
    A[2 * R, :G] = 1.0
    # exact marginals first, so consistent behaviors get an exact witness
    for slack in (0.0, tol):
        target = np.concatenate([rhs + slack, slack - rhs, [1.0]])
        obj, x, duals, it = _phase_one(A, target)
        if obj <= 1e-12:
            dist = np.clip(x[:G], 0.0, None)
            dist = dist / dist.sum()
            resid = float(np.max(np.abs(M @ dist - rhs)))
            if resid > tol * (1 + 1e-6) + 1e-12:
                raise NumericalFailure(f"feasible point fails re-verification ({resid:.3e})")
            return JointFeasibilityResult(True, obs, dist.reshape(shape), None, rows, resid, it, tol)
    y = duals[R:2 * R] - duals[:R]
    scale = np.max(np.abs(y))
    if scale <= 0:
        raise NumericalFailure("phase-one duals vanish on an infeasible problem")
    y = y / scale
    value = certificate_value(M, rhs, y, tol)
    if not value < -tol:
        raise NumericalFailure(f"infeasibility certificate fails re-verification ({value:.3e})")
    return JointFeasibilityResult(False, obs, None, y, rows, value, it, tol)


def verify_feasibility(b: Behavior, result: JointFeasibilityResult) -> float:
    """Recompute the residual (feasible) or certificate value (infeasible)."""
    M, rhs, _, _, _ = marginal_system(b)
    if result.feasible:
        d = result.distribution.reshape(-1)
        if d.min() < -1e-12 or abs(d.sum() - 1.0) > 1e-9:
            return float("inf")
        return float(np.max(np.abs(M @ d - rhs)))
    return certificate_value(M, rhs, result.certificate, result.tol)


# ---------------------------------------------------------------------------
# exclusivity and local orthogonality
# ---------------------------------------------------------------------------

@dataclass
class ExclusivityReport:
    passed: bool
    max_sum: float
    sums: tuple
    violations: list = field(default_factory=list)   # (family index, sum, conflicting pair)
    tol: float = 1e-9


def _conflict(sc: Scenario, e1, e2):
    """A shared observable on which the two events disagree, or None."""
    (k1, t1), (k2, t2) = e1, e2
    v1 = dict(zip(sc.contexts[k1], t1))
    for o, v in zip(sc.contexts[k2], t2):
        if o in v1 and abs(v1[o] - v) > 1e-9:
            return o
    return None


def _normalize_events(sc: Scenario, family):
    out = []
    for ctx, outcome in family:
        k = ctx if isinstance(ctx, int) else sc.contexts.index(tuple(ctx))
        outcome = tuple(float(v) for v in outcome)
        if len(outcome) != len(sc.contexts[k]):
            raise MalformedFamily(f"outcome {outcome} does not fit context {sc.contexts[k]}")
        for o, v in zip(sc.contexts[k], outcome):
            if not any(abs(v - w) <= 1e-9 for w in sc.spectra[o]):
                raise MalformedFamily(f"value {v} is not in the spectrum of {o}")
        out.append((k, outcome))
    return out


def exclusivity_local_orthogonality_check(b: Behavior, event_families, tol: float = 1e-9) -> ExclusivityReport:
    """Each family is a list of (context, outcome tuple) events that pairwise
    disagree on some shared observable; their probabilities must sum to at
    most one."""
    sc = b.scenario
    sums, violations = [], []
    for fi, family in enumerate(event_families):
        events = _normalize_events(sc, family)
        for e1, e2 in itertools.combinations(events, 2):
            if _conflict(sc, e1, e2) is None:
                raise MalformedFamily(f"family {fi}: events {e1} and {e2} are not exclusive")
        s = sum(b.prob(k, t) for k, t in events)
        sums.append(s)
        if s > 1 + tol:
            pair = (events[0], events[1]) if len(events) > 1 else (events[0],)
            violations.append((fi, s, pair))
    top = max(sums) if sums else 0.0
    return ExclusivityReport(not violations, top, tuple(sums), violations, tol)


def random_lo_family(sc: Scenario, rng: np.random.Generator) -> list:
    """Greedy maximal family of pairwise exclusive events in random order."""
    events = [(k, t) for k in range(len(sc.contexts)) for t in sc.outcomes(k)]
    chosen = []
    for idx in rng.permutation(len(events)):
        e = events[idx]
        if all(_conflict(sc, e, c) is not None for c in chosen):
            chosen.append(e)
    return chosen


def exclusivity_sum(sys: OperationalSystem, state, projections: Sequence[str], probes=None) -> float:
    """Sum of expectations of pairwise orthogonal projections."""
    for e, f in itertools.combinations(projections, 2):
        if not orthogonal(sys, e, f, probes):
            raise MalformedFamily(f"{e} and {f} are not orthogonal")
    return float(sum(projection_expectation(sys, state, e) for e in projections))


# ---------------------------------------------------------------------------
# valuations
# ---------------------------------------------------------------------------

@dataclass
class ValuationProblem:
    spectra: dict                      # object -> tuple of values
    arrows: tuple                      # FunctionalArrow between objects

    def __post_init__(self):
        self.spectra = {k: tuple(float(v) for v in s) for k, s in self.spectra.items()}
        self.arrows = tuple(a for a in self.arrows if a.domain != a.codomain or
                            a.index_map != tuple(range(len(self.spectra[a.domain]))))
        by_pair = {}
        for a in self.arrows:
            for end in (a.domain, a.codomain):
                if end not in self.spectra:
                    raise ValueError(f"arrow endpoint {end!r} is not an object")
            if len(a.index_map) != len(self.spectra[a.domain]) or not all(
                    0 <= j < len(self.spectra[a.codomain]) for j in a.index_map):
                raise ValueError(f"arrow {a.domain} -> {a.codomain} is not a total table")
            key = (a.domain, a.codomain)
            if key in by_pair and by_pair[key] != a.index_map:
                raise InconsistentArrows(f"two different arrows {a.domain} -> {a.codomain}")
            by_pair[key] = a.index_map
        for (d, m), f in list(by_pair.items()):
            for (m2, c), g in list(by_pair.items()):
                if m2 != m or (d, c) not in by_pair:
                    continue
                h = by_pair[(d, c)]
                if tuple(g[i] for i in f) != h:
                    raise InconsistentArrows(f"{m} -> {c} after {d} -> {m} differs from {d} -> {c}")
        if d_self := [a for a in self.arrows if a.domain == a.codomain]:
            raise InconsistentArrows(f"non-identity endomorphism on {d_self[0].domain}")
        self._pairs = by_pair

    def order(self) -> list:
        """Objects by descending out-degree, ties in declaration order."""
        deg = {o: 0 for o in self.spectra}
        for a in self.arrows:
            deg[a.domain] += 1
        names = list(self.spectra)
        return sorted(names, key=lambda o: (-deg[o], names.index(o)))

    def consistent(self, valuation: Mapping[str, int]) -> bool:
        """Every arrow with both ends valued maps the domain index to the codomain index."""
        return all(f[valuation[d]] == valuation[c] for (d, c), f in self._pairs.items()
                   if d in valuation and c in valuation)


@dataclass
class ValuationResult:
    satisfiable: bool
    valuation: dict | None            # object -> value
    explored: int                     # consistent nonempty partial assignments visited
    order: tuple = ()


def valuation_search(p: ValuationProblem) -> ValuationResult:
    """Depth-first search for v with v(codomain) = f(v(domain)) on every
    arrow.  Values are tried in ascending order."""
    order = p.order()
    pos = {o: i for i, o in enumerate(order)}
    # constraints checked when the later of the two endpoints is assigned
    checks = [[] for _ in order]
    for (d, c), f in p._pairs.items():
        if pos[d] > pos[c]:
            checks[pos[d]].append((d, c, f, True))
        else:
            checks[pos[c]].append((d, c, f, False))
    ranks = [sorted(range(len(p.spectra[o])), key=lambda i: p.spectra[o][i]) for o in order]
    assign: dict = {}
    explored = 0

    def ok(level):
        for d, c, f, _ in checks[level]:
            if f[assign[d]] != assign[c]:
                return False
        return True

    def search(level):
        nonlocal explored
        if level == len(order):
            return True
        o = order[level]
        for i in ranks[level]:
            assign[o] = i
            if ok(level):
                explored += 1
                if search(level + 1):
                    return True
            del assign[o]
        return False

    if search(0):
        vals = {o: p.spectra[o][assign[o]] for o in p.spectra}
        return ValuationResult(True, vals, explored, tuple(order))
    return ValuationResult(False, None, explored, tuple(order))


def derive_valuation_problem(sys: OperationalSystem, scenario: Scenario) -> ValuationProblem:
    """Objects are the scenario's observables plus one joint observable per
    context, built by nested conjunctions so that its spectrum is exactly the
    set of jointly possible outcome tuples.  Arrows run from each joint
    observable to the members of its context."""
    spectra = {o: tuple(sys.spectrum(o)) for o in scenario.observables}
    arrows = []
    for ctx in scenario.contexts:
        if len(ctx) == 1:
            continue
        conj = conjunction(sys, ctx[0], ctx[1])
        legs = [conj.left, conj.right]
        for o in ctx[2:]:
            nxt = conjunction(sys, conj.name, o)
            legs = [compose(nxt.left, leg, sys) for leg in legs] + [nxt.right]
            conj = nxt
        spectra[conj.name] = tuple(sys.spectrum(conj.name))
        arrows.extend(legs)
    return ValuationProblem(spectra, tuple(arrows))
