"""Transition probabilities between rank-1 projections and the Hilbert-space
embedding they generate.

The embedding is built only from the operational data (probabilities and
updates): vectors come from a transition table, projectors from rank-1
decompositions, observables from spectral decompositions.  ``verify_embedding``
then compares everything the system predicts with what the matrices predict.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .commutative import (find_cone, find_functional_relation, is_density_operator, is_projection,
                          join, meet, projection_expectation, projection_leq, projective_state,
                          spectral_decomposition, trace, algebra_op)
from .errors import (BasisNotOrthogonal, BasisWrongSize, MissingSpectralData, MissingTransitionEntry,
                     NotConvex, NotRankOne, NumericalFailure, UndecomposableProjection)
from .numkernel import cluster_values, frobenius, hermitian_eigendecompose
from .system import OperationalSystem, sequential_distribution


@dataclass
class TransitionTable:
    projections: tuple
    P: np.ndarray
    dimension: int

    def index(self, name: str) -> int:
        try:
            return self.projections.index(name)
        except ValueError:
            raise MissingTransitionEntry(name) from None

    def prob(self, e: str, f: str) -> float:
        return float(self.P[self.index(e), self.index(f)])


def transition_table(sys: OperationalSystem, rank1_list: Sequence[str]) -> TransitionTable:
    """P[i][j] = <E_j> in the pure state of E_i."""
    names = tuple(rank1_list)
    for e in names:
        if not is_projection(sys, e) or abs(trace(sys, e) - 1.0) > 1e-6:
            raise NotRankOne(f"{e} is not a rank-1 projection")
    k = len(names)
    P = np.zeros((k, k))
    for i, e in enumerate(names):
        st = projective_state(sys, e)
        for j, f in enumerate(names):
            P[i, j] = projection_expectation(sys, st, f)
    return TransitionTable(names, P, sys.dimension)


def _basis_indices(table: TransitionTable, basis, tol: float) -> list:
    idx = [b if isinstance(b, (int, np.integer)) else table.index(b) for b in basis]
    if len(idx) != table.dimension:
        raise BasisWrongSize(f"basis has {len(idx)} members, dimension is {table.dimension}")
    for a in idx:
        for b in idx:
            if a != b and max(table.P[a, b], table.P[b, a]) > tol:
                raise BasisNotOrthogonal(f"{table.projections[a]} and {table.projections[b]} are not orthogonal")
    return idx


def interference_residual(P: np.ndarray, e: int, f: int, basis: Sequence[int]) -> float:
    """|P(E->F) - (sum_i sqrt(P(E->G_i) P(G_i->F)))^2|."""
    s = sum(np.sqrt(max(P[e, g], 0.0) * max(P[g, f], 0.0)) for g in basis)
    return abs(float(P[e, f]) - float(s) ** 2)


@dataclass
class TransitionReport:
    symmetry_residual: float
    symmetry_witness: tuple | None
    interference: list           # per basis: (basis names, residual, witness pair)
    tol: float

    @property
    def symmetric(self) -> bool:
        return self.symmetry_residual <= self.tol

    @property
    def interference_ok(self) -> bool:
        return all(r <= self.tol for _, r, _ in self.interference)

    @property
    def passed(self) -> bool:
        return self.symmetric and self.interference_ok


def check_transition_postulate(table: TransitionTable, bases: Sequence[Sequence], tol: float = 1e-8) -> TransitionReport:
    P = table.P
    asym = np.abs(P - P.T)
    i, j = np.unravel_index(int(np.argmax(asym)), asym.shape) if asym.size else (0, 0)
    sym_res = float(asym[i, j]) if asym.size else 0.0
    sym_wit = (table.projections[i], table.projections[j]) if sym_res > 0 else None
    results = []
    for basis in bases:
        idx = _basis_indices(table, basis, tol)
        worst, witness = 0.0, None
        for e in range(len(table.projections)):
            for f in range(len(table.projections)):
                r = interference_residual(P, e, f, idx)
                if r > worst:
                    worst, witness = r, (table.projections[e], table.projections[f])
        results.append((tuple(table.projections[g] for g in idx), worst, witness))
    return TransitionReport(sym_res, sym_wit, results, tol)


# ---------------------------------------------------------------------------
# vector assignment
# ---------------------------------------------------------------------------

@dataclass
class VectorAssignment:
    basis: tuple
    vectors: dict
    table: TransitionTable
    rescaled: dict = field(default_factory=dict)     # handle -> norm before rescaling

    def overlap(self, f: str, g: str) -> float:
        """|<psi_F|psi_G>|^2."""
        return float(abs(np.vdot(self.vectors[f], self.vectors[g])) ** 2)


def _fix_global_phase(v: np.ndarray) -> np.ndarray:
    nz = np.nonzero(np.abs(v) > 1e-12)[0]
    if len(nz):
        c = v[nz[0]]
        v = v * (abs(c) / c)
    return v


def vector_assignment(table: TransitionTable, basis_handles: Sequence[str], theta: Mapping | None = None,
                      tol: float = 1e-8) -> VectorAssignment:
    """psi_F[i] = sqrt(P(F -> E_i)) exp(i (theta(E_i) - theta(F)))."""
    basis_idx = _basis_indices(table, basis_handles, tol)
    theta = dict(theta or {})
    vectors, rescaled = {}, {}
    for f_idx, f in enumerate(table.projections):
        comps = np.array([np.sqrt(max(table.P[f_idx, b], 0.0)) for b in basis_idx], dtype=complex)
        phases = np.array([theta.get(table.projections[b], 0.0) - theta.get(f, 0.0) for b in basis_idx])
        v = comps * np.exp(1j * phases)
        norm = np.linalg.norm(v)
        if norm <= 1e-12:
            raise NumericalFailure(f"{f} has no weight on the basis")
        if abs(norm - 1.0) > 1e-10:
            rescaled[f] = float(norm)
            v = v / norm
        vectors[f] = _fix_global_phase(v)
    return VectorAssignment(tuple(table.projections[b] for b in basis_idx), vectors, table, rescaled)


# ---------------------------------------------------------------------------
# projections, observables, states
# ---------------------------------------------------------------------------

class ProjectionAssignment:
    """pi(E) = sum of |psi><psi| over a rank-1 decomposition of E into handles."""

    def __init__(self, sys: OperationalSystem, psi: VectorAssignment):
        self.sys = sys
        self.psi = psi
        self.n = sys.dimension
        self._cache: dict = {}
        self._pure = {h: projective_state(sys, h) for h in psi.vectors}

    def decompose(self, E: str):
        """Pairwise orthogonal handles below E whose count is the rank of E, or None."""
        rank = int(round(trace(self.sys, E)))
        if rank == 0:
            return []
        table = self.psi.table
        chosen = []
        for h in table.projections:
            if projection_expectation(self.sys, self._pure[h], E) < 1.0 - 1e-9:
                continue
            if all(table.prob(h, c) <= 1e-9 for c in chosen):
                chosen.append(h)
                if len(chosen) == rank:
                    return chosen
        return None

    def _from_handles(self, handles):
        m = np.zeros((self.n, self.n), dtype=complex)
        for h in handles:
            v = self.psi.vectors[h]
            m += np.outer(v, v.conj())
        return m

    def __call__(self, E: str) -> np.ndarray:
        if E in self._cache:
            return self._cache[E]
        if not is_projection(self.sys, E):
            raise UndecomposableProjection(f"{E} is not a projection")
        parts = self.decompose(E)
        if parts is not None:
            m = self._from_handles(parts)
        else:
            comp = self.sys.apply_function(E, lambda a: 1.0 - a, label=f"perp({E})")
            rest = self.decompose(comp)
            if rest is None:
                raise UndecomposableProjection(f"neither {E} nor its complement decomposes into handles")
            m = np.eye(self.n) - self._from_handles(rest)
        self._cache[E] = m
        return m

    def partition(self, projections: Sequence[str]) -> list:
        """pi of a partition of the unit; at most one member may be filled in
        as the identity minus the others."""
        mats, missing = [], []
        for k, e in enumerate(projections):
            try:
                mats.append(self(e))
            except UndecomposableProjection:
                mats.append(None)
                missing.append(k)
        if len(missing) > 1:
            raise MissingSpectralData(f"{len(missing)} spectral projections do not decompose")
        if missing:
            k = missing[0]
            mats[k] = np.eye(self.n) - sum(m for m in mats if m is not None)
            self._cache[projections[k]] = mats[k]
        return mats


def projection_assignment(sys: OperationalSystem, psi: VectorAssignment, projections: Sequence[str],
                          pi: ProjectionAssignment | None = None) -> dict:
    pi = pi or ProjectionAssignment(sys, psi)
    return {e: pi(e) for e in projections}


def observable_assignment(pi: ProjectionAssignment, A: str) -> np.ndarray:
    """pi(A) = sum_alpha alpha pi(E_alpha)."""
    sd = spectral_decomposition(pi.sys, A)
    mats = pi.partition(sd.projections)
    out = sum(a * m for a, m in zip(sd.eigenvalues, mats))
    return 0.5 * (out + out.conj().T)


def state_assignment(pi: ProjectionAssignment, decomposition: Sequence) -> np.ndarray:
    """Density matrix of sum_i w_i * (projective state of E_i)."""
    weights = np.array([float(w) for w, _ in decomposition])
    if np.any(weights < -1e-10) or abs(weights.sum() - 1.0) > 1e-10:
        raise NotConvex("weights must be nonnegative and sum to 1")
    n = pi.n
    D = np.zeros((n, n), dtype=complex)
    for w, e in decomposition:
        D += w * pi(e) / trace(pi.sys, e)
    return D


def state_of(sys: OperationalSystem, decomposition: Sequence):
    """The system's own state for a projective-state decomposition."""
    return sys.mix([w for w, _ in decomposition], [projective_state(sys, e) for _, e in decomposition])


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    residual: float
    note: str = ""
    witness: object = None


@dataclass
class EmbeddingReport:
    entries: list

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    @property
    def max_residual(self) -> float:
        return max((e.residual for e in self.entries), default=0.0)

    def entry(self, name: str) -> CheckResult:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)


EMBEDDING_CHECKS = ("functional_relations", "spectrum", "trace", "linearity", "density_operators",
                    "order", "density_states", "born_rule", "joint_measurements", "transition_overlaps")


class _Worst:
    def __init__(self):
        self.value, self.witness = 0.0, None

    def see(self, r, witness):
        r = float(r)
        if r > self.value:
            self.value, self.witness = r, witness


def _apply_to_matrix(m: np.ndarray, spectrum, f) -> np.ndarray:
    eig = hermitian_eigendecompose(m)
    out = np.zeros_like(m)
    for a, p in zip(eig.eigenvalues, eig.projectors):
        nearest = min(range(len(spectrum)), key=lambda k: abs(spectrum[k] - a))
        out += f[nearest] * p
    return out


def _handle_decomposition(pi: ProjectionAssignment, D: str):
    """D as sum_i w_i (projective state of handle_i), or None."""
    sd = spectral_decomposition(pi.sys, D)
    out = []
    for a, e in zip(sd.eigenvalues, sd.projections):
        if a <= 1e-12:
            continue
        parts = pi.decompose(e)
        if parts is None:
            return None
        out += [(float(a), h) for h in parts]
    return out


def default_state_decompositions(psi: VectorAssignment, mixtures: int = 6, seed: int = 0) -> list:
    n = len(psi.basis)
    out = [[(1.0 / n, e) for e in psi.basis]]
    out += [[(1.0, h)] for h in psi.vectors]
    rng = np.random.default_rng(seed)
    handles = list(psi.vectors)
    for _ in range(mixtures):
        k = int(rng.integers(2, min(4, len(handles)) + 1))
        pick = rng.choice(len(handles), size=k, replace=False)
        w = rng.dirichlet(np.ones(k))
        out.append([(float(w[i]), handles[p]) for i, p in enumerate(pick)])
    return out


def verify_embedding(sys: OperationalSystem, psi: VectorAssignment, pi: ProjectionAssignment | None = None,
                     theta_state=None, tol: float = 1e-8, observables: Sequence[str] | None = None,
                     states: Sequence | None = None, interference_ok: bool | None = None,
                     max_pairs: int = 40, seed: int = 0) -> EmbeddingReport:
    """Compare the system with its matrix image, one entry per check.

    ``theta_state`` maps a projective-state decomposition to a density
    matrix (default: ``state_assignment``).  ``states`` is a list of such
    decompositions.
    """
    pi = pi or ProjectionAssignment(sys, psi)
    theta_state = theta_state or (lambda dec: state_assignment(pi, dec))
    obs = list(observables if observables is not None else sys.declared_observables)
    decs = list(states if states is not None else default_state_decompositions(psi, seed=seed))
    rng = np.random.default_rng(seed)
    entries = []

    images = {}
    failures = {}
    for a in obs:
        try:
            images[a] = observable_assignment(pi, a)
        except (MissingSpectralData, UndecomposableProjection) as exc:
            failures[a] = str(exc)

    derived = {}

    def image(a):
        if a in images:
            return images[a]
        if a not in derived:
            derived[a] = observable_assignment(pi, a)
        return derived[a]

    # functional relations: registered arrows and sampled functions
    w = _Worst()
    for a in images:
        spec = sys.spectrum(a)
        for b in images:
            if a == b:
                continue
            arrow = find_functional_relation(sys, a, b)
            if arrow is not None:
                w.see(frobenius(images[b] - _apply_to_matrix(images[a], spec, arrow.values)), (a, b))
        for f in ([v * v for v in spec], [1.0 if k == 0 else 0.0 for k in range(len(spec))]):
            fb = sys.apply_function(a, list(f))
            w.see(frobenius(image(fb) - _apply_to_matrix(images[a], spec, f)), (a, "sampled function"))
    entries.append(CheckResult("functional_relations", w.value <= tol and not failures, w.value,
                               "; ".join(failures.values()), w.witness))

    w = _Worst()
    for a, m in images.items():
        got = [c[0] for c in cluster_values(np.linalg.eigvalsh(m), 1e-7, 1e-7)]
        want = list(sys.spectrum(a))
        # Hausdorff distance between the two value sets
        gap = np.abs(np.subtract.outer(np.array(got), np.array(want)))
        w.see(max(gap.min(axis=1).max(), gap.min(axis=0).max()), a)
    entries.append(CheckResult("spectrum", w.value <= tol, w.value, "", w.witness))

    w = _Worst()
    for a, m in images.items():
        w.see(abs(np.trace(m).real - trace(sys, a)), a)
    entries.append(CheckResult("trace", w.value <= tol, w.value, "", w.witness))

    w = _Worst()
    compatible_pairs = [(a, b) for i, a in enumerate(images) for b in list(images)[i + 1:]
                        if find_cone(sys, [a, b]) is not None]
    for a, b in compatible_pairs:
        s = algebra_op(sys, "add", a, b)
        p = algebra_op(sys, "mul", a, b)
        w.see(frobenius(image(s) - images[a] - images[b]), (a, b, "add"))
        w.see(frobenius(image(p) - images[a] @ images[b]), (a, b, "mul"))
    for a in images:
        c = algebra_op(sys, "scale", -2.5, a)
        w.see(frobenius(image(c) + 2.5 * images[a]), (a, "scale"))
    entries.append(CheckResult("linearity", w.value <= tol, w.value, "", w.witness))

    w = _Worst()
    density = {}
    for a in images:
        ok, _ = is_density_operator(sys, a, decompose=False)
        if ok:
            density[a] = _handle_decomposition(pi, a)
            m = images[a]
            w.see(max(-float(np.linalg.eigvalsh(m).min()), abs(np.trace(m).real - 1.0)), a)
    for dec in decs:
        D = theta_state(dec)
        w.see(max(-float(np.linalg.eigvalsh(D).min()), abs(np.trace(D).real - 1.0)), dec)
    entries.append(CheckResult("density_operators", w.value <= tol, w.value,
                               f"{len(density)} density operators", w.witness))

    w = _Worst()
    projections = list(dict.fromkeys(p for a in images for p in spectral_decomposition(sys, a).projections))
    pairs = [(e, f) for e in projections for f in projections if e != f]
    if len(pairs) > max_pairs:
        pairs = [pairs[k] for k in sorted(rng.choice(len(pairs), size=max_pairs, replace=False))]
    for e, f in pairs:
        pe, pf = image(e), image(f)
        leq = projection_leq(sys, e, f)
        gap = frobenius(pe @ pf - pe)
        w.see(gap if leq else (1.0 if gap <= tol else 0.0), (e, f, "order"))
        if find_cone(sys, [e, f]) is not None:
            w.see(frobenius(image(meet(sys, e, f)) - pe @ pf), (e, f, "meet"))
            w.see(frobenius(image(join(sys, e, f)) - (pe + pf - pe @ pf)), (e, f, "join"))
    entries.append(CheckResult("order", w.value <= tol, w.value, f"{len(pairs)} pairs", w.witness))

    w = _Worst()
    skipped = 0
    for a, dec in density.items():
        if dec is None:
            skipped += 1
            continue
        w.see(frobenius(theta_state(dec) - images[a]), a)
    entries.append(CheckResult("density_states", w.value <= tol, w.value,
                               f"{len(density) - skipped} checked, {skipped} without a handle decomposition",
                               w.witness))

    w = _Worst()
    thetas = []
    for dec in decs:
        st = state_of(sys, dec)
        D = theta_state(dec)
        thetas.append((dec, st, D))
        for a in images:
            exp = float(np.dot(sys.spectrum(a).values, sys.probabilities(st, a)))
            w.see(abs(exp - np.trace(D @ images[a]).real), (a, dec))
    entries.append(CheckResult("born_rule", w.value <= tol, w.value, f"{len(decs)} states", w.witness))

    w = _Worst()
    for a, b in compatible_pairs:
        ea = hermitian_eigendecompose(images[a]).projectors
        eb = hermitian_eigendecompose(images[b]).projectors
        for dec, st, D in thetas:
            seq = sequential_distribution(sys, st, [a, b]).probabilities
            if seq.shape != (len(ea), len(eb)):
                w.see(1.0, (a, b, "outcome count"))
                continue
            for i, p in enumerate(ea):
                for j, q in enumerate(eb):
                    w.see(abs(seq[i, j] - np.trace(D @ p @ q).real), (a, b, dec))
    entries.append(CheckResult("joint_measurements", w.value <= tol, w.value,
                               f"{len(compatible_pairs)} compatible pairs", w.witness))

    w = _Worst()
    hs = list(psi.vectors)
    for f in hs:
        for g in hs:
            w.see(abs(psi.overlap(f, g) - psi.table.prob(f, g)), (f, g))
    note = "postulate-violation induced" if interference_ok is False and w.value > tol else ""
    entries.append(CheckResult("transition_overlaps", w.value <= tol, w.value, note, w.witness))
    return EmbeddingReport(entries)
