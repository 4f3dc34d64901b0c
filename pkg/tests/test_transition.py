import numpy as np
import pytest
from hypothesis import given, strategies as st

from qfound import DensityState, HermitianObservable, build_hilbert_system
from qfound.commutative import algebra_op, projective_state
from qfound.errors import BasisNotOrthogonal, BasisWrongSize, NotConvex, NotRankOne
from qfound.library import nonnegative_fixture, random_nonnegative_unit
from qfound.system import MIXED, sequential_distribution
from qfound.transition import (EMBEDDING_CHECKS, ProjectionAssignment, TransitionTable, check_transition_postulate,
                               observable_assignment, projection_assignment, state_assignment, transition_table,
                               vector_assignment, verify_embedding)

import oracles

seeds = st.integers(0, 2**32 - 1)


def with_handles(n, vectors, observables=None):
    """Hilbert system of dimension n with one rank-1 handle per vector."""
    obs = observables or [("d", np.diag(np.arange(1.0, n + 1)))]
    sys_ = build_hilbert_system(n, obs)
    names = [sys_.register_observable(k, HermitianObservable(k, oracles.proj(v)), dedup=False)
             for k, v in vectors.items()]
    return sys_, names


# --- transition tables --------------------------------------------------------

def test_orthogonal_pair_table():
    sys_, h = with_handles(2, {"h0": [1, 0], "h1": [0, 1]})
    assert np.allclose(transition_table(sys_, h).P, np.eye(2))


def test_zero_plus_table():
    sys_, h = with_handles(2, {"h0": [1, 0], "hp": [1, 1]})
    assert np.allclose(transition_table(sys_, h).P, [[1, 0.5], [0.5, 1]], atol=1e-12)


def test_single_handle_table():
    sys_, h = with_handles(2, {"hp": [1, 1]})
    assert np.allclose(transition_table(sys_, h).P, [[1.0]])


def test_rank_two_rejected():
    sys_ = build_hilbert_system(3, [("d", np.diag([1.0, 2.0, 3.0]))])
    e = sys_.indicator("d", [1.0, 2.0])
    with pytest.raises(NotRankOne):
        transition_table(sys_, [e])


@given(st.integers(2, 5), seeds)
def test_quantum_tables_symmetric_and_match_overlaps(n, seed):
    rng = np.random.default_rng(seed)
    vecs = {f"h{k}": rng.normal(size=n) + 1j * rng.normal(size=n) for k in range(4)}
    sys_, h = with_handles(n, vecs)
    t = transition_table(sys_, h)
    assert np.abs(t.P - t.P.T).max() <= 1e-12
    for i, a in enumerate(h):
        assert t.P[i, i] == pytest.approx(1.0, abs=1e-10)
        for j, b in enumerate(h):
            assert t.P[i, j] == pytest.approx(oracles.overlap(oracles.ket(*vecs[a]), oracles.ket(*vecs[b])), abs=1e-10)


# --- interference predicate -------------------------------------------------

def test_nonnegative_vectors_pass_interference():
    rng = np.random.default_rng(3)
    vecs = {"e0": [1, 0, 0], "e1": [0, 1, 0], "e2": [0, 0, 1]}
    vecs.update({f"v{k}": random_nonnegative_unit(3, rng) for k in range(4)})
    sys_, h = with_handles(3, vecs)
    rep = check_transition_postulate(transition_table(sys_, h), [h[:3]], tol=1e-10)
    assert rep.passed


def test_complex_counterexample_computational_basis():
    sys_, h = with_handles(2, {"h0": [1, 0], "h1": [0, 1], "hc": [1, 1j]})
    rep = check_transition_postulate(transition_table(sys_, h), [["h0", "h1"]], tol=1e-10)
    assert rep.symmetric
    assert not rep.interference_ok
    assert rep.interference[0][1] == pytest.approx(0.5, abs=1e-10)


def test_complex_vector_against_zero_in_plus_minus_basis():
    sys_, h = with_handles(2, {"hp": [1, 1], "hm": [1, -1], "hc": [1, 1j], "h0": [1, 0]})
    t = transition_table(sys_, h)
    rep = check_transition_postulate(t, [["hp", "hm"]], tol=1e-10)
    assert not rep.interference_ok
    assert rep.interference[0][1] == pytest.approx(0.5, abs=1e-10)
    assert set(rep.interference[0][2]) == {"hc", "h0"}


def test_basis_validation():
    sys_, h = with_handles(2, {"h0": [1, 0], "hp": [1, 1], "h1": [0, 1]})
    t = transition_table(sys_, h)
    with pytest.raises(BasisNotOrthogonal):
        check_transition_postulate(t, [["h0", "hp"]])
    with pytest.raises(BasisWrongSize):
        check_transition_postulate(t, [["h0"]])


# --- vector, projection, observable and state assignments --------------------

def test_vector_assignment_examples():
    sys_, h = with_handles(2, {"e1": [1, 0], "e2": [0, 1], "f": [1, 1]})
    psi = vector_assignment(transition_table(sys_, h), ["e1", "e2"])
    assert np.allclose(psi.vectors["f"], [np.sqrt(0.5), np.sqrt(0.5)])
    assert np.allclose(psi.vectors["e1"], [1, 0])


def test_vector_assignment_dim_three():
    f = np.array([0.5, 0.5, np.sqrt(0.5)])
    sys_, h = with_handles(3, {"e1": [1, 0, 0], "e2": [0, 1, 0], "e3": [0, 0, 1], "f": f})
    psi = vector_assignment(transition_table(sys_, h), h[:3])
    assert np.allclose(psi.vectors["f"], [0.5, 0.5, np.sqrt(0.5)])
    assert np.linalg.norm(psi.vectors["f"]) == pytest.approx(1.0, abs=1e-10)


@given(st.integers(2, 5), seeds)
def test_phase_function_leaves_overlaps_unchanged(n, seed):
    rng = np.random.default_rng(seed)
    vecs = {f"e{k}": np.eye(n)[k] for k in range(n)}
    vecs.update({f"v{k}": random_nonnegative_unit(n, rng) for k in range(3)})
    sys_, h = with_handles(n, vecs)
    t = transition_table(sys_, h)
    plain = vector_assignment(t, h[:n])
    theta = {name: float(rng.uniform(0, 2 * np.pi)) for name in h}
    shifted = vector_assignment(t, h[:n], theta)
    for a in h:
        for b in h:
            assert shifted.overlap(a, b) == pytest.approx(plain.overlap(a, b), abs=1e-10)


def test_projection_assignment_boundaries():
    sys_, h = with_handles(3, {"e1": [1, 0, 0], "e2": [0, 1, 0], "e3": [0, 0, 1]})
    psi = vector_assignment(transition_table(sys_, h), h)
    one = sys_.apply_function("d", lambda a: 1.0)
    nil = sys_.apply_function("d", lambda a: 0.0)
    e12 = sys_.indicator("d", [1.0, 2.0])
    out = projection_assignment(sys_, psi, [one, nil, e12])
    assert np.allclose(out[one], np.eye(3))
    assert np.allclose(out[nil], 0)
    assert np.allclose(out[e12], np.diag([1, 1, 0]))


def test_orthogonal_images_multiply_to_zero():
    sys_, handles, basis, _ = nonnegative_fixture(3, np.random.default_rng(1))
    psi = vector_assignment(transition_table(sys_, handles), basis)
    pi = ProjectionAssignment(sys_, psi)
    t = psi.table
    for f in handles:
        for g in handles:
            if f != g and t.prob(f, g) <= 1e-12:
                assert np.abs(pi(f) @ pi(g)).max() <= 1e-9


def test_observable_assignment_examples():
    sys_, handles, basis, mats = nonnegative_fixture(3, np.random.default_rng(2))
    pi = ProjectionAssignment(sys_, vector_assignment(transition_table(sys_, handles), basis))
    one = sys_.apply_function("d", lambda a: 1.0)
    assert np.allclose(observable_assignment(pi, one), np.eye(3))
    p = observable_assignment(pi, "p0")
    assert np.abs(p @ p - p).max() <= 1e-9
    total = observable_assignment(pi, algebra_op(sys_, "add", "g1", "g2"))
    assert np.abs(total - observable_assignment(pi, "g1") - observable_assignment(pi, "g2")).max() <= 1e-9


def test_state_assignment_examples():
    sys_, h = with_handles(3, {"e1": [1, 0, 0], "e2": [0, 1, 0], "e3": [0, 0, 1], "f": [1, 1, 0]})
    pi = ProjectionAssignment(sys_, vector_assignment(transition_table(sys_, h), h[:3]))
    assert np.allclose(state_assignment(pi, [(1 / 3, e) for e in h[:3]]), np.eye(3) / 3)
    assert np.allclose(state_assignment(pi, [(1.0, "f")]), pi("f"))
    assert np.allclose(state_assignment(pi, [(0.5, "e1"), (0.5, "e2")]), np.diag([0.5, 0.5, 0]))
    with pytest.raises(NotConvex):
        state_assignment(pi, [(0.7, "e1"), (0.7, "e2")])
    with pytest.raises(NotConvex):
        state_assignment(pi, [(1.5, "e1"), (-0.5, "e2")])


# --- full verification ------------------------------------------------------

@pytest.mark.parametrize("n", [2, 3, 4])
def test_round_trip_on_nonnegative_fixture(n):
    sys_, handles, basis, _ = nonnegative_fixture(n, np.random.default_rng(n))
    t = transition_table(sys_, handles)
    assert check_transition_postulate(t, [basis]).passed
    rep = verify_embedding(sys_, vector_assignment(t, basis))
    assert [e.name for e in rep.entries] == list(EMBEDDING_CHECKS)
    assert rep.passed, [(e.name, e.residual) for e in rep.entries if not e.passed]
    assert rep.max_residual <= 1e-8


def test_classical_diagonal_system():
    sys_ = build_hilbert_system(3, [("d", np.diag([1.0, 2.0, 3.0])), ("c", np.diag([0.0, 0.0, 1.0]))])
    handles = [sys_.indicator("d", [v]) for v in (1.0, 2.0, 3.0)]
    t = transition_table(sys_, handles)
    rep = verify_embedding(sys_, vector_assignment(t, handles))
    assert rep.passed


def test_corrupted_table_breaks_transition_overlaps():
    sys_, handles, basis, _ = nonnegative_fixture(2, np.random.default_rng(5))
    # a non-basis handle first, so entry [0][1] is an off-basis transition
    order = [h for h in handles if h not in basis] + list(basis)
    t = transition_table(sys_, order)
    P = t.P.copy()
    P[0][1] += 0.1
    bad = TransitionTable(t.projections, P, t.dimension)
    psi = vector_assignment(bad, basis)
    rep = verify_embedding(sys_, psi, interference_ok=check_transition_postulate(bad, [basis]).interference_ok)
    overlaps = rep.entry("transition_overlaps")
    assert not overlaps.passed
    assert overlaps.residual >= 0.05


def test_joint_measurements_match_backend():
    sys_, handles, basis, mats = nonnegative_fixture(3, np.random.default_rng(7))
    psi = vector_assignment(transition_table(sys_, handles), basis)
    rep = verify_embedding(sys_, psi)
    assert rep.entry("joint_measurements").passed
    assert rep.entry("born_rule").residual <= 1e-8


# --- invariants on the reference backend ------------------------------------------

@given(st.integers(2, 4), seeds)
def test_pure_state_absorption(n, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    sys_, (h,) = with_handles(n, {"h": v})
    sys_.register_state("rho", DensityState("rho", oracles.random_density(n, rng)))
    target = projective_state(sys_, h)
    for st_ in ("rho", MIXED):
        got = sys_.update(st_, h, [sys_.spectrum(h).index(1.0)])
        if sys_.is_null(got):
            continue
        assert sys_.states_equal(got, target, 1e-10)


@given(st.integers(2, 4), seeds)
def test_sequence_of_transitions_factorizes(n, seed):
    rng = np.random.default_rng(seed)
    vecs = {f"h{k}": rng.normal(size=n) + 1j * rng.normal(size=n) for k in range(3)}
    sys_, h = with_handles(n, vecs)
    t = transition_table(sys_, h)
    chain = t.P[0, 1] * t.P[1, 2]
    seq = sequential_distribution(sys_, MIXED, h)
    ones = n * seq.prob(1.0, 1.0, 1.0)
    assert ones == pytest.approx(chain, abs=1e-9)


@given(st.integers(2, 4), seeds)
def test_eigenstate_projection_commutes_with_observable(n, seed):
    rng = np.random.default_rng(seed)
    a = np.round(oracles.random_hermitian(n, rng))
    sys_ = build_hilbert_system(n, [("d", np.diag(np.arange(n, dtype=float))), ("a", a)])
    for i in range(len(sys_.spectrum("a"))):
        m = sys_.eigenstate("a", i).matrix
        if np.sum(np.linalg.eigvalsh(m) > 1e-8) != 1:
            continue
        assert np.linalg.norm(m @ a - a @ m) <= 1e-9


def test_distinct_handles_distinct_pure_states():
    sys_, h = with_handles(2, {"h0": [1, 0], "hp": [1, 1], "hc": [1, 1j]})
    states = [projective_state(sys_, x) for x in h]
    for i in range(3):
        for j in range(i + 1, 3):
            assert not sys_.states_equal(states[i], states[j])
