import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qfound import build_hilbert_system, pure_state
from qfound.commutative import (algebra_op, compose, conjunction, expectation, find_cone, find_functional_relation,
                                is_density_operator, is_projection, joint_pushforward_residual, orthocomplement,
                                orthogonal, projection_expectation, projection_leq, spectral_decomposition, trace,
                                unit, universal_property_check, zero)
from qfound.errors import NotCompatible, NotProjection
from qfound.library import I2, X, Z, bell_phi_plus, kron, random_commuting_family, random_density, random_hermitian
from qfound.system import MIXED, probe_states, sequential_distribution

import oracles

seeds = st.integers(0, 2**32 - 1)


@pytest.fixture
def qubit():
    sys_ = build_hilbert_system(2, [("sz", Z), ("sx", X), ("one", I2)],
                                [pure_state([1, 0], "zero"), pure_state([1, 1], "plus")])
    sys_.register_observable("p0", _obs(oracles.proj([1, 0])))
    sys_.register_observable("p1", _obs(oracles.proj([0, 1])))
    sys_.register_observable("pplus", _obs(oracles.proj([1, 1])))
    return sys_


@pytest.fixture
def two_qubits():
    return build_hilbert_system(4, [("zi", kron(Z, I2)), ("iz", kron(I2, Z)),
                                    ("w", kron(Z, I2) + 3 * kron(I2, Z))],
                                [pure_state(bell_phi_plus(), "bell")])


def _obs(m):
    from qfound import HermitianObservable
    return HermitianObservable("", m)


def mat(sys_, name):
    return sys_.matrix(name)


# --- functional relations --------------------------------------------------

def test_relation_to_unit(qubit):
    arrow = find_functional_relation(qubit, "sz", "one")
    assert arrow.as_dict(qubit) == {-1.0: 1.0, 1.0: 1.0}


def test_relation_to_square(qubit):
    sq = qubit.apply_function("sz", lambda a: a * a)
    assert np.allclose(mat(qubit, sq), np.eye(2))
    assert find_functional_relation(qubit, "sz", sq).as_dict(qubit) == {-1.0: 1.0, 1.0: 1.0}


def test_no_relation_between_noncommuting(qubit):
    assert find_functional_relation(qubit, "sz", "sx") is None


def test_apply_identity_returns_same(qubit):
    assert qubit.apply_function("sz", lambda a: a) == "sz"


def test_apply_function_idempotent(qubit):
    a = qubit.apply_function("sz", lambda a: 3 * a)
    b = qubit.apply_function("sz", lambda a: 3 * a)
    assert a == b


def test_indicator_by_functional_calculus():
    sys_ = build_hilbert_system(3, [("d", np.diag([0.0, 1.0, 2.0]))])
    e = sys_.apply_function("d", lambda a: float(a in (1.0, 2.0)))
    assert np.allclose(mat(sys_, e), np.diag([0, 1, 1]))


# --- cones and conjunctions -------------------------------------------------

def test_cone_with_unit(qubit):
    cone = find_cone(qubit, ["sz", "one"])
    assert cone.apex == "sz"


def test_cone_on_product_observables():
    sys_ = build_hilbert_system(4, [("zi", kron(Z, I2)), ("iz", kron(I2, Z)), ("xx", kron(X, X)),
                                    ("xw", kron(X, I2) + 3 * kron(I2, X))])
    cone = find_cone(sys_, ["zi", "iz"])
    assert len(sys_.spectrum(cone.apex)) == 4
    apex = mat(sys_, cone.apex)
    for arrow in cone.arrows:
        pushed = sum(v * oracles.eigenspaces(apex)[a] for a, v in zip(sorted(oracles.eigenspaces(apex)), arrow.values))
        assert np.allclose(pushed, mat(sys_, arrow.codomain))


def test_no_cone_for_noncommuting(qubit):
    assert find_cone(qubit, ["sz", "sx"]) is None
    with pytest.raises(NotCompatible):
        conjunction(qubit, "sz", "sx")


def test_conjunction_bell_distribution(two_qubits):
    conj = conjunction(two_qubits, "zi", "iz")
    p = two_qubits.probabilities("bell", conj.name)
    by_pair = {}
    for k, lab in enumerate(two_qubits.spectrum(conj.name)):
        by_pair[(conj.left.values[k], conj.right.values[k])] = p[k]
    assert by_pair[(1.0, 1.0)] == pytest.approx(0.5)
    assert by_pair[(-1.0, -1.0)] == pytest.approx(0.5)
    assert by_pair.get((1.0, -1.0), 0.0) == pytest.approx(0.0, abs=1e-12)
    assert by_pair.get((-1.0, 1.0), 0.0) == pytest.approx(0.0, abs=1e-12)


def test_self_conjunction_has_two_points(qubit):
    conj = conjunction(qubit, "sz", "sz")
    assert len(qubit.spectrum(conj.name)) == 2


def test_conjunction_with_unit_is_isomorphic(qubit):
    conj = conjunction(qubit, "sz", "one")
    assert len(qubit.spectrum(conj.name)) == 2
    assert find_functional_relation(qubit, conj.name, "sz") is not None
    assert find_functional_relation(qubit, "sz", conj.name) is not None


def test_conjunction_projection_is_product(two_qubits):
    conj = conjunction(two_qubits, "zi", "iz")
    ea, fb = oracles.eigenspaces(kron(Z, I2)), oracles.eigenspaces(kron(I2, Z))
    m = mat(two_qubits, conj.name)
    for k, lab in enumerate(two_qubits.spectrum(conj.name)):
        proj = oracles.eigenspaces(m)[round(lab, 8) + 0.0]
        assert np.allclose(proj, ea[conj.left.values[k]] @ fb[conj.right.values[k]])


def test_universal_property(two_qubits):
    conj = conjunction(two_qubits, "zi", "iz")
    results = universal_property_check(two_qubits, conj, samples=8)
    assert len(results) == 8
    assert all(ok for ok, _ in results)


def test_custom_pairing_must_be_injective(qubit):
    with pytest.raises(ValueError):
        conjunction(qubit, "sz", "one", pairing=lambda a, b: 0.0)
    conj = conjunction(qubit, "sz", "one", pairing=lambda a, b: 10 * a + b)
    assert sorted(qubit.spectrum(conj.name)) == pytest.approx([-9.0, 11.0])


@given(st.integers(2, 6), st.integers(1, 4), seeds)
def test_joint_pushforward_on_random_families(n, m, seed):
    rng = np.random.default_rng(seed)
    apex, family = random_commuting_family(n, m, rng)
    obs = [("apex", apex)] + [(f"f{i}", f) for i, f in enumerate(family)]
    sys_ = build_hilbert_system(n, obs, [("rho", random_density(n, rng))])
    names = [sys_.find_observable(_obs(f)) for f in family]
    cone = find_cone(sys_, names)
    assert cone is not None
    assert joint_pushforward_residual(sys_, cone, ["rho", MIXED]) <= 1e-9


@given(seeds)
def test_arrow_composition_is_pushforward(seed):
    rng = np.random.default_rng(seed)
    sys_ = build_hilbert_system(3, [("d", np.diag([0.0, 1.0, 2.0]))], [("rho", random_density(3, rng))])
    f = sys_.apply_function("d", lambda a: a % 2)
    g = sys_.apply_function(f, lambda a: 1 - a)
    direct = find_functional_relation(sys_, "d", g)
    composed = compose(find_functional_relation(sys_, "d", f), find_functional_relation(sys_, f, g), sys_)
    assert direct.index_map == composed.index_map


# --- algebra ----------------------------------------------------------------

def test_add_with_unit(qubit):
    s = algebra_op(qubit, "add", "sz", "one")
    assert np.allclose(mat(qubit, s), np.diag([2, 0]))


def test_projection_squares_to_itself(qubit):
    assert algebra_op(qubit, "mul", "p0", "p0") == "p0"


def test_scale_and_unit_give_orthocomplement(qubit):
    neg = algebra_op(qubit, "scale", -1.0, "p0")
    comp = algebra_op(qubit, "add", neg, unit(qubit))
    assert comp == orthocomplement(qubit, "p0")
    assert np.allclose(mat(qubit, comp), oracles.proj([0, 1]))


@given(seeds)
def test_algebra_laws(seed):
    rng = np.random.default_rng(seed)
    apex, fam = random_commuting_family(3, 3, rng)
    sys_ = build_hilbert_system(3, [("c", apex), ("a", fam[0]), ("b", fam[1]), ("d", fam[2])])
    a, b, d = "a", "b", "d"
    one, nil = unit(sys_), zero(sys_)
    M = lambda n: mat(sys_, n)
    close = lambda x, y: np.abs(M(x) - M(y)).max() <= 1e-9
    assert close(algebra_op(sys_, "add", a, b), algebra_op(sys_, "add", b, a))
    assert close(algebra_op(sys_, "mul", a, b), algebra_op(sys_, "mul", b, a))
    assert close(algebra_op(sys_, "add", algebra_op(sys_, "add", a, b), d),
                 algebra_op(sys_, "add", a, algebra_op(sys_, "add", b, d)))
    assert close(algebra_op(sys_, "mul", a, algebra_op(sys_, "add", b, d)),
                 algebra_op(sys_, "add", algebra_op(sys_, "mul", a, b), algebra_op(sys_, "mul", a, d)))
    assert close(algebra_op(sys_, "add", a, nil), a)
    assert close(algebra_op(sys_, "mul", a, one), a)
    assert np.abs(M(algebra_op(sys_, "add", a, b)) - (fam[0] + fam[1])).max() <= 1e-9
    assert np.abs(M(algebra_op(sys_, "mul", a, b)) - fam[0] @ fam[1]).max() <= 1e-9


def test_algebra_independent_of_cone(two_qubits):
    direct = algebra_op(two_qubits, "add", "zi", "iz")
    cone = find_cone(two_qubits, ["zi", "iz", "w"])
    via = algebra_op(two_qubits, "add", "zi", "iz", cone=cone)
    assert np.abs(mat(two_qubits, direct) - mat(two_qubits, via)).max() <= 1e-9


# --- projections ------------------------------------------------------------

def test_order_examples(qubit):
    one, nil = unit(qubit), zero(qubit)
    for e in ("p0", "p1", "pplus"):
        assert projection_leq(qubit, e, one)
        assert projection_leq(qubit, nil, e)
    assert not projection_leq(qubit, "p0", "pplus")
    assert not projection_leq(qubit, "pplus", "p0")


def test_orthogonality_examples(qubit):
    assert orthogonal(qubit, "p0", orthocomplement(qubit, "p0"))
    assert orthogonal(qubit, "p0", "p1")
    assert not orthogonal(qubit, "p0", "pplus")


def test_non_projection_rejected(qubit):
    with pytest.raises(NotProjection):
        projection_leq(qubit, "sz", "p0")
    with pytest.raises(NotProjection):
        orthocomplement(qubit, "sx")


def test_spectral_decomposition_of_projection(qubit):
    d = spectral_decomposition(qubit, "pplus")
    assert sorted(d.eigenvalues) == pytest.approx([0.0, 1.0], abs=1e-12)
    zero_part, one_part = (d.projections[k] for k in np.argsort(d.eigenvalues))
    assert one_part == "pplus"
    assert zero_part == orthocomplement(qubit, "pplus")


def test_spectral_decomposition_examples():
    sys_ = build_hilbert_system(3, [("nd", np.diag([1.0, 2.0, 3.0])), ("d", np.diag([3.0, 3.0, 5.0]))])
    d = spectral_decomposition(sys_, "d")
    assert d.eigenvalues == (3.0, 5.0)
    assert d.multiplicities == (2, 1)
    assert np.allclose(sys_.matrix(d.projections[0]), np.diag([1, 1, 0]))
    assert d.residual <= 1e-9
    u = spectral_decomposition(sys_, unit(sys_))
    assert u.eigenvalues == (1.0,)
    assert np.allclose(sys_.matrix(u.projections[0]), np.eye(3))


@given(st.integers(2, 5), seeds)
def test_spectral_decomposition_is_partition(n, seed):
    rng = np.random.default_rng(seed)
    a = np.round(random_hermitian(n, rng))
    sys_ = build_hilbert_system(n, [("nd", np.diag(np.arange(n, dtype=float))), ("a", a)])
    d = spectral_decomposition(sys_, "a")
    mats = [sys_.matrix(e) for e in d.projections]
    assert np.abs(sum(mats) - np.eye(n)).max() <= 1e-9
    assert sum(d.multiplicities) == n
    for p, q in itertools.combinations(mats, 2):
        assert np.abs(p @ q).max() <= 1e-9
    assert np.abs(sum(v * m for v, m in zip(d.eigenvalues, mats)) - a).max() <= 1e-9


# --- traces, expectations, density operators ---------------------------------

@pytest.mark.parametrize("n", [2, 3, 5])
def test_trace_of_unit(n):
    sys_ = build_hilbert_system(n, [("nd", np.diag(np.arange(n, dtype=float)))])
    assert trace(sys_, unit(sys_)) == pytest.approx(n)
    rank1 = sys_.apply_function("nd", lambda a: float(a == 0))
    assert trace(sys_, rank1) == pytest.approx(1.0)


def test_trace_examples(qubit):
    assert trace(qubit, "sz") == pytest.approx(np.trace(Z).real, abs=1e-12)


def test_expectation_examples(qubit):
    assert expectation(qubit, "zero", "sz") == pytest.approx(1.0)
    assert expectation(qubit, "zero", "sx") == pytest.approx(0.0, abs=1e-12)
    assert expectation(qubit, MIXED, "sx") == pytest.approx(trace(qubit, "sx") / 2, abs=1e-12)


@given(st.integers(2, 5), seeds)
def test_expectation_matches_trace_oracle(n, seed):
    rng = np.random.default_rng(seed)
    b, rho = random_hermitian(n, rng), random_density(n, rng)
    sys_ = build_hilbert_system(n, [("b", b)], [("rho", rho)])
    assert expectation(sys_, "rho", "b") == pytest.approx(np.trace(rho @ b).real, abs=1e-9)
    assert trace(sys_, "b") == pytest.approx(np.trace(b).real, abs=1e-9)


def test_density_operator_examples(qubit):
    ok, dec = is_density_operator(qubit, qubit.apply_function("sz", lambda a: 0.5))
    assert ok
    assert sorted(dec.weights) == pytest.approx([0.5, 0.5])
    ok, dec = is_density_operator(qubit, "pplus")
    assert ok
    assert sorted(dec.weights) == pytest.approx([0.0, 1.0])
    assert is_density_operator(qubit, "sz") == (False, None)


# --- cross-cutting invariants --------------------------------------------------

@given(st.integers(2, 5), seeds)
def test_exclusivity_and_additivity(n, seed):
    rng = np.random.default_rng(seed)
    u = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))[0]
    sys_ = build_hilbert_system(n, [("nd", u @ np.diag(np.arange(n, dtype=float)) @ u.conj().T)],
                                [("rho", random_density(n, rng))])
    groups = rng.integers(0, n, size=n)
    family = [sys_.apply_function("nd", lambda a, g=g: float(groups[int(round(a))] == g))
              for g in sorted(set(groups))]
    for st_ in probe_states(sys_, mixtures=4) + ["rho"]:
        parts = [projection_expectation(sys_, st_, e) for e in family]
        assert sum(parts) <= 1 + 1e-9
        whole = family[0]
        for e in family[1:]:
            whole = algebra_op(sys_, "add", whole, e)
        assert projection_expectation(sys_, st_, whole) == pytest.approx(sum(parts), abs=1e-9)
    assert len(family) <= n


@given(seeds)
def test_calculus_coherence(seed):
    rng = np.random.default_rng(seed)
    sys_ = build_hilbert_system(4, [("d", np.diag([0.0, 1.0, 2.0, 3.0]))])
    table = rng.integers(0, 3, size=4).astype(float)
    f = lambda a: table[int(round(a))]
    sigma = {float(rng.integers(0, 3))}
    left = sys_.apply_function("d", lambda a: float(f(a) in sigma))
    fa = sys_.apply_function("d", f)
    right = sys_.apply_function(fa, lambda a: float(a in sigma))
    assert np.abs(sys_.matrix(left) - sys_.matrix(right)).max() <= 1e-9


@given(st.integers(2, 4), seeds)
def test_pre_born_identity(n, seed):
    rng = np.random.default_rng(seed)
    apex, (b,) = random_commuting_family(n, 1, rng)
    sys_ = build_hilbert_system(n, [("c", apex), ("b", b)])
    spec = sys_.spectrum("c")
    keep = list(spec)[: max(1, len(spec) // 2)]
    E = sys_.indicator("c", keep)
    after = sys_.update(MIXED, "c", [spec.index(v) for v in keep])
    em = sys_.matrix(E)
    want = np.trace(em / np.trace(em).real @ b).real
    assert expectation(sys_, after, "b") == pytest.approx(want, abs=1e-9)


def test_dimension_bound(qubit):
    assert orthogonal(qubit, "p0", "p1")
    assert is_projection(qubit, "p0") and is_projection(qubit, "p1")
    assert trace(qubit, algebra_op(qubit, "add", "p0", "p1")) == pytest.approx(2.0)


def test_sequential_of_conjunction_legs_match_apex(two_qubits):
    conj = conjunction(two_qubits, "zi", "iz")
    t = sequential_distribution(two_qubits, "bell", ["zi", "iz"])
    p = two_qubits.probabilities("bell", conj.name)
    for k in range(len(p)):
        assert t.prob(conj.left.values[k], conj.right.values[k]) == pytest.approx(p[k], abs=1e-12)
