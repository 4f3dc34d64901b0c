"""Standard matrices, reference systems and random generators."""
from __future__ import annotations

import numpy as np

from .hilbert import HermitianObservable, HilbertSystem, build_hilbert_system, pure_state

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}


def kron(*ms):
    out = np.eye(1, dtype=complex)
    for m in ms:
        out = np.kron(out, m)
    return out


def pauli_string(word: str) -> np.ndarray:
    return kron(*(PAULI[c] for c in word))


def bell_phi_plus() -> np.ndarray:
    return np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)


def qubit_system() -> HilbertSystem:
    """sz, sx, sy with states |0>, |1>, |+>."""
    return build_hilbert_system(
        2, [("sz", Z), ("sx", X), ("sy", Y)],
        [pure_state([1, 0], "zero"), pure_state([0, 1], "one"), pure_state([1, 1], "plus")])


def chsh_system() -> HilbertSystem:
    """Two qubits: A0=Z, A1=X on the left, B0,B1=(Z+-X)/sqrt2 on the right,
    the Bell state and a nondegenerate witness."""
    b0 = (Z + X) / np.sqrt(2)
    b1 = (Z - X) / np.sqrt(2)
    obs = [("a0", kron(Z, I2)), ("a1", kron(X, I2)), ("b0", kron(I2, b0)), ("b1", kron(I2, b1)),
           ("w", kron(Z, I2) + 3 * kron(I2, Z))]
    return build_hilbert_system(4, obs, [pure_state(bell_phi_plus(), "bell")])


CHSH_CONTEXTS = [("a0", "b0"), ("a0", "b1"), ("a1", "b0"), ("a1", "b1")]

PERES_MERMIN_ROWS = [("XI", "IX", "XX"), ("IZ", "ZI", "ZZ"), ("XZ", "ZX", "YY")]


def peres_mermin_system() -> HilbertSystem:
    words = [w for row in PERES_MERMIN_ROWS for w in row]
    obs = [(w, pauli_string(w)) for w in words]
    obs.append(("w", pauli_string("ZI") + 3 * pauli_string("IZ")))
    return build_hilbert_system(4, obs, [pure_state(bell_phi_plus(), "bell")])


def peres_mermin_contexts():
    rows = [list(r) for r in PERES_MERMIN_ROWS]
    cols = [[r[k] for r in PERES_MERMIN_ROWS] for k in range(3)]
    return rows + cols


# random generators ---------------------------------------------------------

def random_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (a + a.conj().T)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(a)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = rank or n
    g = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_degenerate_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random unitary conjugate of a diagonal with repeated integer entries."""
    vals = rng.integers(-2, 3, size=n).astype(float)
    u = random_unitary(n, rng)
    return u @ np.diag(vals) @ u.conj().T


def random_nonnegative_unit(n: int, rng: np.random.Generator, support=None) -> np.ndarray:
    v = np.zeros(n)
    idx = list(range(n)) if support is None else list(support)
    v[idx] = rng.uniform(0.05, 1.0, size=len(idx))
    return v / np.linalg.norm(v)


def random_commuting_family(n: int, m: int, rng: np.random.Generator):
    """Apex U diag(0..n-1) U^dagger and m random real functions of it."""
    u = random_unitary(n, rng)
    vecs = [u[:, k] for k in range(n)]
    projs = [np.outer(v, v.conj()) for v in vecs]
    apex = sum(k * p for k, p in enumerate(projs))
    family = []
    for _ in range(m):
        vals = rng.integers(-2, 3, size=n).astype(float)
        family.append(sum(v * p for v, p in zip(vals, projs)))
    return apex, family


def nonnegative_fixture(n: int, rng: np.random.Generator, extra: int = 2):
    """System whose rank-1 handles all have nonnegative real vectors in the
    computational basis, together with the handle list and basis.

    Observables: diag(1..n); for each random nonnegative unit vector v the
    two-valued a|v><v| + b(1 - |v><v|); when n >= 3 a compatible pair built
    on two vectors with disjoint supports.  Returns (sys, handles, basis,
    matrices) where ``matrices`` maps every declared observable to the
    matrix it was built from.
    """
    obs = [("d", np.diag(np.arange(1.0, n + 1)))]
    vectors = {f"e{k}": np.eye(n)[k] for k in range(n)}
    for j in range(extra):
        v = random_nonnegative_unit(n, rng)
        vectors[f"v{j}"] = v
        a, b = rng.choice([-2.0, -1.0, 0.5, 2.0, 3.0], size=2, replace=False)
        p = np.outer(v, v)
        obs.append((f"a{j}", a * p + b * (np.eye(n) - p)))
        obs.append((f"p{j}", p))
    if n >= 3:
        v1 = random_nonnegative_unit(n, rng, support=[0, 1])
        v2 = random_nonnegative_unit(n, rng, support=range(2, n))
        vectors["u1"], vectors["u2"] = v1, v2
        p1, p2 = np.outer(v1, v1), np.outer(v2, v2)
        rest = np.eye(n) - p1 - p2
        obs.append(("g1", 1.0 * p1 + 4.0 * (np.eye(n) - p1)))
        obs.append(("g2", -1.0 * p2 + 2.0 * (np.eye(n) - p2)))
        obs.append(("q1", p1))
        obs.append(("q2", p2))
        obs.append(("gm", 1.0 * p1 + 2.0 * p2 + 5.0 * rest))
    sys = build_hilbert_system(n, obs)
    handles = []
    for name, v in vectors.items():
        handles.append(sys.register_observable(f"h_{name}", HermitianObservable(f"h_{name}", np.outer(v, v))))
    basis = handles[:n]
    return sys, handles, basis, dict(obs)
