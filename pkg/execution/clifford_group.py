"""
Clifford tableaux and the one- and two-qubit Clifford groups.

A Pauli is a triple (x, z, k) meaning i^k X^x Z^z, where bit q of x (z) puts an
X (Z) on qubit q. A Tableau stores the images of X_0..X_{n-1}, Z_0..Z_{n-1}
under conjugation C P C^dagger.

The two-qubit group (11520 elements) is enumerated by index through the usual
layered form: a pair of single-qubit Cliffords, then one of four entangling
classes (nothing, CX, CX-CX, SWAP), then for the middle two classes a pair
from S1 = {I, V, V^2}. Elements carry a basis-gate sequence on local qubits 0/1.
"""

import logging
from collections import deque
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from execution.circuit_core import Circuit, Gate, cx, unitary_of, zyz_decompose
from execution.errors import JitError

logger = logging.getLogger(__name__)

NUM_CLIFFORD_1Q = 24
NUM_CLIFFORD_2Q = 11520
_CLASS_SIZES = (576, 5184, 5184, 576)
_CLASS_STARTS = (0, 576, 5760, 10944)


def _popcount(v):
    return bin(v).count('1')


def pauli_mul(p, q):
    """Product p*q of two Paulis in (x, z, k) form."""
    x1, z1, k1 = p
    x2, z2, k2 = q
    return (x1 ^ x2, z1 ^ z2, (k1 + k2 + 2 * _popcount(z1 & x2)) % 4)


def is_hermitian(p):
    x, z, k = p
    return (k - _popcount(x & z)) % 2 == 0


_I2 = np.eye(2, dtype=complex)
_X2 = np.array([[0, 1], [1, 0]], dtype=complex)
_Z2 = np.diag([1, -1]).astype(complex)


def pauli_matrix(n, p):
    """Dense matrix of a Pauli; qubit 0 is the least significant index bit."""
    x, z, k = p
    out = np.array([[1]], dtype=complex)
    for q in reversed(range(n)):
        factor = (_X2 if (x >> q) & 1 else _I2) @ (_Z2 if (z >> q) & 1 else _I2)
        out = np.kron(out, factor)
    return (1j ** k) * out


@dataclass(frozen=True)
class Tableau:
    n: int
    images: tuple

    @classmethod
    def identity(cls, n):
        return cls(n, tuple((1 << j, 0, 0) for j in range(n)) + tuple((0, 1 << j, 0) for j in range(n)))

    def conjugate(self, p):
        """C p C^dagger."""
        x, z, k = p
        out = (0, 0, k)
        for j in range(self.n):
            if (x >> j) & 1:
                out = pauli_mul(out, self.images[j])
        for j in range(self.n):
            if (z >> j) & 1:
                out = pauli_mul(out, self.images[self.n + j])
        return out

    def then(self, second):
        """Tableau of `self` followed by `second` (operator second * self)."""
        return Tableau(self.n, tuple(second.conjugate(img) for img in self.images))

    def inverse(self):
        """Tableau of the inverse Clifford, found by search over Hermitian Paulis."""
        preimage = {}
        for x in range(1 << self.n):
            for z in range(1 << self.n):
                for k in (0, 1, 2, 3):
                    p = (x, z, k)
                    if is_hermitian(p):
                        preimage[self.conjugate(p)] = p
        gens = Tableau.identity(self.n).images
        return Tableau(self.n, tuple(preimage[g] for g in gens))

    def is_valid(self):
        """Images are Hermitian and obey the Pauli commutation relations."""
        n = self.n
        if not all(is_hermitian(p) for p in self.images):
            return False
        for a in range(2 * n):
            for b in range(2 * n):
                pa, pb = self.images[a], self.images[b]
                commute = pauli_mul(pa, pb) == pauli_mul(pb, pa)
                expected = not (abs(a - b) == n)
                if commute != expected:
                    return False
        return True

    @property
    def key(self):
        return self.images


def tableau_from_unitary(u):
    """Tableau of a Clifford unitary (dimension 2 or 4) by conjugating the generators."""
    dim = u.shape[0]
    n = dim.bit_length() - 1
    images = []
    for gen in Tableau.identity(n).images:
        m = u @ pauli_matrix(n, gen) @ u.conj().T
        for x in range(dim):
            for z in range(dim):
                c = np.trace(pauli_matrix(n, (x, z, 0)).conj().T @ m) / dim
                if abs(abs(c) - 1) < 1e-8:
                    k = int(round(np.angle(c) / (np.pi / 2))) % 4
                    images.append((x, z, k))
                    break
            else:
                continue
            break
        else:
            raise JitError("matrix is not a Clifford unitary")
    return Tableau(n, tuple(images))


def _embed_1q(t1, q):
    """Lift a one-qubit tableau onto qubit q of a two-qubit register."""
    def lift(p):
        x, z, k = p
        return (x << q, z << q, k)
    images = list(Tableau.identity(2).images)
    images[q] = lift(t1.images[0])
    images[2 + q] = lift(t1.images[1])
    return Tableau(2, tuple(images))


def _cx_tableau(c, t):
    images = list(Tableau.identity(2).images)
    images[c] = ((1 << c) | (1 << t), 0, 0)
    images[2 + t] = (0, (1 << c) | (1 << t), 0)
    return Tableau(2, tuple(images))


@dataclass(frozen=True, eq=False)
class Clifford1:
    index: int
    tableau: Tableau
    matrix: np.ndarray

    def gates(self, qubit):
        g = zyz_decompose(self.matrix, qubit)
        return [] if g is None else [g]


@lru_cache(maxsize=1)
def clifford_1q_table():
    """All 24 single-qubit Cliffords, generated breadth-first from H and S."""
    gens = [Gate('h', (0,)), Gate('s', (0,))]
    start = np.eye(2, dtype=complex)
    seen = {tableau_from_unitary(start).key: start}
    order = [start]
    queue = deque([start])
    while queue:
        m = queue.popleft()
        for g in gens:
            nxt = unitary_of(Circuit(1, 0, [g])) @ m
            key = tableau_from_unitary(nxt).key
            if key not in seen:
                seen[key] = nxt
                order.append(nxt)
                queue.append(nxt)
    if len(order) != NUM_CLIFFORD_1Q:
        raise JitError(f"single-qubit Clifford closure has {len(order)} elements")
    return tuple(Clifford1(i, tableau_from_unitary(m), m) for i, m in enumerate(order))


@lru_cache(maxsize=1)
def _clifford_1q_lookup():
    return {c.tableau.key: c.index for c in clifford_1q_table()}


def clifford_1q_from_tableau(tableau):
    return clifford_1q_table()[_clifford_1q_lookup()[tableau.key]]


@lru_cache(maxsize=1)
def _s1_indices():
    """Indices of I, V, V^2 where V maps X -> Y and Z -> X (up to sign)."""
    table = clifford_1q_table()
    for c in table:
        (xx, xz, _), (zx, zz, _) = c.tableau.images
        if (xx, xz) == (1, 1) and (zx, zz) == (1, 0):
            v = c
            break
    else:
        raise JitError("no single-qubit Clifford with X -> Y, Z -> X")
    v2 = v.tableau.then(v.tableau)
    return (0, v.index, _clifford_1q_lookup()[v2.key])


@dataclass(frozen=True)
class Clifford2:
    index: int
    tableau: Tableau
    gates: tuple

    @property
    def cx_count(self):
        return sum(1 for g in self.gates if g.kind == 'cx')

    @property
    def gate_count_1q(self):
        return sum(1 for g in self.gates if g.kind != 'cx')

    def on(self, a, b):
        """Gate sequence relabelled onto qubits (a, b)."""
        return [g.remap({0: a, 1: b}) for g in self.gates]


def _decode_index(index):
    """index -> (class, c1 on q0, c1 on q1, s1 exponent on q0, s1 exponent on q1)."""
    if not 0 <= index < NUM_CLIFFORD_2Q:
        raise JitError(f"Clifford index {index} out of range")
    for cls in (3, 2, 1, 0):
        if index >= _CLASS_STARTS[cls]:
            r = index - _CLASS_STARTS[cls]
            break
    if cls in (0, 3):
        a, b = divmod(r, NUM_CLIFFORD_1Q)
        return cls, a, b, 0, 0
    local, s = divmod(r, 9)
    a, b = divmod(local, NUM_CLIFFORD_1Q)
    s0, s1 = divmod(s, 3)
    return cls, a, b, s0, s1


_ENTANGLERS = {
    0: (),
    1: ((0, 1),),
    2: ((0, 1), (1, 0)),
    3: ((0, 1), (1, 0), (0, 1)),
}


@lru_cache(maxsize=NUM_CLIFFORD_2Q)
def clifford_2q(index):
    """The two-qubit Clifford with the given index in [0, 11520)."""
    cls, a, b, s0, s1 = _decode_index(index)
    c1 = clifford_1q_table()
    s1_idx = _s1_indices()

    tab = _embed_1q(c1[a].tableau, 0).then(_embed_1q(c1[b].tableau, 1))
    gates = c1[a].gates(0) + c1[b].gates(1)
    for c, t in _ENTANGLERS[cls]:
        tab = tab.then(_cx_tableau(c, t))
        gates.append(cx(c, t))
    if cls in (1, 2):
        for q, s in ((0, s0), (1, s1)):
            elem = c1[s1_idx[s]]
            tab = tab.then(_embed_1q(elem.tableau, q))
            gates += elem.gates(q)
    return Clifford2(index, tab, tuple(gates))


@lru_cache(maxsize=1)
def clifford_2q_lookup():
    """tableau key -> index for every element; checks the enumeration is a bijection."""
    lookup = {}
    for i in range(NUM_CLIFFORD_2Q):
        lookup.setdefault(clifford_2q(i).tableau.key, i)
    if len(lookup) != NUM_CLIFFORD_2Q:
        raise JitError(f"two-qubit Clifford enumeration produced {len(lookup)} distinct elements")
    logger.debug("two-qubit Clifford table built (%d elements)", len(lookup))
    return lookup


def clifford_2q_from_tableau(tableau):
    return clifford_2q(clifford_2q_lookup()[tableau.key])


def random_clifford2(rng):
    """Uniformly random two-qubit Clifford."""
    return clifford_2q(int(rng.integers(NUM_CLIFFORD_2Q)))


def random_clifford1(rng):
    return clifford_1q_table()[int(rng.integers(NUM_CLIFFORD_1Q))]


def inverse_clifford2(tableau):
    """Group element undoing `tableau`."""
    return clifford_2q_from_tableau(tableau.inverse())


@lru_cache(maxsize=1)
def average_gate_counts():
    """(mean CX, mean single-qubit gates) per uniformly drawn two-qubit Clifford."""
    n_cx = n_1q = 0
    for i in range(NUM_CLIFFORD_2Q):
        c = clifford_2q(i)
        n_cx += c.cx_count
        n_1q += c.gate_count_1q
    return n_cx / NUM_CLIFFORD_2Q, n_1q / NUM_CLIFFORD_2Q
