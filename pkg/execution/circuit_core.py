"""
Circuit intermediate representation.

Gates, circuits, the line-oriented circuit text format, decomposition into the
{U1, U2, U3, CX} basis, circuit inversion, exact unitaries for verification and
gate statistics.

Conventions:
- qubit 0 is the least significant bit of a basis-state index (little endian)
- readout bitstrings put clbit 0 rightmost
- angles are normalised to (-pi, pi] when a gate is built
- equality of operators is always modulo global phase
"""

import math
from dataclasses import dataclass, field

import numpy as np

from execution.errors import CircuitError

PI = math.pi

# kind -> (number of qubits, number of angle parameters)
GATE_SPECS = {
    'u1': (1, 1),
    'u2': (1, 2),
    'u3': (1, 3),
    'cx': (2, 0),
    'measure': (1, 0),
    'barrier': (None, 0),
    'h': (1, 0),
    'x': (1, 0),
    'y': (1, 0),
    'z': (1, 0),
    's': (1, 0),
    'sdg': (1, 0),
    't': (1, 0),
    'tdg': (1, 0),
    'rz': (1, 1),
    'cz': (2, 0),
    'swap': (2, 0),
    'cu1': (2, 1),
    'ccx': (3, 0),
}

BASIS_KINDS = frozenset({'u1', 'u2', 'u3', 'cx', 'measure', 'barrier'})
SINGLE_QUBIT_BASIS = frozenset({'u1', 'u2', 'u3'})
MAX_UNITARY_QUBITS = 10


def normalize_angle(angle):
    """Map an angle onto (-pi, pi]."""
    r = math.remainder(float(angle), 2 * PI)
    if r <= -PI:
        r += 2 * PI
    return r + 0.0


@dataclass(frozen=True)
class Gate:
    """One instruction. `qubits` are virtual (or physical, after routing) ids."""
    kind: str
    qubits: tuple
    params: tuple = ()
    clbit: int = None

    def __post_init__(self):
        if self.kind not in GATE_SPECS:
            raise CircuitError(f"unknown gate kind '{self.kind}'")
        n_q, n_p = GATE_SPECS[self.kind]
        qubits = tuple(int(q) for q in self.qubits)
        if n_q is not None and len(qubits) != n_q:
            raise CircuitError(f"{self.kind} expects {n_q} qubit(s), got {len(qubits)}")
        if any(q < 0 for q in qubits):
            raise CircuitError(f"{self.kind}: negative qubit index in {qubits}")
        if len(set(qubits)) != len(qubits):
            if self.kind == 'cx':
                raise CircuitError(f"cx control equals target (q{qubits[0]})")
            raise CircuitError(f"{self.kind}: repeated qubit in {qubits}")
        if len(self.params) != n_p:
            raise CircuitError(f"{self.kind} expects {n_p} angle(s), got {len(self.params)}")
        params = []
        for p in self.params:
            if not math.isfinite(float(p)):
                raise CircuitError(f"{self.kind}: angle {p} is not finite")
            params.append(normalize_angle(p))
        if self.kind == 'measure':
            if self.clbit is None or int(self.clbit) < 0:
                raise CircuitError("measure needs a non-negative clbit")
            object.__setattr__(self, 'clbit', int(self.clbit))
        elif self.clbit is not None:
            raise CircuitError(f"{self.kind} cannot write a clbit")
        object.__setattr__(self, 'qubits', qubits)
        object.__setattr__(self, 'params', tuple(params))

    @property
    def is_unitary(self):
        return self.kind not in ('measure', 'barrier')

    @property
    def arity(self):
        return len(self.qubits)

    def remap(self, mapping):
        """Same gate on relabelled qubits (mapping: old id -> new id)."""
        return Gate(self.kind, tuple(mapping[q] for q in self.qubits), self.params, self.clbit)


# Gate shortcuts used by the generators

def u1(lam, q):
    return Gate('u1', (q,), (lam,))


def u2(phi, lam, q):
    return Gate('u2', (q,), (phi, lam))


def u3(theta, phi, lam, q):
    return Gate('u3', (q,), (theta, phi, lam))


def cx(control, target):
    return Gate('cx', (control, target))


def measure(q, c):
    return Gate('measure', (q,), clbit=c)


def barrier(*qubits):
    return Gate('barrier', tuple(qubits))


def h(q):
    return Gate('h', (q,))


def x(q):
    return Gate('x', (q,))


def z(q):
    return Gate('z', (q,))


def cz(a, b):
    return Gate('cz', (a, b))


def cu1(lam, control, target):
    return Gate('cu1', (control, target), (lam,))


def ccx(a, b, target):
    return Gate('ccx', (a, b, target))


def swap(a, b):
    return Gate('swap', (a, b))


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list over `n_qubits` qubits and `n_clbits` readout slots."""
    n_qubits: int
    n_clbits: int
    gates: tuple = ()
    name: str = field(default='', compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'gates', tuple(self.gates))
        if self.n_qubits < 1:
            raise CircuitError("circuit needs at least one qubit")
        if self.n_clbits < 0:
            raise CircuitError("negative clbit count")
        written = set()
        measured = set()
        for i, g in enumerate(self.gates):
            for q in g.qubits:
                if q >= self.n_qubits:
                    raise CircuitError(f"gate {i} ({g.kind}) uses q{q} but circuit has {self.n_qubits} qubits")
                if q in measured and g.kind != 'barrier':
                    raise CircuitError(f"gate {i} ({g.kind}) acts on q{q} after it was measured")
            if g.kind == 'measure':
                if g.clbit >= self.n_clbits:
                    raise CircuitError(f"measure writes c{g.clbit} but circuit has {self.n_clbits} clbits")
                if g.clbit in written:
                    raise CircuitError(f"c{g.clbit} is written by more than one measure")
                written.add(g.clbit)
                measured.add(g.qubits[0])

    def __len__(self):
        return len(self.gates)

    @property
    def measurements(self):
        """{qubit: clbit} for every MEASURE."""
        return {g.qubits[0]: g.clbit for g in self.gates if g.kind == 'measure'}

    def is_basis(self):
        return all(g.kind in BASIS_KINDS for g in self.gates)

    def without_measurements(self):
        return Circuit(self.n_qubits, self.n_clbits,
                       [g for g in self.gates if g.kind != 'measure'], self.name)

    def with_gates(self, gates, n_qubits=None, name=None):
        return Circuit(self.n_qubits if n_qubits is None else n_qubits, self.n_clbits,
                       gates, self.name if name is None else name)


@dataclass(frozen=True)
class GateStats:
    count_1q: int
    count_2q: int
    count_3q: int
    depth: int
    measured_qubits: frozenset
    used_qubits: frozenset

    @property
    def width(self):
        return len(self.used_qubits)


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------

def _format_angle(angle):
    return format(angle, '.17g')


def _parse_index(token, prefix, line):
    if not token.startswith(prefix) or not token[len(prefix):].isdigit():
        raise CircuitError(f"expected {prefix}<index>, got '{token}'", line)
    return int(token[len(prefix):])


def _split_statements(text):
    """Yield (line_number, statement) pairs; comments stripped, `# name:` captured."""
    name = ''
    statements = []
    pending, pending_line = '', None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        code, _, comment = raw.partition('#')
        if not code.strip() and comment.strip().startswith('name:') and not statements and not pending:
            name = comment.strip()[len('name:'):].strip()
            continue
        pieces = code.split(';')
        for i, piece in enumerate(pieces):
            if pending_line is None and piece.strip():
                pending_line = line_no
            pending += ' ' + piece
            if i < len(pieces) - 1:
                if pending.strip():
                    statements.append((pending_line, pending.strip()))
                elif pending_line is not None:
                    raise CircuitError("empty statement", line_no)
                pending, pending_line = '', None
    if pending.strip():
        raise CircuitError("missing ';' at end of statement", pending_line)
    return name, statements


def parse_circuit(text):
    """
    Parse the line-oriented circuit format.

    Header `qubits N; clbits M;` then one statement per gate, e.g.
    `u3 <theta> <phi> <lam> q0;`, `cx q0 q1;`, `measure q0 -> c0;`, `barrier;`.
    Convenience gates (h, x, cz, cu1, ccx, ...) are accepted with the same shape.
    """
    name, statements = _split_statements(text)
    n_qubits = n_clbits = None
    gates = []
    written = {}
    measured = set()

    for line, stmt in statements:
        tokens = stmt.split()
        head = tokens[0].lower()

        if head in ('qubits', 'clbits'):
            if gates:
                raise CircuitError(f"'{head}' declared after the first gate", line)
            if len(tokens) != 2 or not tokens[1].isdigit():
                raise CircuitError(f"'{head}' expects one non-negative integer", line)
            if head == 'qubits':
                n_qubits = int(tokens[1])
            else:
                n_clbits = int(tokens[1])
            continue

        if n_qubits is None or n_clbits is None:
            raise CircuitError("header 'qubits N; clbits M;' must precede gates", line)
        if head not in GATE_SPECS:
            raise CircuitError(f"unknown gate '{head}'", line)

        if head == 'measure':
            if len(tokens) != 4 or tokens[2] != '->':
                raise CircuitError("expected 'measure q<i> -> c<k>'", line)
            q = _parse_index(tokens[1], 'q', line)
            c = _parse_index(tokens[3], 'c', line)
            if c >= n_clbits:
                raise CircuitError(f"clbit c{c} out of range (clbits {n_clbits})", line)
            if c in written:
                raise CircuitError(f"c{c} already written on line {written[c]}", line)
            written[c] = line
            qubits, params, clbit = (q,), (), c
        else:
            n_q, n_p = GATE_SPECS[head]
            args = tokens[1:]
            if len(args) < n_p:
                raise CircuitError(f"{head} expects {n_p} angle(s)", line)
            try:
                params = tuple(float(a) for a in args[:n_p])
            except ValueError:
                raise CircuitError(f"bad angle in '{stmt}'", line)
            qubits = tuple(_parse_index(t, 'q', line) for t in args[n_p:])
            if n_q is not None and len(qubits) != n_q:
                raise CircuitError(f"{head} expects {n_q} qubit(s), got {len(qubits)}", line)
            clbit = None

        for q in qubits:
            if q >= n_qubits:
                raise CircuitError(f"qubit q{q} out of range (qubits {n_qubits})", line)
            if q in measured and head != 'barrier':
                raise CircuitError(f"q{q} used after measurement", line)
        try:
            gate = Gate(head, qubits, params, clbit)
        except CircuitError as e:
            raise CircuitError(str(e), line)
        if head == 'measure':
            measured.add(qubits[0])
        gates.append(gate)

    if n_qubits is None or n_clbits is None:
        raise CircuitError("missing header 'qubits N; clbits M;'")
    try:
        return Circuit(n_qubits, n_clbits, gates, name)
    except CircuitError as e:
        raise CircuitError(str(e))


def emit_circuit(c):
    """Canonical text for a circuit; parse_circuit(emit_circuit(c)) == c."""
    lines = []
    if c.name:
        lines.append(f"# name: {c.name}")
    lines.append(f"qubits {c.n_qubits}; clbits {c.n_clbits};")
    for g in c.gates:
        if g.kind == 'measure':
            lines.append(f"measure q{g.qubits[0]} -> c{g.clbit};")
            continue
        parts = [g.kind] + [_format_angle(p) for p in g.params] + [f"q{q}" for q in g.qubits]
        lines.append(' '.join(parts) + ';')
    return '\n'.join(lines) + '\n'


# ---------------------------------------------------------------------------
# Matrices and the batched tensor kernel
# ---------------------------------------------------------------------------

def u3_matrix(theta, phi, lam):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([
        [c, -np.exp(1j * lam) * s],
        [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
    ], dtype=complex)


_SQ2 = 1 / math.sqrt(2)
_FIXED = {
    'h': np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    'x': np.array([[0, 1], [1, 0]], dtype=complex),
    'y': np.array([[0, -1j], [1j, 0]], dtype=complex),
    'z': np.diag([1, -1]).astype(complex),
    's': np.diag([1, 1j]),
    'sdg': np.diag([1, -1j]),
    't': np.diag([1, np.exp(1j * PI / 4)]),
    'tdg': np.diag([1, np.exp(-1j * PI / 4)]),
    'cx': np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    'cz': np.diag([1, 1, 1, -1]).astype(complex),
    'swap': np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}
_CCX = np.eye(8, dtype=complex)
_CCX[[6, 7]] = _CCX[[7, 6]]
_FIXED['ccx'] = _CCX


def gate_matrix(gate):
    """Matrix of a unitary gate; the first listed qubit is the most significant bit."""
    k, p = gate.kind, gate.params
    if k in _FIXED:
        return _FIXED[k]
    if k == 'u1':
        return np.diag([1, np.exp(1j * p[0])])
    if k == 'u2':
        return u3_matrix(PI / 2, p[0], p[1])
    if k == 'u3':
        return u3_matrix(*p)
    if k == 'rz':
        return np.diag([np.exp(-0.5j * p[0]), np.exp(0.5j * p[0])])
    if k == 'cu1':
        return np.diag([1, 1, 1, np.exp(1j * p[0])])
    raise CircuitError(f"{k} has no matrix")


def qubit_axis(q, n):
    """Tensor axis of qubit q in a batched state of shape (B,) + (2,) * n."""
    return n - q


def apply_matrix(state, matrix, qubits, n):
    """Apply a k-qubit matrix to every row of a batched state tensor."""
    k = len(qubits)
    tensor = matrix.reshape((2,) * (2 * k))
    axes = [qubit_axis(q, n) for q in qubits]
    out = np.tensordot(tensor, state, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(out, list(range(k)), axes)


def apply_gates(state, gates, n):
    for g in gates:
        if g.is_unitary:
            state = apply_matrix(state, gate_matrix(g), g.qubits, n)
    return state


def unitary_of(c):
    """Dense 2^n x 2^n unitary of a measurement-free circuit (n <= 10)."""
    if c.n_qubits > MAX_UNITARY_QUBITS:
        raise CircuitError(f"unitary_of supports at most {MAX_UNITARY_QUBITS} qubits, got {c.n_qubits}")
    if any(g.kind == 'measure' for g in c.gates):
        raise CircuitError("unitary_of: circuit contains measurements")
    dim = 2 ** c.n_qubits
    state = np.eye(dim, dtype=complex).reshape((dim,) + (2,) * c.n_qubits)
    state = apply_gates(state, c.gates, c.n_qubits)
    return state.reshape(dim, dim).T


def phase_fidelity(u, v):
    """|tr(U^dagger V)| / dim; 1 means equal up to global phase."""
    return float(abs(np.trace(u.conj().T @ v)) / u.shape[0])


# ---------------------------------------------------------------------------
# Decomposition and inversion
# ---------------------------------------------------------------------------

def _decompose_gate(g):
    k, q, p = g.kind, g.qubits, g.params
    if k in BASIS_KINDS:
        return [g]
    if k == 'h':
        return [u2(0.0, PI, q[0])]
    if k == 'x':
        return [u3(PI, 0.0, PI, q[0])]
    if k == 'y':
        return [u3(PI, PI / 2, PI / 2, q[0])]
    if k in ('z', 's', 'sdg', 't', 'tdg'):
        lam = {'z': PI, 's': PI / 2, 'sdg': -PI / 2, 't': PI / 4, 'tdg': -PI / 4}[k]
        return [u1(lam, q[0])]
    if k == 'rz':
        return [u1(p[0], q[0])]
    if k == 'cz':
        a, b = q
        return [u2(0.0, PI, b), cx(a, b), u2(0.0, PI, b)]
    if k == 'swap':
        a, b = q
        return [cx(a, b), cx(b, a), cx(a, b)]
    if k == 'cu1':
        a, b = q
        lam = p[0]
        return [u1(lam / 2, a), cx(a, b), u1(-lam / 2, b), cx(a, b), u1(lam / 2, b)]
    if k == 'ccx':
        a, b, t = q
        seq = [h(t), cx(b, t), Gate('tdg', (t,)), cx(a, t), Gate('t', (t,)), cx(b, t),
               Gate('tdg', (t,)), cx(a, t), Gate('t', (b,)), Gate('t', (t,)), h(t),
               cx(a, b), Gate('t', (a,)), Gate('tdg', (b,)), cx(a, b)]
        out = []
        for s in seq:
            out.extend(_decompose_gate(s))
        return out
    raise CircuitError(f"unknown gate kind '{k}'")


def decompose_to_basis(c):
    """Rewrite every convenience gate into {U1, U2, U3, CX, MEASURE, BARRIER}."""
    gates = []
    for g in c.gates:
        gates.extend(_decompose_gate(g))
    return c.with_gates(gates)


_SELF_INVERSE = frozenset({'cx', 'barrier', 'h', 'x', 'y', 'z', 'cz', 'swap', 'ccx'})
_SWAPPED_INVERSE = {'s': 'sdg', 'sdg': 's', 't': 'tdg', 'tdg': 't'}


def inverse_gate(g):
    k, p = g.kind, g.params
    if k == 'measure':
        raise CircuitError("cannot invert a circuit that contains measurements")
    if k in _SELF_INVERSE:
        return g
    if k in _SWAPPED_INVERSE:
        return Gate(_SWAPPED_INVERSE[k], g.qubits)
    if k in ('u1', 'rz', 'cu1'):
        return Gate(k, g.qubits, (-p[0],))
    if k == 'u2':
        phi, lam = p
        return Gate('u2', g.qubits, (-lam - PI, -phi + PI))
    if k == 'u3':
        theta, phi, lam = p
        return Gate('u3', g.qubits, (-theta, -lam, -phi))
    raise CircuitError(f"unknown gate kind '{k}'")


def inverse(c):
    """Circuit implementing the inverse unitary (no measurements allowed)."""
    return c.with_gates([inverse_gate(g) for g in reversed(c.gates)])


def zyz_decompose(matrix, qubit, atol=1e-10):
    """
    Basis gate realising a 2x2 unitary up to global phase.

    Returns U1 when the matrix is diagonal, U2 when theta = pi/2, U3 otherwise,
    and None for the identity.
    """
    a, b = matrix[0, 0], matrix[0, 1]
    c, d = matrix[1, 0], matrix[1, 1]
    if abs(c) <= atol:
        lam = normalize_angle(np.angle(d) - np.angle(a))
        return None if abs(lam) <= atol else u1(lam, qubit)
    theta = 2 * math.atan2(abs(c), abs(a))
    if abs(a) <= atol:
        ref = np.angle(-b)
        phi, lam = np.angle(c) - ref, 0.0
    else:
        ref = np.angle(a)
        phi, lam = np.angle(c) - ref, np.angle(-b) - ref
    if abs(theta - PI / 2) <= atol:
        return u2(phi, lam, qubit)
    return u3(theta, phi, lam, qubit)


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

def gate_stats(c):
    """Gate counts and depth by greedy wire layering (MEASURE takes a layer, BARRIER breaks)."""
    level = [0] * c.n_qubits
    count_1q = count_2q = count_3q = 0
    measured, used = set(), set()
    for g in c.gates:
        if g.kind == 'barrier':
            top = max(level) if level else 0
            level = [top] * c.n_qubits
            continue
        used.update(g.qubits)
        if g.kind == 'measure':
            measured.add(g.qubits[0])
        elif g.arity == 1:
            count_1q += 1
        elif g.arity == 2:
            count_2q += 1
        else:
            count_3q += 1
        layer = max(level[q] for q in g.qubits) + 1
        for q in g.qubits:
            level[q] = layer
    return GateStats(count_1q, count_2q, count_3q, max(level) if level else 0,
                     frozenset(measured), frozenset(used))
