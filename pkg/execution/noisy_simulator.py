"""
Shot-based statevector simulation of basis circuits under ground-truth noise.

Trajectories are simulated in vectorised blocks: a block is a batch of
statevectors of shape (B, 2, ..., 2). After every single-qubit gate a random
X/Y/Z is inserted with probability p_gate_1q; after every CX one of the 15
non-identity two-qubit Paulis with probability p_gate_2q. Measurement is
terminal, so outcomes are sampled from the final state and the classical bit is
then flipped with the asymmetric readout probability.

The circuit is split into components of qubits linked by two-qubit gates; each
component is simulated on its own statevector (no cross-talk in the model).
Block b of component k draws from SeedSequence([seed, b, k]). The block size is
min(JITQ_SHOT_BLOCK, MAX_BLOCK_AMPLITUDES // 2**widest component), so a seed
reproduces its counts only under the same JITQ_SHOT_BLOCK. The thread count
(JITQ_WORKERS) does not affect them.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from networkx.utils import UnionFind

from execution import settings
from execution.circuit_core import Circuit, apply_matrix, gate_matrix
from execution.errors import CouplingError, SimulationError, ValidationError

logger = logging.getLogger(__name__)

MAX_COMPONENT_QUBITS = 24
MAX_BLOCK_AMPLITUDES = 2 ** 24
NORM_ATOL = 1e-9
PROB_CUTOFF = 1e-12


@dataclass(frozen=True)
class Counts:
    """Readout histogram; bitstrings put clbit 0 rightmost."""
    histogram: dict
    shots: int
    n_clbits: int

    def __post_init__(self):
        if sum(self.histogram.values()) != self.shots:
            raise SimulationError(f"histogram sums to {sum(self.histogram.values())}, expected {self.shots}")
        for key in self.histogram:
            if len(key) != self.n_clbits:
                raise SimulationError(f"bitstring '{key}' has width {len(key)}, expected {self.n_clbits}")

    def get(self, bitstring):
        return self.histogram.get(bitstring, 0)

    def probabilities(self):
        return {k: v / self.shots for k, v in self.histogram.items()}

    def bit_ones(self, clbit):
        """Number of shots in which `clbit` reads 1."""
        pos = self.n_clbits - 1 - clbit
        return sum(v for k, v in self.histogram.items() if k[pos] == '1')

    def marginal(self, clbits):
        """Counts over a sub-register; clbits[0] becomes the rightmost bit."""
        out = {}
        for key, v in self.histogram.items():
            sub = ''.join(key[self.n_clbits - 1 - c] for c in reversed(clbits))
            out[sub] = out.get(sub, 0) + v
        return Counts(dict(sorted(out.items())), self.shots, len(clbits))


def counts_to_text(counts):
    lines = [f"shots {counts.shots}"]
    lines += [f"{k} {v}" for k, v in sorted(counts.histogram.items())]
    return '\n'.join(lines) + '\n'


def counts_from_text(text):
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith('shots '):
        raise ValidationError("counts text must start with 'shots N'")
    shots = int(lines[0].split()[1])
    hist = {}
    for ln in lines[1:]:
        key, value = ln.split()
        hist[key] = int(value)
    width = len(next(iter(hist))) if hist else 0
    return Counts(hist, shots, width)


@dataclass(frozen=True)
class ExecutionSpec:
    circuit: Circuit
    shots: int
    seed: int
    exec_time_min: float

    def __post_init__(self):
        if self.shots < 1:
            raise ValidationError(f"shots must be >= 1, got {self.shots}")
        if not self.circuit.is_basis():
            raise ValidationError("execution needs a basis circuit (u1/u2/u3/cx/measure/barrier)")


def derive_seed(*keys):
    """Stable 32-bit seed from a tuple of non-negative integers."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def reduce_to_active(c):
    """Relabel the circuit onto the qubits it actually touches; returns (circuit, physical->dense)."""
    active = sorted({q for g in c.gates for q in g.qubits})
    mapping = {q: i for i, q in enumerate(active)}
    gates = [g.remap(mapping) for g in c.gates]
    return Circuit(max(1, len(active)), c.n_clbits, gates, c.name), mapping


def components(c):
    """Groups of qubits connected by multi-qubit gates, ordered by smallest qubit."""
    uf = UnionFind()
    for g in c.gates:
        if g.kind == 'barrier':
            continue
        for q in g.qubits:
            uf[q]  # registers single-qubit wires
        if len(g.qubits) > 1:
            uf.union(*g.qubits)
    return sorted((sorted(s) for s in uf.to_sets()), key=lambda s: s[0])


@dataclass
class _Component:
    qubits: list
    gates: list = field(default_factory=list)
    measures: list = field(default_factory=list)

    @property
    def width(self):
        return len(self.qubits)


def _split(c):
    comps = [_Component(qs) for qs in components(c)]
    owner = {}
    for i, comp in enumerate(comps):
        for q in comp.qubits:
            owner[q] = i
    for g in c.gates:
        if g.kind == 'barrier':
            continue
        comp = comps[owner[g.qubits[0]]]
        local = tuple(comp.qubits.index(q) for q in g.qubits)
        if g.kind == 'measure':
            comp.measures.append((local[0], g.qubits[0], g.clbit))
        else:
            comp.gates.append((g, local, gate_matrix(g)))
    for comp in comps:
        if comp.width > MAX_COMPONENT_QUBITS:
            raise ValidationError(f"{comp.width} entangled qubits exceed the simulator limit of {MAX_COMPONENT_QUBITS}")
    return comps


def _zero_state(rows, k):
    state = np.zeros((rows,) + (2,) * k, dtype=complex)
    state[(slice(None),) + (0,) * k] = 1.0
    return state


def _pauli(state, rows, local_q, k, pauli):
    """Apply Pauli 1=X, 2=Y, 3=Z (up to phase) to the selected rows."""
    if rows.size == 0:
        return
    axis = k - local_q
    if pauli in (1, 2):
        state[rows] = np.flip(state[rows], axis=axis)
    if pauli in (2, 3):
        sel = [rows] + [slice(None)] * k
        sel[axis] = 1
        state[tuple(sel)] *= -1


def _insert_noise(state, rng, p, local, k):
    rows_total = state.shape[0]
    hit = rng.random(rows_total) < p
    if len(local) == 1:
        kinds = rng.integers(1, 4, rows_total)
        for pauli in (1, 2, 3):
            _pauli(state, np.flatnonzero(hit & (kinds == pauli)), local[0], k, pauli)
        return
    kinds = rng.integers(1, 16, rows_total)
    for idx in range(1, 16):
        rows = np.flatnonzero(hit & (kinds == idx))
        if rows.size == 0:
            continue
        _pauli(state, rows, local[0], k, idx // 4)
        _pauli(state, rows, local[1], k, idx % 4)


def _sample_outcomes(state, rng, k):
    rows = state.shape[0]
    probs = np.abs(state.reshape(rows, -1)) ** 2
    norms = probs.sum(axis=1)
    if np.any(np.abs(norms - 1.0) > NORM_ATOL):
        raise SimulationError(f"statevector norm drifted to {norms[np.argmax(np.abs(norms - 1))]!r}")
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(rows) * norms
    idx = (cdf < u[:, None]).sum(axis=1)
    return np.minimum(idx, 2 ** k - 1)


def _run_component_block(comp, rows, seed, block, comp_index, noise_arrays, edge_index):
    p01, p10, p1q, p2q = noise_arrays
    rng = np.random.default_rng(np.random.SeedSequence([seed, block, comp_index]))
    k = comp.width
    state = _zero_state(rows, k)
    for gate, local, matrix in comp.gates:
        state = apply_matrix(state, matrix, local, k)
        if gate.arity == 1:
            p = p1q[gate.qubits[0]]
        else:
            a, b = gate.qubits
            p = p2q[edge_index[(min(a, b), max(a, b))]]
        if p > 0:
            state = np.ascontiguousarray(state)
            _insert_noise(state, rng, p, local, k)
    bits = {}
    if comp.measures:
        idx = _sample_outcomes(state, rng, k)
        for local_q, phys, clbit in comp.measures:
            bit = (idx >> local_q) & 1
            flip_p = np.where(bit == 0, p01[phys], p10[phys])
            flips = rng.random(rows) < flip_p
            bits[clbit] = (bit ^ flips).astype(np.int64)
    return bits


def _block_sizes(shots, comps):
    widest = max((c.width for c in comps), default=0)
    block = max(1, min(settings.SHOT_BLOCK, MAX_BLOCK_AMPLITUDES // (2 ** widest)))
    sizes = [block] * (shots // block)
    if shots % block:
        sizes.append(shots % block)
    return sizes


def _histogram(values, n_clbits):
    uniq, cnt = np.unique(values, return_counts=True)
    if n_clbits == 0:
        return {'': int(cnt.sum())}
    return {format(int(v), f'0{n_clbits}b'): int(n) for v, n in zip(uniq, cnt)}


def _check_against_device(c, topology):
    for g in c.gates:
        for q in g.qubits:
            if q >= topology.n_qubits:
                raise ValidationError(f"{g.kind} uses unknown qubit {q} on {topology.name}")
        if g.kind == 'cx' and not topology.has_edge(*g.qubits):
            a, b = g.qubits
            raise CouplingError(f"cx q{a} q{b} is not on a coupling of {topology.name}")


def run_noisy(spec, noise):
    """Monte Carlo execution of a physical basis circuit at noise.clock_min."""
    c = spec.circuit
    _check_against_device(c, noise.topology)
    if abs(noise.clock_min - spec.exec_time_min) > 1e-9:
        raise ValidationError(f"noise clock is {noise.clock_min} min but execution is at {spec.exec_time_min} min")

    comps = _split(c)
    noise_arrays = (noise.p_read_0to1, noise.p_read_1to0, noise.p_gate_1q, noise.p_gate_2q)
    edge_index = noise.topology.edge_index
    sizes = _block_sizes(spec.shots, comps)

    def run_block(b):
        values = np.zeros(sizes[b], dtype=np.int64)
        for k, comp in enumerate(comps):
            for clbit, bits in _run_component_block(comp, sizes[b], spec.seed, b, k,
                                                    noise_arrays, edge_index).items():
                values |= bits << clbit
        return values

    if settings.WORKERS > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=settings.WORKERS) as pool:
            blocks = list(pool.map(run_block, range(len(sizes))))
    else:
        blocks = [run_block(b) for b in range(len(sizes))]

    values = np.concatenate(blocks) if blocks else np.zeros(0, dtype=np.int64)
    logger.debug("run_noisy %s: %d shots in %d blocks over %d components",
                 c.name or '<circuit>', spec.shots, len(sizes), len(comps))
    return Counts(_histogram(values, c.n_clbits), spec.shots, c.n_clbits)


def execute(circuit, noise, shots, seed):
    """run_noisy at the noise model's current clock."""
    return run_noisy(ExecutionSpec(circuit, shots, seed, noise.clock_min), noise)


def run_noiseless(c):
    """Exact output distribution over the clbits (bitstring -> probability)."""
    if not c.is_basis():
        raise ValidationError("run_noiseless needs a basis circuit")
    dist = {0: 1.0}
    for comp in _split(c):
        k = comp.width
        state = _zero_state(1, k)
        for _, local, matrix in comp.gates:
            state = apply_matrix(state, matrix, local, k)
        if not comp.measures:
            continue
        probs = np.abs(state.reshape(-1)) ** 2
        part = {}
        for idx in np.flatnonzero(probs > PROB_CUTOFF):
            value = 0
            for local_q, _, clbit in comp.measures:
                value |= ((int(idx) >> local_q) & 1) << clbit
            part[value] = part.get(value, 0.0) + float(probs[idx])
        dist = {a | b: pa * pb for a, pa in dist.items() for b, pb in part.items() if pa * pb > PROB_CUTOFF}
    width = c.n_clbits
    out = {}
    for value, p in dist.items():
        key = format(value, f'0{width}b') if width else ''
        out[key] = out.get(key, 0.0) + p
    return dict(sorted(out.items()))
