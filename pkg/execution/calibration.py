"""
Error-measurement jobs: readout calibration and randomized benchmarking.

A calibration job is two readout circuits (all qubits in |0>, all in |1>) plus
two-qubit RB on every coupling. Couplings are grouped into matchings so that
one device-wide circuit benchmarks a whole batch of edges at once. The RB
decay is fitted per edge and converted to a per-CX error for the snapshot.
"""

import logging
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from scipy.optimize import lsq_linear, minimize_scalar

from execution.circuit_core import PI, Circuit, measure, u3
from execution.clifford_group import (
    Tableau, clifford_1q_from_tableau, inverse_clifford2,
    random_clifford1, random_clifford2,
)
from execution.errors import CalibrationError
from execution.noisy_simulator import derive_seed, execute
from execution.snapshot import CalibrationSnapshot, EdgeCalibration, QubitCalibration

logger = logging.getLogger(__name__)

DEFAULT_LENGTHS = (1, 4, 16, 32, 64)
DEFAULT_SAMPLES = 5
MAX_JOB_CIRCUITS = 900
P_CEILING = 0.5 - 1e-9

# Seed stream tags
_READOUT, _RB2Q, _RB1Q = 1, 2, 3


# ---------------------------------------------------------------------------
# Readout
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReadoutEstimate:
    qubit: int
    p_read_0to1: float
    p_read_1to0: float

    @property
    def readout_err(self):
        return (self.p_read_0to1 + self.p_read_1to0) / 2


def readout_cal_circuits(topology):
    """(all-|0> circuit, all-|1> circuit), every qubit measured into its own clbit."""
    n = topology.n_qubits
    zeros = Circuit(n, n, [measure(q, q) for q in range(n)], name=f"readout0-{topology.name}")
    ones = Circuit(n, n, [u3(PI, 0.0, PI, q) for q in range(n)] + [measure(q, q) for q in range(n)],
                   name=f"readout1-{topology.name}")
    return zeros, ones


def estimate_readout(counts_a, counts_b):
    """Per-qubit readout error from the paired calibration counts."""
    if counts_a.shots == 0 or counts_b.shots == 0:
        raise CalibrationError("readout calibration counts have 0 shots")
    if counts_a.n_clbits != counts_b.n_clbits:
        raise CalibrationError(f"readout counts width mismatch: {counts_a.n_clbits} vs {counts_b.n_clbits}")
    out = []
    for q in range(counts_a.n_clbits):
        p01 = counts_a.bit_ones(q) / counts_a.shots
        p10 = (counts_b.shots - counts_b.bit_ones(q)) / counts_b.shots
        out.append(ReadoutEstimate(q, p01, p10))
    return out


# ---------------------------------------------------------------------------
# Edge batches (proper edge colouring)
# ---------------------------------------------------------------------------

class _EdgeColoring:
    def __init__(self, graph):
        self.at = {v: {} for v in graph.nodes}
        self.color = {}

    def set(self, a, b, c):
        self.at[a][c] = b
        self.at[b][c] = a
        self.color[(min(a, b), max(a, b))] = c

    def unset(self, a, b):
        c = self.color.pop((min(a, b), max(a, b)))
        del self.at[a][c]
        del self.at[b][c]
        return c

    def get(self, a, b):
        return self.color.get((min(a, b), max(a, b)))

    def free(self, v):
        c = 0
        while c in self.at[v]:
            c += 1
        return c

    def is_free(self, v, c):
        return c not in self.at[v]

    def path(self, start, first, second):
        """Maximal path from `start` whose edges alternate colours first, second, first, ..."""
        edges, v, want = [], start, first
        while want in self.at[v]:
            w = self.at[v][want]
            edges.append((v, w, want))
            v, want = w, (second if want == first else first)
        return edges

    def swap_path(self, edges, c, d):
        for a, b, _ in edges:
            self.unset(a, b)
        for a, b, col in edges:
            self.set(a, b, d if col == c else c)


def _color_bipartite(graph, edges):
    """Delta colours via alternating-path recolouring (bipartite graphs only)."""
    col = _EdgeColoring(graph)
    for u, v in edges:
        a, b = col.free(u), col.free(v)
        if not col.is_free(v, a):
            col.swap_path(col.path(v, a, b), a, b)
        col.set(u, v, a)
    return col.color


def _color_misra_gries(graph, edges):
    """At most Delta + 1 colours for any simple graph."""
    col = _EdgeColoring(graph)
    for u, v in edges:
        fan = [v]
        while True:
            last = fan[-1]
            nxt = None
            for x in sorted(graph.neighbors(u)):
                c = col.get(u, x)
                if x not in fan and c is not None and col.is_free(last, c):
                    nxt = x
                    break
            if nxt is None:
                break
            fan.append(nxt)
        c, d = col.free(u), col.free(fan[-1])
        if c != d:
            col.swap_path(col.path(u, d, c), d, c)
        w_idx = 0
        for i, f in enumerate(fan):
            if i > 0:
                prev_ok = col.get(u, f) is not None and col.is_free(fan[i - 1], col.get(u, f))
                if not prev_ok:
                    break
            if col.is_free(f, d):
                w_idx = i
                break
        for i in range(w_idx):
            shifted = col.unset(u, fan[i + 1])
            col.set(u, fan[i], shifted)
        col.set(u, fan[w_idx], d)
    return col.color


def edge_batches(topology):
    """Partition the couplings into matchings; Delta batches for bipartite devices, at most Delta + 1 otherwise."""
    graph = topology.graph
    edges = list(topology.edges)
    if not edges:
        return []
    colors = _color_bipartite(graph, edges) if nx.is_bipartite(graph) else _color_misra_gries(graph, edges)
    batches = {}
    for e, c in colors.items():
        batches.setdefault(c, []).append(e)
    return [sorted(batches[c]) for c in sorted(batches)]


# ---------------------------------------------------------------------------
# Randomized benchmarking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RBSequence:
    circuit: Circuit
    m: int
    sample: int
    n_cliffords: int
    n_cx: int
    n_1q: int


def rb_circuits(edge, lengths=DEFAULT_LENGTHS, samples=DEFAULT_SAMPLES, seed=0):
    """
    Two-qubit RB sequences for one coupling, on local qubits 0 (edge[0]) and 1 (edge[1]).

    Each circuit is m random Cliffords followed by the Clifford that inverts
    their product, then both qubits are measured; the ideal outcome is "00".
    """
    lengths = list(lengths)
    if len(set(lengths)) < 2 or lengths != sorted(set(lengths)) or lengths[0] < 1:
        raise CalibrationError(f"RB lengths must be >= 2 strictly increasing positive values, got {lengths}")
    a, b = edge
    rng = np.random.default_rng(np.random.SeedSequence([seed, _RB2Q, a, b]))
    out = []
    for m in lengths:
        for s in range(samples):
            tab = Tableau.identity(2)
            gates = []
            for _ in range(m):
                cliff = random_clifford2(rng)
                gates.extend(cliff.gates)
                tab = tab.then(cliff.tableau)
            gates.extend(inverse_clifford2(tab).gates)
            n_cx = sum(1 for g in gates if g.kind == 'cx')
            gates += [measure(0, 0), measure(1, 1)]
            circ = Circuit(2, 2, gates, name=f"rb-{a}-{b}-m{m}-s{s}")
            out.append(RBSequence(circ, m, s, m + 1, n_cx, len(gates) - 2 - n_cx))
    return out


def rb_1q_circuits(n_qubits, lengths=DEFAULT_LENGTHS, samples=DEFAULT_SAMPLES, seed=0):
    """Simultaneous single-qubit RB: one circuit per (m, sample), an independent sequence per qubit."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, _RB1Q]))
    out = []
    for m in lengths:
        for s in range(samples):
            gates = []
            for q in range(n_qubits):
                tab = Tableau.identity(1)
                for _ in range(m):
                    e = random_clifford1(rng)
                    gates.extend(e.gates(q))
                    tab = tab.then(e.tableau)
                gates.extend(clifford_1q_from_tableau(tab.inverse()).gates(q))
            n_1q = len(gates)
            gates += [measure(q, q) for q in range(n_qubits)]
            circ = Circuit(n_qubits, n_qubits, gates, name=f"rb1q-m{m}-s{s}")
            out.append(RBSequence(circ, m, s, n_qubits * (m + 1), 0, n_1q))
    return out


@dataclass(frozen=True)
class DecayFit:
    A: float
    alpha: float
    B: float

    def predict(self, m):
        return self.A * np.power(self.alpha, np.asarray(m, dtype=float)) + self.B


def _linear_part(alpha, m, y):
    design = np.column_stack([np.power(alpha, m), np.ones_like(m)])
    res = lsq_linear(design, y, bounds=(0.0, 1.0), method='bvls')
    return res.x, float(np.sum((design @ res.x - y) ** 2))


def decay_residual(fit, points):
    m = np.array([p[0] for p in points], dtype=float)
    y = np.array([p[1] for p in points], dtype=float)
    return float(np.sum((fit.predict(m) - y) ** 2))


def fit_decay(points):
    """
    Least-squares fit of y(m) = A * alpha^m + B with alpha in (0, 1], A and B in [0, 1].

    alpha is located on a grid and refined by bounded Brent search; A and B come
    from a bounded linear least-squares solve at each alpha.
    """
    m = np.array([p[0] for p in points], dtype=float)
    y = np.array([p[1] for p in points], dtype=float)
    if len(set(m.tolist())) < 3:
        raise CalibrationError(f"fit_decay needs >= 3 distinct lengths, got {sorted(set(m.tolist()))}")
    if np.any(y < 0) or np.any(y > 1):
        raise CalibrationError("survival probabilities must lie in [0, 1]")
    if np.ptp(y) < 1e-12:
        return DecayFit(0.0, 1.0, float(y[0]))

    grid = np.unique(np.concatenate([np.linspace(0.01, 0.9, 90), 1 - np.geomspace(0.1, 1e-7, 240), [1.0]]))
    sse = np.array([_linear_part(a, m, y)[1] for a in grid])
    i = int(np.argmin(sse))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    best_alpha, best_sse = grid[i], sse[i]
    if hi > lo:
        res = minimize_scalar(lambda a: _linear_part(a, m, y)[1], bounds=(lo, hi), method='bounded',
                              options={'xatol': 1e-13})
        if res.fun <= best_sse:
            best_alpha = float(res.x)
    (a_coef, b_coef), _ = _linear_part(best_alpha, m, y)
    return DecayFit(float(a_coef), float(best_alpha), float(b_coef))


def epc_from_alpha(alpha):
    """Two-qubit error per Clifford: (3/4)(1 - alpha)."""
    if not 0 < alpha <= 1:
        raise CalibrationError(f"alpha must lie in (0, 1], got {alpha}")
    return 0.75 * (1 - alpha)


def per_cx_error(alpha, n_cx, n_1q, p_1q):
    """
    Invert alpha_clifford = alpha_cx^n_cx * alpha_g^n_1q for the per-CX Pauli error.

    A uniform two-qubit Pauli error with probability p has alpha = 1 - 16p/15;
    a single-qubit X/Y/Z error with probability p seen on two qubits has the
    same form, so alpha_g = 1 - 16 p_1q / 15.
    """
    if n_cx <= 0:
        raise CalibrationError("RB sequences contain no CX")
    alpha_g = max(1 - 16 * p_1q / 15, 1e-12)
    ratio = alpha / alpha_g ** n_1q
    alpha_cx = min(max(ratio, 1e-12), 1.0) ** (1 / n_cx)
    return 15 / 16 * (1 - alpha_cx)


@dataclass(frozen=True)
class RBRun:
    edge: tuple
    lengths: tuple
    samples: int
    survival: np.ndarray
    fit: DecayFit
    cx_per_clifford: float
    gates_1q_per_clifford: float
    error_per_cx: float = None

    @property
    def epc(self):
        return epc_from_alpha(self.fit.alpha)

    @property
    def mean_survival(self):
        return [(m, float(self.survival[i].mean())) for i, m in enumerate(self.lengths)]


def analyse_rb(edge, sequences, survival, p_1q_prior):
    """Fit one edge's survival table (rows = lengths, columns = samples) into an RBRun."""
    lengths = tuple(sorted({s.m for s in sequences}))
    samples = survival.shape[1]
    points = [(m, float(survival[i].mean())) for i, m in enumerate(lengths)]
    fit = fit_decay(points)
    cliffords = sum(s.n_cliffords for s in sequences)
    n_cx = sum(s.n_cx for s in sequences) / cliffords
    n_1q = sum(s.n_1q for s in sequences) / cliffords
    err = per_cx_error(fit.alpha, n_cx, n_1q, p_1q_prior)
    return RBRun(tuple(edge), lengths, samples, survival, fit, n_cx, n_1q, err)


# ---------------------------------------------------------------------------
# Snapshot assembly and the full job
# ---------------------------------------------------------------------------

def _clamp(value, what):
    if value >= P_CEILING:
        logger.warning("%s estimate %.4f clamped below 0.5", what, value)
        return P_CEILING
    return max(0.0, float(value))


def build_snapshot(topology, readout, edge_errors, gate_err_1q, timestamp_min, origin='estimated'):
    """
    Assemble a CalibrationSnapshot.

    readout: ReadoutEstimate per qubit; edge_errors: {(a, b): per-CX error or RBRun};
    gate_err_1q: a scalar prior or one value per qubit.
    """
    by_qubit = {r.qubit: r for r in readout}
    if np.isscalar(gate_err_1q):
        gate_err_1q = [float(gate_err_1q)] * topology.n_qubits
    if len(gate_err_1q) != topology.n_qubits:
        raise CalibrationError(f"gate_err_1q has {len(gate_err_1q)} values for {topology.n_qubits} qubits")
    qubits = []
    for q in range(topology.n_qubits):
        if q not in by_qubit:
            raise CalibrationError(f"no readout estimate for qubit {q}")
        r = by_qubit[q]
        p01, p10 = _clamp(r.p_read_0to1, f"q{q} p_read_0to1"), _clamp(r.p_read_1to0, f"q{q} p_read_1to0")
        qubits.append(QubitCalibration(q, p01, p10, _clamp(r.readout_err, f"q{q} readout_err"),
                                       _clamp(gate_err_1q[q], f"q{q} gate_err_1q")))
    errors = {(min(a, b), max(a, b)): v for (a, b), v in edge_errors.items()}
    edges = []
    for a, b in topology.edges:
        if (a, b) not in errors:
            raise CalibrationError(f"no two-qubit error estimate for edge ({a},{b})")
        v = errors[(a, b)]
        value = v.error_per_cx if isinstance(v, RBRun) else v
        edges.append(EdgeCalibration(a, b, _clamp(value, f"edge ({a},{b})")))
    return CalibrationSnapshot(float(timestamp_min), topology.name, origin, qubits, edges)


def calibration_budget(topology, lengths=DEFAULT_LENGTHS, samples=DEFAULT_SAMPLES, rb_1q=False):
    """Number of circuits in one calibration job."""
    per_batch = len(lengths) * samples
    total = 2 + len(edge_batches(topology)) * per_batch
    return total + (per_batch if rb_1q else 0)


@dataclass
class CalibrationJob:
    timestamp_min: float
    n_circuits: int
    batches: list
    readout: list
    rb_runs: dict = field(default_factory=dict)
    rb_1q: dict = field(default_factory=dict)


def _place(local, qubits, clbit_offset):
    """Map a local RB circuit onto device qubits and a clbit window."""
    mapping = {i: q for i, q in enumerate(qubits)}
    gates = []
    for g in local.gates:
        g2 = g.remap(mapping)
        if g.kind == 'measure':
            g2 = measure(g2.qubits[0], g.clbit + clbit_offset)
        gates.append(g2)
    return gates


def run_calibration(noise, shots=4096, lengths=DEFAULT_LENGTHS, samples=DEFAULT_SAMPLES, seed=0,
                    gate_err_1q_prior=1.5e-3, rb_1q=False):
    """Execute a full calibration job at the noise model's clock; returns (snapshot, job)."""
    topo = noise.topology
    lengths = tuple(lengths)
    budget = calibration_budget(topo, lengths, samples, rb_1q)
    if budget > MAX_JOB_CIRCUITS:
        raise CalibrationError(f"calibration job needs {budget} circuits (limit {MAX_JOB_CIRCUITS})")
    t = noise.clock_min
    stamp = int(round(t * 1000))

    zeros, ones = readout_cal_circuits(topo)
    counts_a = execute(zeros, noise, shots, derive_seed(seed, _READOUT, stamp, 0))
    counts_b = execute(ones, noise, shots, derive_seed(seed, _READOUT, stamp, 1))
    readout = estimate_readout(counts_a, counts_b)

    p_1q = [gate_err_1q_prior] * topo.n_qubits
    job = CalibrationJob(t, budget, edge_batches(topo), readout)

    if rb_1q:
        seqs = rb_1q_circuits(topo.n_qubits, lengths, samples, derive_seed(seed, _RB1Q, stamp))
        survival = np.zeros((topo.n_qubits, len(lengths), samples))
        for i, s in enumerate(seqs):
            counts = execute(s.circuit, noise, shots, derive_seed(seed, _RB1Q, stamp, i))
            for q in range(topo.n_qubits):
                survival[q, lengths.index(s.m), s.sample] = 1 - counts.bit_ones(q) / shots
        gates_per_clifford = sum(s.n_1q for s in seqs) / sum(s.n_cliffords for s in seqs)
        for q in range(topo.n_qubits):
            fit = fit_decay([(m, float(survival[q, i].mean())) for i, m in enumerate(lengths)])
            alpha_gate = fit.alpha ** (1 / gates_per_clifford) if gates_per_clifford > 0 else 1.0
            p_1q[q] = 0.75 * (1 - alpha_gate)
            job.rb_1q[q] = fit

    for b_idx, batch in enumerate(job.batches):
        per_edge = {e: rb_circuits(e, lengths, samples, derive_seed(seed, _RB2Q, stamp, b_idx)) for e in batch}
        n_clbits = 2 * len(batch)
        survival = {e: np.zeros((len(lengths), samples)) for e in batch}
        for j in range(len(lengths) * samples):
            gates = []
            for i, e in enumerate(batch):
                gates += _place(per_edge[e][j].circuit, e, 2 * i)
            merged = Circuit(topo.n_qubits, n_clbits, gates, name=f"rb-batch{b_idx}-{j}")
            counts = execute(merged, noise, shots, derive_seed(seed, _RB2Q, stamp, b_idx, j))
            for i, e in enumerate(batch):
                seq = per_edge[e][j]
                survival[e][lengths.index(seq.m), seq.sample] = counts.marginal([2 * i, 2 * i + 1]).get('00') / shots
        for e in batch:
            a, b = e
            prior = (p_1q[a] + p_1q[b]) / 2
            job.rb_runs[e] = analyse_rb(e, per_edge[e], survival[e], prior)

    snapshot = build_snapshot(topo, readout, job.rb_runs, p_1q, t)
    logger.info("calibration at t=%.1f min: %d circuits, %d batches", t, budget, len(job.batches))
    return snapshot, job
