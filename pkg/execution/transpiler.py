"""
Noise-aware transpilation: layout selection, swap routing, peephole
optimisation and equivalence checking.

Every error probability p enters as -ln(1 - p), so a circuit's cost is the
negative log of its estimated success probability. A CX between virtual qubits
placed on non-adjacent physical qubits is charged the cheapest way of bringing
them together: 3 CX per swap along shortest weighted paths plus the CX itself.
"""

import hashlib
import itertools
import logging
import math
import re
from dataclasses import dataclass
from functools import lru_cache

import networkx as nx
import numpy as np

from execution.circuit_core import (
    Circuit, SINGLE_QUBIT_BASIS, apply_matrix, cx, decompose_to_basis, gate_matrix,
    measure, normalize_angle, u1, unitary_of, zyz_decompose,
)
from execution.errors import LayoutError, ValidationError
from execution.snapshot import check_coverage, uniform_snapshot

logger = logging.getLogger(__name__)

EXACT_MAX_VIRTUAL = 6
EXACT_MAX_PHYSICAL = 12
ANNEAL_ITERATIONS = 4000
ANNEAL_RESTARTS = 8
ANNEAL_DECAY = 0.97
ANNEAL_DECAY_EVERY = 20
ANNEAL_PROBE_LAYOUTS = 64
HOP_PENALTY = 1e-9
SWAP_CX = 3
VERIFY_MAX_VIRTUAL = 6
VERIFY_MAX_ACTIVE = 20
EPS = 1e-12


def neg_log_fidelity(p):
    """Negative log fidelity of one operation with error probability p."""
    return -math.log1p(-p)


@dataclass(frozen=True)
class Layout:
    """Injective map virtual qubit i -> physical[i] on a device with n_physical qubits."""
    physical: tuple
    n_physical: int

    def __post_init__(self):
        object.__setattr__(self, 'physical', tuple(int(p) for p in self.physical))
        if len(set(self.physical)) != len(self.physical):
            raise LayoutError(f"layout is not injective: {self.physical}")
        for v, p in enumerate(self.physical):
            if not 0 <= p < self.n_physical:
                raise LayoutError(f"v{v} -> p{p} is outside the device (0..{self.n_physical - 1})")

    @classmethod
    def identity(cls, n_virtual, n_physical):
        if n_virtual > n_physical:
            raise LayoutError(f"circuit needs {n_virtual} qubits but the device has {n_physical}")
        return cls(tuple(range(n_virtual)), n_physical)

    def __getitem__(self, v):
        return self.physical[v]

    def __len__(self):
        return len(self.physical)

    def as_dict(self):
        return dict(enumerate(self.physical))

    def to_text(self):
        return ''.join(f"v{v} -> p{p}\n" for v, p in enumerate(self.physical))


_LAYOUT_LINE = re.compile(r'^v(\d+)\s*->\s*p(\d+)$')


def layout_from_text(text, n_physical):
    """Parse a `v<i> -> p<j>` sidecar; virtual ids must be 0..k-1."""
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        m = _LAYOUT_LINE.match(line)
        if not m:
            raise LayoutError(f"line {lineno}: expected 'v<i> -> p<j>', got '{line}'")
        v, p = int(m.group(1)), int(m.group(2))
        if v in pairs:
            raise LayoutError(f"line {lineno}: v{v} mapped twice")
        pairs[v] = p
    if sorted(pairs) != list(range(len(pairs))):
        raise LayoutError(f"layout virtual ids must be 0..{len(pairs) - 1}")
    return Layout(tuple(pairs[v] for v in range(len(pairs))), n_physical)


def layout_id(layout):
    """Short content hash of the sorted virtual->physical pairs."""
    text = ','.join(f"v{v}:p{p}" for v, p in enumerate(layout.physical))
    return hashlib.sha1(text.encode()).hexdigest()[:10]


@dataclass(frozen=True)
class TranspiledCircuit:
    physical_circuit: Circuit
    initial_layout: Layout
    final_layout: Layout
    cost: float
    snapshot_id: float
    level: int
    n_swaps: int = 0


# ---------------------------------------------------------------------------
# Cost model
# ---------------------------------------------------------------------------

class CostModel:
    """Edge weights, pair costs and unary costs derived from one snapshot."""

    def __init__(self, topology, snapshot):
        check_coverage(snapshot, topology)
        self.topology = topology
        n = topology.n_qubits
        g = nx.Graph()
        g.add_nodes_from(range(n))
        for a, b in topology.edges:
            g.add_edge(a, b, w=neg_log_fidelity(snapshot.epc(a, b)))
        self.graph = g
        self.weight = {e: g.edges[e]['w'] for e in topology.edges}
        dist = nx.floyd_warshall_numpy(g, nodelist=list(range(n)), weight='w')
        pair = np.full((n, n), np.inf)
        for (u, v), w in self.weight.items():
            pair = np.minimum(pair, SWAP_CX * (dist[:, [u]] + dist[[v], :]) + w)
            pair = np.minimum(pair, SWAP_CX * (dist[:, [v]] + dist[[u], :]) + w)
        # coupled pairs always run on their own edge
        for (u, v), w in self.weight.items():
            pair[u, v] = pair[v, u] = w
        np.fill_diagonal(pair, np.inf)
        self.pair = pair
        self.gate_1q = np.array([neg_log_fidelity(snapshot.gate_err_1q(q)) for q in range(n)])
        self.readout = np.array([neg_log_fidelity(snapshot.readout_err(q)) for q in range(n)])

        routed = nx.Graph()
        routed.add_nodes_from(range(n))
        for (u, v), w in self.weight.items():
            routed.add_edge(u, v, w=w + HOP_PENALTY)
        self.route_pred, route_dist = nx.floyd_warshall_predecessor_and_distance(routed, weight='w')
        self.route_dist = np.array([[route_dist[a][b] for b in range(n)] for a in range(n)])

    def route_path(self, src, dst):
        return nx.reconstruct_path(src, dst, self.route_pred)


@lru_cache(maxsize=32)
def cost_model(topology, snapshot):
    return CostModel(topology, snapshot)


class LayoutProblem:
    """Circuit summary for scoring layouts: pair multiplicities and per-qubit unary weights."""

    def __init__(self, circuit, model):
        c = circuit if circuit.is_basis() else decompose_to_basis(circuit)
        self.n_virtual = c.n_qubits
        self.model = model
        pairs = {}
        n_1q = [0] * c.n_qubits
        measured = [0] * c.n_qubits
        for g in c.gates:
            if g.kind == 'cx':
                key = (min(g.qubits), max(g.qubits))
                pairs[key] = pairs.get(key, 0) + 1
            elif g.kind in SINGLE_QUBIT_BASIS:
                n_1q[g.qubits[0]] += 1
            elif g.kind == 'measure':
                measured[g.qubits[0]] = 1
        self.pairs = sorted(pairs.items())
        self.n_1q = n_1q
        self.measured = measured
        self.neighbors = {v: [] for v in range(c.n_qubits)}
        for (a, b), cnt in self.pairs:
            self.neighbors[a].append((b, cnt))
            self.neighbors[b].append((a, cnt))

    def unary(self, v, p):
        return self.n_1q[v] * self.model.gate_1q[p] + self.measured[v] * self.model.readout[p]

    def score(self, physical):
        pair = self.model.pair
        cost = sum(cnt * pair[physical[a], physical[b]] for (a, b), cnt in self.pairs)
        return float(cost + sum(self.unary(v, p) for v, p in enumerate(physical)))


def score_layout(c, layout, snapshot, topology):
    """Estimated negative-log-fidelity of running c under `layout`; lower is better."""
    if len(layout) < c.n_qubits:
        raise LayoutError(f"layout covers {len(layout)} qubits but the circuit has {c.n_qubits}")
    return LayoutProblem(c, cost_model(topology, snapshot)).score(layout.physical[:c.n_qubits])


def _exact_layout(problem, n_physical):
    """Branch and bound over injective maps, virtual qubits assigned in index order."""
    n = problem.n_virtual
    min_unary = [min(problem.unary(v, p) for p in range(n_physical)) for v in range(n)]
    suffix = [0.0] * (n + 1)
    for v in reversed(range(n)):
        suffix[v] = suffix[v + 1] + min_unary[v]
    pair = problem.model.pair
    best_cost, best = math.inf, None
    assign = [0] * n
    used = [False] * n_physical

    def dfs(v, partial):
        nonlocal best_cost, best
        if partial + suffix[v] >= best_cost - EPS:
            return
        if v == n:
            best_cost, best = partial, tuple(assign)
            return
        for p in range(n_physical):
            if used[p]:
                continue
            step = problem.unary(v, p)
            for w, cnt in problem.neighbors[v]:
                if w < v:
                    step += cnt * pair[assign[w], p]
            assign[v] = p
            used[p] = True
            dfs(v + 1, partial + step)
            used[p] = False

    dfs(0, 0.0)
    return best, best_cost


def _anneal_layout(problem, n_physical, seed):
    n = problem.n_virtual
    children = np.random.SeedSequence(seed).spawn(ANNEAL_RESTARTS + 1)
    probe_rng = np.random.default_rng(children[0])
    probes = [problem.score(tuple(probe_rng.permutation(n_physical)[:n])) for _ in range(ANNEAL_PROBE_LAYOUTS)]
    t0 = max(max(probes) - min(probes), EPS)

    best_cost, best = math.inf, None
    for child in children[1:]:
        rng = np.random.default_rng(child)
        current = list(rng.permutation(n_physical)[:n])
        owner = {p: v for v, p in enumerate(current)}
        cost = problem.score(current)
        run_best, run_cost = tuple(current), cost
        temp = t0
        for it in range(ANNEAL_ITERATIONS):
            if it and it % ANNEAL_DECAY_EVERY == 0:
                temp *= ANNEAL_DECAY
            v = int(rng.integers(n))
            p = int(rng.integers(n_physical))
            if p == current[v]:
                continue
            old = current[v]
            w = owner.get(p)
            current[v] = p
            if w is not None:
                current[w] = old
            new_cost = problem.score(current)
            delta = new_cost - cost
            if delta <= 0 or rng.random() < math.exp(-delta / temp):
                cost = new_cost
                owner.pop(old, None)
                owner[p] = v
                if w is not None:
                    owner[old] = w
                key = (cost, tuple(current))
                if key < (run_cost, run_best):
                    run_cost, run_best = cost, tuple(current)
            else:
                current[v] = old
                if w is not None:
                    current[w] = p
        if (run_cost, run_best) < (best_cost, best or ()):
            best_cost, best = run_cost, run_best
    return best, best_cost


def select_layout(c, topology, snapshot, seed=0):
    """Minimum-cost layout: exact for small instances, seeded simulated annealing otherwise."""
    if c.n_qubits > topology.n_qubits:
        raise LayoutError(f"circuit needs {c.n_qubits} qubits but {topology.name} has {topology.n_qubits}")
    problem = LayoutProblem(c, cost_model(topology, snapshot))
    if c.n_qubits <= EXACT_MAX_VIRTUAL and topology.n_qubits <= EXACT_MAX_PHYSICAL:
        physical, cost = _exact_layout(problem, topology.n_qubits)
        method = 'exact'
    else:
        physical, cost = _anneal_layout(problem, topology.n_qubits, seed)
        method = 'anneal'
    logger.debug("select_layout %s on %s (%s): cost %.6f", c.name or '<circuit>', topology.name, method, cost)
    return Layout(physical, topology.n_qubits)


# ---------------------------------------------------------------------------
# Routing
# ---------------------------------------------------------------------------

def _swap_gates(x, y):
    return [cx(x, y), cx(y, x), cx(x, y)]


def route(c, layout, topology, snapshot):
    """
    Make every CX adjacent by inserting swaps (3 CX each) along minimum-weight paths.

    Greedy per gate in program order; measurements are emitted last, on the
    physical qubit their virtual qubit ends up on. Returns (circuit, final layout, swaps).
    """
    if len(layout) < c.n_qubits:
        raise LayoutError(f"layout covers {len(layout)} qubits but the circuit has {c.n_qubits}")
    model = cost_model(topology, snapshot)
    v2p = list(layout.physical[:c.n_qubits])
    p2v = {p: v for v, p in enumerate(v2p)}
    out, measures = [], []
    n_swaps = 0

    def do_swap(x, y):
        nonlocal n_swaps
        vx, vy = p2v.pop(x, None), p2v.pop(y, None)
        if vx is not None:
            v2p[vx] = y
            p2v[y] = vx
        if vy is not None:
            v2p[vy] = x
            p2v[x] = vy
        out.extend(_swap_gates(x, y))
        n_swaps += 1

    def walk(v, target, other):
        path = model.route_path(v2p[v], target)
        for nxt in path[1:]:
            if topology.has_edge(v2p[v], v2p[other]):
                return
            do_swap(v2p[v], nxt)

    for g in c.gates:
        if g.kind == 'measure':
            measures.append(g)
        elif g.kind == 'barrier':
            out.append(g.remap({q: v2p[q] for q in g.qubits}))
        elif g.kind != 'cx':
            out.append(g.remap({g.qubits[0]: v2p[g.qubits[0]]}))
        else:
            a, b = g.qubits
            if not topology.has_edge(v2p[a], v2p[b]):
                pa, pb = v2p[a], v2p[b]
                dist = model.route_dist
                best = None
                for (x, y), w in model.weight.items():
                    for u, t in ((x, y), (y, x)):
                        key = (SWAP_CX * (dist[pa, u] + dist[pb, t]) + w, u, t)
                        if best is None or key < best:
                            best = key
                _, u, t = best
                walk(a, u, b)
                walk(b, t, a)
            out.append(cx(v2p[a], v2p[b]))

    out.extend(measure(v2p[g.qubits[0]], g.clbit) for g in measures)
    routed = Circuit(topology.n_qubits, c.n_clbits, out, c.name)
    return routed, Layout(v2p, topology.n_qubits), n_swaps


# ---------------------------------------------------------------------------
# Peephole
# ---------------------------------------------------------------------------

def _cancel_cx_pairs(gates, n_qubits):
    out = []
    alive = []
    stacks = [[] for _ in range(n_qubits)]
    for g in gates:
        wires = g.qubits if g.qubits else range(n_qubits)
        if g.kind == 'cx':
            a, b = g.qubits
            if stacks[a] and stacks[b] and stacks[a][-1] == stacks[b][-1]:
                j = stacks[a][-1]
                if out[j] == g:
                    alive[j] = False
                    stacks[a].pop()
                    stacks[b].pop()
                    continue
        idx = len(out)
        out.append(g)
        alive.append(True)
        for q in wires:
            stacks[q].append(idx)
    return [g for g, keep in zip(out, alive) if keep]


def _flush_run(run, q):
    if not run:
        return []
    if all(g.kind == 'u1' for g in run):
        lam = normalize_angle(sum(g.params[0] for g in run))
        return [] if abs(lam) < EPS else [u1(lam, q)]
    if len(run) == 1:
        return list(run)
    m = np.eye(2, dtype=complex)
    for g in run:
        m = gate_matrix(g) @ m
    fused = zyz_decompose(m, q)
    return [] if fused is None else [fused]


def _fuse_single_qubit_runs(gates, n_qubits):
    out = []
    runs = [[] for _ in range(n_qubits)]
    for g in gates:
        if g.kind in SINGLE_QUBIT_BASIS:
            runs[g.qubits[0]].append(g)
            continue
        for q in (g.qubits if g.qubits else range(n_qubits)):
            out.extend(_flush_run(runs[q], q))
            runs[q] = []
        out.append(g)
    for q in range(n_qubits):
        out.extend(_flush_run(runs[q], q))
    return out


def peephole_optimize(c):
    """Cancel adjacent identical CX pairs and fuse single-qubit runs until nothing changes."""
    gates = list(c.gates)
    while True:
        nxt = _fuse_single_qubit_runs(_cancel_cx_pairs(gates, c.n_qubits), c.n_qubits)
        if nxt == gates:
            break
        gates = nxt
    return c.with_gates(gates)


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

def circuit_cost(physical, snapshot):
    """Negative-log-fidelity of a routed physical circuit under `snapshot`."""
    total = 0.0
    for g in physical.gates:
        if g.kind == 'cx':
            total += neg_log_fidelity(snapshot.epc(*g.qubits))
        elif g.kind in SINGLE_QUBIT_BASIS:
            total += neg_log_fidelity(snapshot.gate_err_1q(g.qubits[0]))
        elif g.kind == 'measure':
            total += neg_log_fidelity(snapshot.readout_err(g.qubits[0]))
    return total


def transpile(c, topology, snapshot, level=3, seed=0):
    """
    Map, route and optimise c for the device.

    level 0: identity layout; level 1: layout chosen on a uniform snapshot
    (error-blind, fewest swaps); level 2: noise-aware layout; level 3: level 2
    plus peephole optimisation. Levels 0 and 1 also route error-blind.
    """
    if level not in (0, 1, 2, 3):
        raise ValidationError(f"level must be 0-3, got {level}")
    check_coverage(snapshot, topology)
    basis = decompose_to_basis(c)
    blind = uniform_snapshot(topology)
    if level == 0:
        layout = Layout.identity(c.n_qubits, topology.n_qubits)
    elif level == 1:
        layout = select_layout(basis, topology, blind, seed)
    else:
        layout = select_layout(basis, topology, snapshot, seed)
    routed, final, n_swaps = route(basis, layout, topology, blind if level < 2 else snapshot)
    if level == 3:
        routed = peephole_optimize(routed)
    return TranspiledCircuit(routed, layout, final, circuit_cost(routed, snapshot),
                             snapshot.snapshot_id, level, n_swaps)


def verify_equivalence(original, t):
    """
    |tr(U_orig^dagger M)| / 2^n, where M is the routed circuit read from the
    initial layout to the final layout with every other physical qubit in |0>.
    Measurement placement is checked too; a mismatch returns 0.
    """
    n = original.n_qubits
    if n > VERIFY_MAX_VIRTUAL:
        raise ValidationError(f"verify_equivalence supports at most {VERIFY_MAX_VIRTUAL} virtual qubits, got {n}")
    phys = t.physical_circuit
    init, final = t.initial_layout.physical[:n], t.final_layout.physical[:n]

    expected_measures = {(final[g.qubits[0]], g.clbit) for g in original.gates if g.kind == 'measure'}
    actual_measures = {(g.qubits[0], g.clbit) for g in phys.gates if g.kind == 'measure'}
    if expected_measures != actual_measures:
        logger.warning("verify_equivalence: measurement placement differs")
        return 0.0

    active = sorted({q for g in phys.gates for q in g.qubits} | set(init) | set(final))
    if len(active) > VERIFY_MAX_ACTIVE:
        raise ValidationError(f"routed circuit touches {len(active)} qubits (limit {VERIFY_MAX_ACTIVE})")
    local = {p: i for i, p in enumerate(active)}
    k = len(active)
    dim = 2 ** n

    state = np.zeros((dim,) + (2,) * k, dtype=complex)
    for x in range(dim):
        index = [0] * k
        for v in range(n):
            index[k - 1 - local[init[v]]] = (x >> v) & 1
        state[(x,) + tuple(index)] = 1.0
    for g in phys.gates:
        if g.is_unitary:
            state = apply_matrix(state, gate_matrix(g), tuple(local[q] for q in g.qubits), k)
    flat = state.reshape(dim, -1)
    read = np.array([sum(((y >> v) & 1) << local[final[v]] for v in range(n)) for y in range(dim)])
    m = flat[:, read].T
    u = unitary_of(original.without_measurements())
    return float(abs(np.trace(u.conj().T @ m)) / dim)


def brute_force_layouts(c, topology, snapshot):
    """Every injective layout with its score, for cross-checking on small devices."""
    problem = LayoutProblem(c, cost_model(topology, snapshot))
    for perm in itertools.permutations(range(topology.n_qubits), c.n_qubits):
        yield perm, problem.score(perm)
