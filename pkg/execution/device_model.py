"""
Device topology, hidden ground-truth noise and its drift.

Noise parameters drift as Ornstein-Uhlenbeck processes in logit space, so
every probability stays inside [1e-6, 0.5) whatever the elapsed time. Each
element has its own static mean (spread around the device mean); a fraction of
elements is persistently bad with a mean 5-10x higher.
"""

import logging
import math
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import networkx as nx
import numpy as np
from scipy.special import expit, logit

from execution.errors import TopologyError, ValidationError
from execution.settings import MAX_CLOCK_MIN, TOPOLOGY_DIR
from execution.snapshot import CalibrationSnapshot, EdgeCalibration, QubitCalibration

logger = logging.getLogger(__name__)

P_MIN = 1e-6
P_MAX = 0.5 - 1e-9
MAX_DEGREE = 4
BAD_FACTOR_RANGE = (5.0, 10.0)
BAD_MEAN_CAP = 0.4

# Published coupling maps, used when data/topologies has no file for the preset.
PRESET_EDGES = {
    'almaden20': [
        (0, 1), (1, 2), (2, 3), (3, 4), (1, 6), (3, 8), (5, 6), (6, 7), (7, 8), (8, 9),
        (5, 10), (7, 12), (9, 14), (10, 11), (11, 12), (12, 13), (13, 14), (11, 16),
        (13, 18), (15, 16), (16, 17), (17, 18), (18, 19),
    ],
    'paris27': [
        (0, 1), (1, 2), (1, 4), (2, 3), (3, 5), (4, 7), (5, 8), (6, 7), (7, 10), (8, 9),
        (8, 11), (10, 12), (11, 14), (12, 13), (12, 15), (13, 14), (14, 16), (15, 18),
        (16, 19), (17, 18), (18, 21), (19, 20), (19, 22), (21, 23), (22, 25), (23, 24),
        (24, 25), (25, 26),
    ],
}


@dataclass(frozen=True)
class Topology:
    n_qubits: int
    edges: tuple
    name: str = 'custom'

    @cached_property
    def graph(self):
        g = nx.Graph()
        g.add_nodes_from(range(self.n_qubits))
        g.add_edges_from(self.edges)
        return g

    @cached_property
    def edge_index(self):
        return {e: i for i, e in enumerate(self.edges)}

    def has_edge(self, a, b):
        return (min(a, b), max(a, b)) in self.edge_index

    def neighbors(self, q):
        return sorted(self.graph.neighbors(q))

    @property
    def max_degree(self):
        return max((d for _, d in self.graph.degree()), default=0)


def _make_topology(edges, name, n_qubits=None):
    clean = set()
    for a, b in edges:
        a, b = int(a), int(b)
        if a == b:
            raise TopologyError(f"self-loop on qubit {a}")
        if a < 0 or b < 0:
            raise TopologyError(f"negative qubit id in edge ({a},{b})")
        clean.add((min(a, b), max(a, b)))
    if n_qubits is None:
        n_qubits = 1 + max((b for _, b in clean), default=0)
    topo = Topology(n_qubits, tuple(sorted(clean)), name)
    if n_qubits > 1 and not nx.is_connected(topo.graph):
        parts = sorted(min(c) for c in nx.connected_components(topo.graph))
        raise TopologyError(f"{name} is disconnected (components start at qubits {parts})")
    if topo.max_degree > MAX_DEGREE:
        worst = max(topo.graph.degree(), key=lambda kv: kv[1])
        raise TopologyError(f"qubit {worst[0]} has degree {worst[1]} > {MAX_DEGREE}")
    return topo


def load_edge_list(path, name=None):
    """Read an edge-list file: one `i j` pair per line, `#` comments allowed."""
    path = Path(path)
    if not path.exists():
        raise TopologyError(f"edge list not found: {path}")
    edges = []
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2 or not all(p.isdigit() for p in parts):
            raise TopologyError(f"{path}:{line_no}: expected 'i j', got '{line}'")
        edges.append((int(parts[0]), int(parts[1])))
    return _make_topology(edges, name or path.stem)


def line_edges(n):
    return [(i, i + 1) for i in range(n - 1)]


def grid_edges(rows, cols):
    edges = []
    for r in range(rows):
        for c in range(cols):
            q = r * cols + c
            if c + 1 < cols:
                edges.append((q, q + 1))
            if r + 1 < rows:
                edges.append((q, q + cols))
    return edges


def ring_edges(n):
    return line_edges(n) + ([(0, n - 1)] if n > 2 else [])


def tree_edges(n):
    return [((i - 1) // 2, i) for i in range(1, n)]


_PARAM_PRESET = re.compile(r'^(line|ring|tree|grid)\((\d+)(?:,(\d+))?\)$')


def build_topology(spec):
    """
    Build a Topology from a preset name, a parameterised preset, an edge-list
    file or an explicit list of edges.

    Presets: almaden20, paris27, line(n), ring(n), tree(n), grid(r,c).
    """
    if not isinstance(spec, str):
        return _make_topology(spec, 'custom')

    key = spec.strip().replace(' ', '').lower()
    if key in PRESET_EDGES:
        path = TOPOLOGY_DIR / f"{key}.txt"
        if path.exists():
            return load_edge_list(path, key)
        return _make_topology(PRESET_EDGES[key], key)

    m = _PARAM_PRESET.match(key)
    if m:
        kind, a, b = m.group(1), int(m.group(2)), m.group(3)
        if kind == 'grid':
            if b is None:
                raise TopologyError("grid needs two sizes: grid(r,c)")
            rows, cols = a, int(b)
            if rows * cols < 1:
                raise TopologyError("grid must have at least one qubit")
            return _make_topology(grid_edges(rows, cols), key, rows * cols)
        if b is not None:
            raise TopologyError(f"{kind} takes one size, got '{spec}'")
        if a < 1:
            raise TopologyError(f"{kind} needs at least one qubit")
        builder = {'line': line_edges, 'ring': ring_edges, 'tree': tree_edges}[kind]
        return _make_topology(builder(a), key, a)

    path = Path(spec[len('custom:'):] if key.startswith('custom:') else spec)
    if path.suffix == '.txt' or path.exists():
        return load_edge_list(path)
    raise TopologyError(f"unknown topology preset '{spec}'")


# ---------------------------------------------------------------------------
# Ground-truth noise
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QubitNoise:
    p_read_0to1: float
    p_read_1to0: float
    p_gate_1q: float


@dataclass(frozen=True)
class EdgeNoise:
    p_gate_2q: float


@dataclass(frozen=True)
class DriftParams:
    readout_mean: float = 2e-2
    read_asymmetry: float = 2.0
    gate_1q_mean: float = 1.5e-3
    gate_2q_mean: float = 1.5e-2
    reversion_rate: float = 1 / 240
    volatility: float = 0.055
    spread: float = 0.25
    persistent_bad_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.reversion_rate <= 0:
            raise ValidationError("reversion_rate must be > 0")
        if self.volatility < 0 or self.spread < 0:
            raise ValidationError("volatility and spread must be >= 0")
        if not 0 <= self.persistent_bad_fraction <= 1:
            raise ValidationError("persistent_bad_fraction must lie in [0, 1]")
        for name in ('readout_mean', 'gate_1q_mean', 'gate_2q_mean'):
            if not 0 < getattr(self, name) < 0.5:
                raise ValidationError(f"{name} must lie in (0, 0.5)")

    @property
    def read_means(self):
        """(p_read_0to1, p_read_1to0) means whose average is readout_mean."""
        p01 = 2 * self.readout_mean / (1 + self.read_asymmetry)
        return p01, self.read_asymmetry * p01

    def channel_means(self):
        p01, p10 = self.read_means
        return {'read01': p01, 'read10': p10, 'gate1q': self.gate_1q_mean, 'gate2q': self.gate_2q_mean}

    @property
    def stationary_std(self):
        return self.volatility / math.sqrt(2 * self.reversion_rate)


QUBIT_CHANNELS = ('read01', 'read10', 'gate1q')


def _to_prob(x):
    return np.clip(expit(x), P_MIN, P_MAX)


class GroundTruthNoise:
    """
    The device's hidden, drifting error parameters.

    Single-owner state machine: `advance` moves the clock forward and updates the
    logit-space state in place. Snapshots taken from it are immutable.
    """

    def __init__(self, topology, drift, mu, x, bad_qubits, bad_edges, rng, clock_min=0.0, pinned=None):
        self.topology = topology
        self.drift = drift
        self._mu = mu
        self._x = x
        self._pinned = dict(pinned or {})
        self.bad_qubits = frozenset(bad_qubits)
        self.bad_edges = frozenset(bad_edges)
        self._rng = rng
        self.clock_min = float(clock_min)

    def copy(self):
        rng = np.random.default_rng()
        rng.bit_generator.state = self._rng.bit_generator.state
        return GroundTruthNoise(self.topology, self.drift,
                                {k: v.copy() for k, v in self._mu.items()},
                                {k: v.copy() for k, v in self._x.items()},
                                self.bad_qubits, self.bad_edges, rng, self.clock_min,
                                {k: v.copy() for k, v in self._pinned.items()})

    def _channel(self, name):
        if name in self._pinned:
            return self._pinned[name]
        return _to_prob(self._x[name])

    @property
    def p_read_0to1(self):
        return self._channel('read01')

    @property
    def p_read_1to0(self):
        return self._channel('read10')

    @property
    def p_gate_1q(self):
        return self._channel('gate1q')

    @property
    def p_gate_2q(self):
        return self._channel('gate2q')

    @property
    def mean_probabilities(self):
        """Per-element long-run means, keyed by channel."""
        return {k: self._pinned[k] if k in self._pinned else _to_prob(v) for k, v in self._mu.items()}

    def qubit_noise(self, q):
        return QubitNoise(float(self.p_read_0to1[q]), float(self.p_read_1to0[q]), float(self.p_gate_1q[q]))

    def edge_noise(self, a, b):
        key = (min(a, b), max(a, b))
        if key not in self.topology.edge_index:
            raise ValidationError(f"({a},{b}) is not an edge of {self.topology.name}")
        return EdgeNoise(float(self.p_gate_2q[self.topology.edge_index[key]]))

    def set_static(self, **channels):
        """Pin channels to constant values that no longer drift.

        Each keyword is a channel name (read01, read10, gate1q, gate2q) mapped to
        a scalar or a per-element array of probabilities in [0, 0.5). Zero is
        allowed here and means the channel is switched off.
        """
        for name, value in channels.items():
            if name not in self._x:
                raise ValidationError(f"unknown noise channel '{name}'")
            p = np.broadcast_to(np.asarray(value, dtype=float), self._x[name].shape).copy()
            if np.any(p < 0) or np.any(p >= 0.5):
                raise ValidationError(f"{name} values must lie in [0, 0.5)")
            self._pinned[name] = p
            self._x[name] = logit(np.clip(p, P_MIN, P_MAX))
            self._mu[name] = self._x[name].copy()
        return self

    def advance(self, dt):
        """Integrate the drift for dt minutes (Euler sub-steps of at most one minute)."""
        if not math.isfinite(dt) or dt < 0:
            raise ValidationError(f"advance: dt must be a finite non-negative number, got {dt}")
        if self.clock_min + dt > MAX_CLOCK_MIN:
            raise ValidationError(f"advance: clock would pass the {MAX_CLOCK_MIN:g} min horizon")
        if dt == 0:
            return self
        rate, vol = self.drift.reversion_rate, self.drift.volatility
        max_step = min(1.0, 0.5 / rate)
        steps = max(1, math.ceil(dt / max_step))
        h = dt / steps
        for _ in range(steps):
            for name in sorted(self._x):
                x, mu = self._x[name], self._mu[name]
                noise = self._rng.standard_normal(x.shape)
                x += rate * (mu - x) * h + vol * math.sqrt(h) * noise
        self.clock_min += dt
        return self

    def advance_to(self, time_min):
        if time_min < self.clock_min:
            raise ValidationError(f"clock is at {self.clock_min} min; cannot move back to {time_min}")
        return self.advance(time_min - self.clock_min)


def init_noise(topology, drift):
    """Sample per-element means and a stationary starting point; deterministic given drift.seed."""
    rng = np.random.default_rng(np.random.SeedSequence(drift.seed))
    n, m = topology.n_qubits, len(topology.edges)
    bad_qubit_mask = rng.random(n) < drift.persistent_bad_fraction
    bad_edge_mask = rng.random(m) < drift.persistent_bad_fraction
    std = drift.stationary_std

    mu, x = {}, {}
    for name, base in drift.channel_means().items():
        size = m if name == 'gate2q' else n
        mask = bad_edge_mask if name == 'gate2q' else bad_qubit_mask
        factors = rng.uniform(*BAD_FACTOR_RANGE, size=size)
        means = np.where(mask, np.minimum(base * factors, BAD_MEAN_CAP), base)
        offsets = rng.standard_normal(size)
        mu[name] = logit(means) + drift.spread * offsets
        start = rng.standard_normal(size)
        x[name] = mu[name] + std * start

    bad_qubits = [int(q) for q in np.flatnonzero(bad_qubit_mask)]
    bad_edges = [topology.edges[i] for i in np.flatnonzero(bad_edge_mask)]
    logger.info("init_noise %s: %d bad qubits, %d bad edges", topology.name, len(bad_qubits), len(bad_edges))
    return GroundTruthNoise(topology, drift, mu, x, bad_qubits, bad_edges, rng)


def static_noise(topology, p_read_0to1=0.0, p_read_1to0=0.0, p_gate_1q=0.0, p_gate_2q=0.0, seed=0):
    """Noise model with fixed parameters and no drift (volatility 0)."""
    drift = DriftParams(volatility=0.0, spread=0.0, persistent_bad_fraction=0.0, seed=seed)
    noise = init_noise(topology, drift)
    return noise.set_static(read01=p_read_0to1, read10=p_read_1to0, gate1q=p_gate_1q, gate2q=p_gate_2q)


def true_snapshot(noise, origin='oracle'):
    """Snapshot equal to the ground truth at the current clock."""
    p01, p10, p1q, p2q = noise.p_read_0to1, noise.p_read_1to0, noise.p_gate_1q, noise.p_gate_2q
    qubits = [QubitCalibration(q, float(p01[q]), float(p10[q]), float((p01[q] + p10[q]) / 2), float(p1q[q]))
              for q in range(noise.topology.n_qubits)]
    edges = [EdgeCalibration(a, b, float(p2q[i])) for i, (a, b) in enumerate(noise.topology.edges)]
    return CalibrationSnapshot(noise.clock_min, noise.topology.name, origin, qubits, edges)
