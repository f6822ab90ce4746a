"""
Calibration snapshots: the only noise information the transpiler may see.

A snapshot is an immutable, timestamped report of per-qubit readout and
single-qubit errors and per-edge two-qubit errors. It serializes to a JSON
document with top-level fields timestamp_min, device, origin and `qubits` /
`edges` arrays.
"""

import json
import logging
from dataclasses import dataclass, replace
from functools import cached_property

from execution.errors import CalibrationError

logger = logging.getLogger(__name__)

ORIGINS = ('estimated', 'oracle', 'cotd-import', 'synthetic')
P_MAX = 0.5


@dataclass(frozen=True)
class QubitCalibration:
    id: int
    p_read_0to1: float
    p_read_1to0: float
    readout_err: float
    gate_err_1q: float


@dataclass(frozen=True)
class EdgeCalibration:
    a: int
    b: int
    epc_2q: float

    @property
    def pair(self):
        return (min(self.a, self.b), max(self.a, self.b))


def _check_prob(value, what):
    if not 0.0 <= value < P_MAX:
        raise CalibrationError(f"{what} = {value} outside [0, 0.5)")


@dataclass(frozen=True)
class CalibrationSnapshot:
    timestamp_min: float
    device: str
    origin: str
    qubits: tuple
    edges: tuple

    def __post_init__(self):
        object.__setattr__(self, 'qubits', tuple(self.qubits))
        object.__setattr__(self, 'edges', tuple(self.edges))
        if self.origin not in ORIGINS:
            raise CalibrationError(f"unknown snapshot origin '{self.origin}'")
        for i, q in enumerate(self.qubits):
            if q.id != i:
                raise CalibrationError(f"qubit records must be ordered by id; position {i} holds q{q.id}")
            for name in ('p_read_0to1', 'p_read_1to0', 'readout_err', 'gate_err_1q'):
                _check_prob(getattr(q, name), f"q{q.id}.{name}")
        seen = set()
        for e in self.edges:
            if e.pair in seen:
                raise CalibrationError(f"edge ({e.a},{e.b}) listed twice")
            seen.add(e.pair)
            _check_prob(e.epc_2q, f"edge ({e.a},{e.b}).epc_2q")

    @property
    def n_qubits(self):
        return len(self.qubits)

    @property
    def snapshot_id(self):
        return self.timestamp_min

    @cached_property
    def _epc(self):
        return {e.pair: e.epc_2q for e in self.edges}

    def epc(self, a, b):
        try:
            return self._epc[(min(a, b), max(a, b))]
        except KeyError:
            raise CalibrationError(f"snapshot has no edge ({a},{b})")

    def readout_err(self, q):
        return self.qubits[q].readout_err

    def gate_err_1q(self, q):
        return self.qubits[q].gate_err_1q

    def age_at(self, time_min):
        return time_min - self.timestamp_min

    def relabel(self, origin=None, timestamp_min=None):
        return replace(self,
                       origin=self.origin if origin is None else origin,
                       timestamp_min=self.timestamp_min if timestamp_min is None else timestamp_min)


def check_coverage(snapshot, topology):
    """Raise CalibrationError naming the first qubit or edge the snapshot is missing."""
    if snapshot.n_qubits < topology.n_qubits:
        raise CalibrationError(f"snapshot is missing qubit {snapshot.n_qubits} of {topology.name}")
    if snapshot.n_qubits > topology.n_qubits:
        raise CalibrationError(f"snapshot has {snapshot.n_qubits} qubits but {topology.name} has {topology.n_qubits}")
    for a, b in topology.edges:
        snapshot.epc(a, b)
    extra = set(snapshot._epc) - set(topology.edges)
    if extra:
        a, b = sorted(extra)[0]
        raise CalibrationError(f"snapshot edge ({a},{b}) is not a coupling of {topology.name}")


def uniform_snapshot(topology, epc_2q=0.01, readout_err=0.0, gate_err_1q=0.0, timestamp_min=0.0):
    """Snapshot with identical values everywhere (used for error-blind layout)."""
    qubits = [QubitCalibration(q, readout_err, readout_err, readout_err, gate_err_1q)
              for q in range(topology.n_qubits)]
    edges = [EdgeCalibration(a, b, epc_2q) for a, b in topology.edges]
    return CalibrationSnapshot(timestamp_min, topology.name, 'synthetic', qubits, edges)


def snapshot_to_dict(snapshot):
    return {
        'timestamp_min': snapshot.timestamp_min,
        'device': snapshot.device,
        'origin': snapshot.origin,
        'qubits': [
            {'id': q.id, 'p_read_0to1': q.p_read_0to1, 'p_read_1to0': q.p_read_1to0,
             'readout_err': q.readout_err, 'gate_err_1q': q.gate_err_1q}
            for q in snapshot.qubits
        ],
        'edges': [{'a': e.a, 'b': e.b, 'epc_2q': e.epc_2q} for e in snapshot.edges],
    }


def snapshot_to_json(snapshot):
    return json.dumps(snapshot_to_dict(snapshot), indent=2) + '\n'


def snapshot_from_dict(data, topology=None):
    try:
        qubits = sorted((QubitCalibration(int(q['id']), float(q['p_read_0to1']), float(q['p_read_1to0']),
                                          float(q['readout_err']), float(q['gate_err_1q']))
                         for q in data['qubits']), key=lambda q: q.id)
        edges = [EdgeCalibration(int(e['a']), int(e['b']), float(e['epc_2q'])) for e in data['edges']]
        snap = CalibrationSnapshot(float(data['timestamp_min']), str(data['device']), str(data['origin']),
                                   qubits, edges)
    except (KeyError, TypeError, ValueError) as e:
        raise CalibrationError(f"malformed snapshot document: {e!r}")
    if topology is not None:
        check_coverage(snap, topology)
    return snap


def snapshot_from_json(text, topology=None):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise CalibrationError(f"snapshot is not valid JSON: {e}")
    return snapshot_from_dict(data, topology)
