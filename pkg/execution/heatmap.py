"""
Device heatmaps as Graphviz DOT text.

Qubits are coloured by readout error and couplings by two-qubit error, each on
a green -> blue -> red ramp scaled to the snapshot's own min/max. Qubits used by
a layout (or circuit) are drawn solid; couplings carrying the circuit's two-qubit
gates (after basis decomposition) are drawn thick. Rendering is left to Graphviz.
"""

import numpy as np

from execution.circuit_core import decompose_to_basis
from execution.errors import LayoutError
from execution.snapshot import check_coverage

# ramp stops: low error green, mid blue, high error red
RAMP_POSITIONS = (0.0, 0.5, 1.0)
RAMP_RGB = ((0, 170, 0), (0, 0, 255), (255, 0, 0))


def ramp_color(value, lo, hi):
    """Hex colour of `value` on the ramp; a flat scale maps everything to the low end."""
    t = 0.0 if hi <= lo else float(np.clip((value - lo) / (hi - lo), 0.0, 1.0))
    rgb = [int(round(np.interp(t, RAMP_POSITIONS, [c[i] for c in RAMP_RGB]))) for i in range(3)]
    return '#{:02x}{:02x}{:02x}'.format(*rgb)


def _used_elements(topology, layout, circuit):
    """(used physical qubits, physical pairs carrying CX)."""
    def check(p):
        if not 0 <= p < topology.n_qubits:
            raise LayoutError(f"layout references qubit {p}, which {topology.name} does not have")
        return p

    if layout is not None:
        for p in layout.physical:
            check(p)
    if circuit is None:
        return ({check(p) for p in layout.physical} if layout is not None else set()), set()

    def place(q):
        if layout is None:
            return check(q)
        if q >= len(layout):
            raise LayoutError(f"circuit qubit {q} is not covered by the layout")
        return layout[q]

    if not circuit.is_basis():
        circuit = decompose_to_basis(circuit)
    used, pairs = set(), set()
    for g in circuit.gates:
        mapped = [place(q) for q in g.qubits]
        if g.kind != 'barrier':
            used.update(mapped)
        if g.kind == 'cx':
            a, b = mapped
            pairs.add((min(a, b), max(a, b)))
    return used, pairs


def emit_heatmap(snapshot, topology, layout=None, circuit=None):
    """DOT graph of the snapshot; `circuit` is virtual when a layout is given, physical otherwise."""
    check_coverage(snapshot, topology)
    used, pairs = _used_elements(topology, layout, circuit)
    q_err = [snapshot.readout_err(q) for q in range(topology.n_qubits)]
    e_err = [snapshot.epc(a, b) for a, b in topology.edges]
    q_lo, q_hi = min(q_err), max(q_err)
    e_lo, e_hi = (min(e_err), max(e_err)) if e_err else (0.0, 0.0)

    lines = [
        f"// device {topology.name}, snapshot t={snapshot.timestamp_min:g} min ({snapshot.origin})",
        f"// qubit readout_err scale: min {q_lo:.6g} (green) max {q_hi:.6g} (red)",
        f"// edge epc_2q scale: min {e_lo:.6g} (green) max {e_hi:.6g} (red)",
        f'graph "{topology.name}" {{',
        '  node [shape=circle, fontname="Helvetica", penwidth=2];',
    ]
    for q in range(topology.n_qubits):
        color = ramp_color(q_err[q], q_lo, q_hi)
        style = f', style=filled, fillcolor="{color}", fontcolor="white"' if q in used else ''
        lines.append(f'  q{q} [label="{q}", color="{color}"{style}];')
    for (a, b), err in zip(topology.edges, e_err):
        width = 4 if (a, b) in pairs else 2
        lines.append(f'  q{a} -- q{b} [color="{ramp_color(err, e_lo, e_hi)}", penwidth={width}];')
    lines.append('}')
    return '\n'.join(lines) + '\n'
