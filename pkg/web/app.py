#!/usr/bin/env python3
"""
JIT Transpilation Toolkit - Flask Web Application

HTTP access to device presets, calibration snapshots, heatmaps, transpilation
and experiment reports.
"""

import os

from flask import Flask, request, jsonify, send_from_directory
from werkzeug.exceptions import HTTPException

# Import utility functions (also puts the project root on sys.path)
from utils import (
    list_presets,
    list_scenarios,
    list_reports,
    report_path,
    parse_clock,
    format_clock,
)

from execution import settings
from execution.calibration import run_calibration
from execution.circuit_core import emit_circuit, parse_circuit
from execution.device_model import build_topology, init_noise, true_snapshot
from execution.errors import ValidationError
from execution.heatmap import emit_heatmap
from execution.noisy_simulator import derive_seed
from execution.settings import ScenarioConfig
from execution.snapshot import snapshot_from_dict, snapshot_to_dict
from execution.transpiler import Layout, layout_id, transpile

app = Flask(__name__)

ENDPOINTS = {
    'GET /': 'this index',
    'GET /devices/<preset>': 'coupling map of a device preset',
    'GET /snapshot/<preset>?time=&kind=oracle|estimated&seed=': 'calibration snapshot at a device time',
    'POST /heatmap': 'DOT heatmap of a snapshot (optional layout and circuit)',
    'POST /transpile': 'transpile circuit text against a snapshot',
    'GET /reports': 'list experiment reports',
    'GET /reports/<name>': 'download one report',
}


@app.errorhandler(ValidationError)
def handle_validation_error(e):
    return jsonify({'error': str(e)}), 400


@app.errorhandler(Exception)
def handle_internal_error(e):
    if isinstance(e, HTTPException):
        return e
    app.logger.exception("request failed")
    return jsonify({'error': str(e)}), 500


def _snapshot_at(preset, time_min, kind, seed):
    """Oracle or freshly estimated snapshot of a preset at `time_min` minutes."""
    topology = build_topology(preset)
    config = ScenarioConfig(device=preset, seed=seed)
    noise = init_noise(topology, config.drift_params())
    noise.advance_to(time_min)
    if kind == 'oracle':
        return topology, true_snapshot(noise)
    snapshot, _ = run_calibration(noise, shots=config.cal_shots, lengths=config.rb_lengths,
                                  samples=config.rb_samples, seed=derive_seed(seed, 21),
                                  gate_err_1q_prior=config.gate_err_1q_prior)
    return topology, snapshot


def _snapshot_from_request(data):
    """Snapshot given inline ({'snapshot': {...}}) or by preset/time ({'device', 'time', 'kind', 'seed'})."""
    if 'snapshot' in data:
        raw = data['snapshot']
        topology = build_topology(data.get('device') or raw.get('device', ''))
        return topology, snapshot_from_dict(raw, topology)
    device = data.get('device')
    if not device:
        raise ValidationError("request needs either 'snapshot' or 'device'")
    time_min = parse_clock(data.get('time', 0))
    if time_min is None:
        raise ValidationError(f"invalid time '{data.get('time')}'. Use minutes or [D:]HH:MM, "
                              f"at most {settings.MAX_CLOCK_MIN:g} min")
    return _snapshot_at(device, time_min, data.get('kind', 'oracle'), int(data.get('seed', 0)))


@app.route('/')
def index():
    """Endpoints, presets and scenario files."""
    return jsonify({
        'name': 'JIT transpilation toolkit',
        'endpoints': ENDPOINTS,
        'presets': list_presets(),
        'scenarios': list_scenarios(),
    })


@app.route('/devices/<preset>')
def device(preset):
    """Return the coupling map of a preset."""
    topology = build_topology(preset)
    return jsonify({
        'name': topology.name,
        'n_qubits': topology.n_qubits,
        'edges': [list(e) for e in topology.edges],
        'max_degree': topology.max_degree,
    })


@app.route('/snapshot/<preset>')
def snapshot(preset):
    """Snapshot at ?time= (minutes or [D:]HH:MM); kind is oracle (default) or estimated."""
    time_min = parse_clock(request.args.get('time', '0'))
    if time_min is None:
        message = f'Invalid time. Use minutes or [D:]HH:MM, at most {settings.MAX_CLOCK_MIN:g} min'
        return jsonify({'error': message}), 400
    kind = request.args.get('kind', 'oracle')
    if kind not in ('oracle', 'estimated'):
        return jsonify({'error': f'Unknown snapshot kind: {kind}'}), 400
    try:
        seed = int(request.args.get('seed', '0'))
    except ValueError:
        return jsonify({'error': 'seed must be an integer'}), 400
    _, snap = _snapshot_at(preset, time_min, kind, seed)
    doc = snapshot_to_dict(snap)
    doc['clock'] = format_clock(time_min)
    return jsonify(doc)


@app.route('/heatmap', methods=['POST'])
def heatmap():
    """DOT heatmap; optional 'layout' (list of physical ids) and 'circuit' (text)."""
    data = request.get_json(silent=True) or {}
    topology, snap = _snapshot_from_request(data)
    layout = Layout(tuple(data['layout']), topology.n_qubits) if data.get('layout') else None
    circuit = parse_circuit(data['circuit']) if data.get('circuit') else None
    return jsonify({'device': topology.name, 'dot': emit_heatmap(snap, topology, layout, circuit)})


@app.route('/transpile', methods=['POST'])
def transpile_route():
    """Transpile circuit text against an inline or generated snapshot."""
    data = request.get_json(silent=True) or {}
    if not data.get('circuit'):
        return jsonify({'error': 'circuit text is required'}), 400
    circuit = parse_circuit(data['circuit'])
    topology, snap = _snapshot_from_request(data)
    try:
        level = int(data.get('level', 3))
        seed = int(data.get('seed', 0))
    except (TypeError, ValueError):
        return jsonify({'error': 'level and seed must be integers'}), 400
    if seed < 0:
        return jsonify({'error': f'seed must be >= 0, got {seed}'}), 400
    result = transpile(circuit, topology, snap, level=level, seed=seed)
    return jsonify({
        'device': topology.name,
        'level': result.level,
        'circuit': emit_circuit(result.physical_circuit),
        'initial_layout': list(result.initial_layout.physical),
        'final_layout': list(result.final_layout.physical),
        'layout_id': layout_id(result.initial_layout),
        'cost': result.cost,
        'swaps': result.n_swaps,
        'snapshot_id': result.snapshot_id,
    })


@app.route('/reports')
def reports():
    """List report files."""
    return jsonify(list_reports())


@app.route('/reports/<name>')
def report(name):
    """Download one report file."""
    try:
        path = report_path(name)
    except FileNotFoundError:
        return jsonify({'error': f'Unknown report: {name}'}), 404
    return send_from_directory(path.parent, path.name)


if __name__ == '__main__':
    import sys
    port = 5000
    if len(sys.argv) > 1 and sys.argv[1] == '--port':
        port = int(sys.argv[2])
    elif os.environ.get('PORT'):
        port = int(os.environ.get('PORT'))

    app.run(debug=settings.LOG_LEVEL == 'DEBUG', host='127.0.0.1', port=port)
