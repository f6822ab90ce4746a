"""
Experiment orchestration: stale calibration-of-the-day versus just-in-time.

One run is: calibrate at t_cal, wait jit_delay_min, then at t_exec transpile the
suite twice (against the COTD snapshot and against the fresh estimate) and
execute both on the simulator at the same ground-truth clock. Every event is
placed on one timeline and processed in time order, because the drifting noise
model only moves forward.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from tqdm import tqdm

from execution import settings
from execution.benchmarks import accuracy, build_suite
from execution.calibration import readout_cal_circuits, run_calibration
from execution.device_model import build_topology, init_noise, true_snapshot
from execution.errors import SimulationError
from execution.noisy_simulator import ExecutionSpec, derive_seed, run_noisy
from execution.transpiler import circuit_cost, layout_id, transpile

logger = logging.getLogger(__name__)

ARMS = ('baseline', 'jit')

# Seed stream tags
_DELAY, _CAL, _TRANSPILE, _EXEC, _PROBE = 11, 12, 13, 14, 15

# Event order at equal timestamps
_EVENT_ORDER = {'cotd': 0, 'calibrate': 1, 'execute': 2}


@dataclass
class ExperimentReport:
    """Rows are one (run, benchmark) cell each; `timeline` lists the processed events."""
    config: object
    device: str
    rows: list = field(default_factory=list)
    timeline: list = field(default_factory=list)
    suite_params: dict = field(default_factory=dict)

    def to_frame(self):
        return pd.DataFrame(self.rows)

    @property
    def n_runs(self):
        return len({r['run_index'] for r in self.rows})


def schedule(config):
    """(calibration time, execution time) per run, in minutes."""
    rng = np.random.default_rng([config.seed, _DELAY])
    start = config.cotd_age_min
    times = []
    for r in range(config.runs):
        t_cal = start + r * config.spacing_min
        if config.mode == 'fairshare':
            delay = float(rng.uniform(*config.jit_delay_range))
        else:
            delay = config.jit_delay_min
        times.append((t_cal, t_cal + delay))
    return times


def _events(config, times):
    events = []
    if config.cotd_policy == 'daily':
        events.append((0.0, 'cotd', None))
    for r, (t_cal, t_exec) in enumerate(times):
        if config.cotd_policy == 'fixed-age':
            events.append((t_exec - config.cotd_age_min, 'cotd', r))
        events.append((t_cal, 'calibrate', r))
        events.append((t_exec, 'execute', r))
    return sorted(events, key=lambda e: (e[0], _EVENT_ORDER[e[1]], -1 if e[2] is None else e[2]))


def _execute_arm(circuit, noise, shots, t_exec, repetitions, seed_keys):
    return [run_noisy(ExecutionSpec(circuit, shots, derive_seed(*seed_keys, k), t_exec), noise)
            for k in range(repetitions)]


def run_scenario(config, noise=None):
    """Run the whole experiment; deterministic given config.seed (and `noise`, if supplied)."""
    topology = build_topology(config.device)
    if noise is None:
        noise = init_noise(topology, config.drift_params())
    elif noise.topology != topology:
        raise SimulationError(f"noise model is for {noise.topology.name}, scenario device is {topology.name}")
    suite = build_suite(config.suite, config.seed)
    times = schedule(config)
    report = ExperimentReport(config, topology.name,
                              suite_params={b.name: dict(b.params) for b in suite})

    cotd, jit = {}, {}
    events = _events(config, times)
    for t, kind, run in tqdm(events, desc=f"{config.mode} scenario", disable=not settings.SHOW_PROGRESS):
        noise.advance_to(t)
        report.timeline.append({'time_min': t, 'event': kind, 'run_index': run})
        if kind == 'cotd':
            cotd[run] = true_snapshot(noise, origin='cotd-import')
            continue
        if kind == 'calibrate':
            jit[run], _ = run_calibration(
                noise, shots=config.cal_shots, lengths=config.rb_lengths, samples=config.rb_samples,
                seed=derive_seed(config.seed, _CAL, run), gate_err_1q_prior=config.gate_err_1q_prior,
                rb_1q=config.rb_1q)
            continue

        baseline = cotd[None] if config.cotd_policy == 'daily' else cotd[run]
        fresh = jit[run]
        oracle = true_snapshot(noise)
        for b_idx, bench in enumerate(suite):
            t_seed = derive_seed(config.seed, _TRANSPILE, run, b_idx)
            arms = {
                'baseline': transpile(bench.circuit, topology, baseline, config.level, t_seed),
                'jit': transpile(bench.circuit, topology, fresh, config.level, t_seed),
            }
            row = {
                'run_index': run,
                'exec_time_min': t,
                'benchmark': bench.name,
                'n': bench.n,
                'mode': config.mode,
                'snapshot_age_min': baseline.age_at(t),
                'jit_age_min': fresh.age_at(t),
                'layout_id': layout_id(arms['jit'].initial_layout),
            }
            for a_idx, arm in enumerate(ARMS):
                tc = arms[arm]
                if abs(noise.clock_min - t) > 1e-9:
                    raise SimulationError(f"arm {arm} of run {run} would execute at {noise.clock_min}, not {t}")
                counts = _execute_arm(tc.physical_circuit, noise, config.shots, t, config.repetitions,
                                      (config.seed, _EXEC, run, b_idx, a_idx))
                accs = np.array([accuracy(c, bench.expected) for c in counts])
                row[f'accuracy_{arm}'] = float(accs.mean())
                row[f'accuracy_{arm}_std'] = float(accs.std(ddof=1)) if len(accs) > 1 else 0.0
                row[f'layout_id_{arm}'] = layout_id(tc.initial_layout)
                row[f'swaps_{arm}'] = tc.n_swaps
                row[f'cost_{arm}_predicted'] = tc.cost
                row[f'cost_{arm}_oracle'] = circuit_cost(tc.physical_circuit, oracle)
            base = row['accuracy_baseline']
            row['rel_improvement'] = (row['accuracy_jit'] - base) / base if base > 0 else None
            report.rows.append(row)
        logger.info("run %d at t=%.1f min: baseline age %.1f min, jit age %.1f min",
                    run, t, baseline.age_at(t), fresh.age_at(t))
    return report


def probe_drift(config, noise=None):
    """
    Readout probes over time: every qubit prepared in |0> and (separately) |1>
    once per interval. Returns a long DataFrame with one row per (time, qubit).
    """
    topology = build_topology(config.device)
    if noise is None:
        noise = init_noise(topology, config.drift_params())
    zeros, ones = readout_cal_circuits(topology)
    start = noise.clock_min
    steps = int(config.probe_span_min // config.probe_interval_min) + 1
    records = []
    for i in tqdm(range(steps), desc="drift probe", disable=not settings.SHOW_PROGRESS):
        t = start + i * config.probe_interval_min
        noise.advance_to(t)
        c0 = run_noisy(ExecutionSpec(zeros, config.cal_shots, derive_seed(config.seed, _PROBE, i, 0), t), noise)
        c1 = run_noisy(ExecutionSpec(ones, config.cal_shots, derive_seed(config.seed, _PROBE, i, 1), t), noise)
        p01, p10 = noise.p_read_0to1, noise.p_read_1to0
        for q in range(topology.n_qubits):
            records.append({
                'time_min': t,
                'qubit': q,
                'accuracy_0': 1 - c0.bit_ones(q) / config.cal_shots,
                'accuracy_1': c1.bit_ones(q) / config.cal_shots,
                'true_readout_err': float((p01[q] + p10[q]) / 2),
                'persistent_bad': q in noise.bad_qubits,
            })
    return pd.DataFrame(records)
