"""
Acceptance tests at full experiment size.

Statistical recovery of the calibration job, layout optimality, semantic
preservation across levels and the stale-versus-fresh experiment itself.
These take minutes; they only run with JITQ_RUN_SLOW=true.
"""

import numpy as np
import pytest

from execution.benchmarks import FAMILIES, accuracy, build_suite, make_instance
from execution.calibration import DEFAULT_LENGTHS, estimate_readout, fit_decay, readout_cal_circuits, run_calibration
from execution.circuit_core import decompose_to_basis, gate_stats
from execution.device_model import DriftParams, build_topology, init_noise, static_noise, true_snapshot
from execution.noisy_simulator import derive_seed, execute
from execution.reporting import summarize
from execution.scenario import run_scenario
from execution.settings import ScenarioConfig, load_scenario
from execution.transpiler import (
    brute_force_layouts, circuit_cost, route, score_layout, select_layout, transpile, verify_equivalence,
)

pytestmark = [pytest.mark.slow]


def instances_up_to(n_max, width, seed):
    """One seeded instance per (family, n) that fits on `width` qubits."""
    rng = np.random.default_rng(seed)
    out = []
    for family in FAMILIES:
        for n in range(1, n_max + 1):
            if family == 'hs' and n % 2:
                continue
            if family == 'toffoli' and n < 2:
                continue
            bench = make_instance(family, n, rng)
            if bench.circuit.n_qubits <= width:
                out.append(bench)
    return out


class TestSemanticPreservation:
    """Every level keeps the benchmark's unitary and readout mapping."""

    @pytest.mark.parametrize('device', ['line(6)', 'tree(7)'])
    def test_all_families_all_levels(self, device):
        topology = build_topology(device)
        noise = init_noise(topology, DriftParams(seed=11))
        snap = true_snapshot(noise)
        for bench in instances_up_to(4, topology.n_qubits, seed=5):
            for level in range(4):
                t = transpile(bench.circuit, topology, snap, level=level, seed=1)
                assert verify_equivalence(bench.circuit, t) >= 1 - 1e-9, (bench.name, level)


class TestCalibrationRecovery:
    """The calibration job recovers a static ground truth."""

    def test_readout_within_three_standard_errors(self):
        topology = build_topology('paris27')
        shots = 65536
        inside = total = 0
        for seed in range(20):
            noise = init_noise(topology, DriftParams(seed=seed, volatility=0.0)).set_static(gate1q=0.0)
            zeros, ones = readout_cal_circuits(topology)
            est = estimate_readout(execute(zeros, noise, shots, derive_seed(seed, 1)),
                                   execute(ones, noise, shots, derive_seed(seed, 2)))
            for r in est:
                p01, p10 = noise.p_read_0to1[r.qubit], noise.p_read_1to0[r.qubit]
                se = np.sqrt((p01 * (1 - p01) + p10 * (1 - p10)) / (4 * shots))
                inside += abs(r.readout_err - (p01 + p10) / 2) <= 3 * se
                total += 1
        assert inside / total >= 0.95

    @pytest.mark.parametrize('p', [5e-3, 1.5e-2, 5e-2])
    def test_per_cx_error_within_25_percent(self, p):
        topology = build_topology('line(4)')
        inside = total = 0
        for seed in range(20):
            noise = static_noise(topology, p_gate_2q=p, seed=seed)
            snap, _ = run_calibration(noise, shots=4096, lengths=DEFAULT_LENGTHS, samples=5,
                                      seed=seed, gate_err_1q_prior=0.0)
            for e in snap.edges:
                inside += abs(e.epc_2q - p) <= 0.25 * p
                total += 1
        assert inside / total >= 0.9

    def test_decay_fit_under_binomial_noise(self):
        lengths = (1, 4, 16, 32, 64)
        good = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            points = [(m, rng.binomial(4096, 0.75 * 0.96 ** m + 0.25) / 4096) for m in lengths]
            good += abs(fit_decay(points).alpha - 0.96) <= 0.01
        assert good >= 90

    def test_noise_free_estimates(self):
        noise = static_noise(build_topology('line(5)'))
        snap, _ = run_calibration(noise, seed=4, gate_err_1q_prior=0.0)
        assert max(q.readout_err for q in snap.qubits) < 2e-3
        assert max(e.epc_2q for e in snap.edges) < 2e-3


class TestDrift:
    """Persistently bad elements stay bad over a day."""

    def test_persistent_bad_elements_stand_out(self):
        topology = build_topology('paris27')
        ratios = []
        for seed in range(10):
            noise = init_noise(topology, DriftParams(seed=seed))
            readout, gate2q = [], []
            for _ in range(24):
                noise.advance(60.0)
                readout.append((noise.p_read_0to1 + noise.p_read_1to0) / 2)
                gate2q.append(noise.p_gate_2q.copy())
            readout, gate2q = np.mean(readout, axis=0), np.mean(gate2q, axis=0)
            for values, flagged in ((readout, noise.bad_qubits), (gate2q, noise.bad_edges)):
                mask = np.zeros(len(values), dtype=bool)
                mask[list(flagged)] = True
                if mask.any() and not mask.all():
                    ratios.append(values[mask].mean() / np.median(values[~mask]))
        assert ratios
        assert min(ratios) >= 3


class TestLayoutOptimality:
    """Exact layout search matches exhaustive enumeration."""

    def test_hundred_trials(self):
        devices = [build_topology(d) for d in ('line(6)', 'ring(7)', 'tree(7)', 'grid(2,4)', 'grid(3,3)')]
        rng = np.random.default_rng(0)
        swap_free = 0
        for trial in range(100):
            topology = devices[trial % len(devices)]
            snap = true_snapshot(init_noise(topology, DriftParams(seed=trial)))
            family = FAMILIES[trial % len(FAMILIES)]
            n = {'bv': 4, 'hs': 4, 'qft': 5, 'toffoli': 3, 'adder': 1}[family]
            c = decompose_to_basis(make_instance(family, n, rng).circuit)
            assert c.n_qubits <= 5
            layout = select_layout(c, topology, snap, seed=trial)
            best = min(score for _, score in brute_force_layouts(c, topology, snap))
            assert score_layout(c, layout, snap, topology) == pytest.approx(best, abs=1e-12)
            routed, _, n_swaps = route(c, layout, topology, snap)
            if n_swaps == 0:
                assert best == pytest.approx(circuit_cost(routed, snap), rel=1e-9)
                swap_free += 1
        assert swap_free > 0

    def test_bad_readout_qubit_is_not_measured(self):
        topology = build_topology('paris27')
        noise = init_noise(topology, DriftParams(seed=2))
        read = noise.p_read_0to1.copy()
        read[13] = 0.4
        noise.set_static(read01=read, read10=read)
        snap = true_snapshot(noise)
        for bench in build_suite('bv(4),hs(4),qft(4)', seed=1):
            t = transpile(bench.circuit, topology, snap, level=3, seed=0)
            assert 13 not in gate_stats(t.physical_circuit).measured_qubits


class TestAccuracyBySize:
    """Larger instances of a family lose accuracy under the same noise."""

    def test_ordering(self):
        config = ScenarioConfig()
        topology = build_topology('paris27')
        noise = static_noise(topology, p_read_0to1=config.readout_mean,
                             p_read_1to0=config.readout_mean * config.read_asymmetry,
                             p_gate_1q=config.gate_1q_mean, p_gate_2q=config.gate_2q_mean)
        snap = true_snapshot(noise)
        means = {}
        for name in ('hs(4)', 'hs(6)', 'hs(8)', 'qft(4)', 'qft(6)'):
            scores = []
            for seed in range(10):
                bench = build_suite(name, seed)[0]
                t = transpile(bench.circuit, topology, snap, level=3, seed=seed)
                counts = execute(t.physical_circuit, noise, 4096, derive_seed(seed, 7))
                scores.append(accuracy(counts, bench.expected))
            means[name] = np.mean(scores)
        assert means['hs(4)'] >= means['hs(6)'] - 0.02
        assert means['hs(6)'] >= means['hs(8)'] - 0.02
        assert means['qft(4)'] >= means['qft(6)'] - 0.02


class TestStaleVersusFresh:
    """The dedicated-mode experiment on paris27."""

    def test_fresh_calibration_wins(self):
        passed = 0
        for seed in (0, 1, 2):
            report = run_scenario(load_scenario('dedicated.cfg', seed=seed))
            overall = summarize(report.to_frame())['overall']
            pvalue = overall['paired_test']['pvalue']
            if (overall['mean_rel_improvement'] > 0 and pvalue is not None and pvalue < 0.05
                    and overall['win_rate'] >= 0.6):
                passed += 1
        assert passed >= 2

    def test_null_control(self):
        config = load_scenario('dedicated.cfg', seed=0).with_overrides(drift_volatility=0.0)
        frame = run_scenario(config).to_frame()
        diff = frame['rel_improvement'].dropna().to_numpy(dtype=float)
        stderr = diff.std(ddof=1) / np.sqrt(len(diff))
        assert abs(diff.mean()) <= 2 * stderr
