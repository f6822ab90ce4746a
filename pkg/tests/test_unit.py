"""
Unit tests for core functions.

Tests the circuit IR and text format, benchmark generators, peephole rewrites,
layouts, heatmap colours, scenario configuration and clock parsing.
"""

import math

import numpy as np
import pytest

from execution.benchmarks import (
    DEFAULT_JOB, MAX_JOB_CIRCUITS, accuracy, adder_bench, build_suite, bv,
    default_suite, hidden_shift, job_size, parse_benchmark, qft_bench, qft_circuit,
    toffoli_bench,
)
from execution.circuit_core import (
    PI, Circuit, Gate, ccx, cu1, cx, cz, decompose_to_basis, emit_circuit,
    gate_stats, h, inverse, measure, normalize_angle, parse_circuit, phase_fidelity,
    swap, u1, u2, u3, unitary_of, x, zyz_decompose,
)
from execution.device_model import build_topology, load_edge_list
from execution.errors import (
    CalibrationError, CircuitError, ConfigError, LayoutError, SimulationError,
    TopologyError, ValidationError,
)
from execution.heatmap import emit_heatmap, ramp_color
from execution.noisy_simulator import Counts, run_noiseless
from execution.settings import ScenarioConfig, config_from_mapping, load_scenario
from execution.snapshot import (
    CalibrationSnapshot, EdgeCalibration, QubitCalibration, check_coverage, snapshot_from_json,
    snapshot_to_json, uniform_snapshot,
)
from execution.transpiler import Layout, layout_from_text, layout_id, peephole_optimize
from web.utils.time_utils import format_clock, parse_clock

BELL = """\
# name: bell
qubits 2; clbits 2;
h q0;
cx q0 q1;
measure q0 -> c0;
measure q1 -> c1;
"""


@pytest.mark.unit
class TestAngles:
    """Test angle normalisation."""

    def test_range_is_half_open(self):
        """-pi maps to +pi; everything lands in (-pi, pi]."""
        assert normalize_angle(-PI) == pytest.approx(PI)
        assert normalize_angle(3 * PI) == pytest.approx(PI)
        assert normalize_angle(2 * PI + 0.25) == pytest.approx(0.25)

    def test_gate_params_are_normalised(self):
        g = u1(5 * PI / 2, 0)
        assert g.params[0] == pytest.approx(PI / 2)


@pytest.mark.unit
class TestGateValidation:
    """Test Gate and Circuit construction."""

    def test_cx_control_equals_target(self):
        with pytest.raises(CircuitError):
            cx(1, 1)

    def test_unknown_kind(self):
        with pytest.raises(CircuitError):
            Gate('foo', (0,))

    def test_wrong_param_count(self):
        with pytest.raises(CircuitError):
            Gate('u3', (0,), (0.1, 0.2))

    def test_non_finite_angle(self):
        with pytest.raises(CircuitError):
            u1(float('nan'), 0)

    def test_gate_after_measure(self):
        with pytest.raises(CircuitError):
            Circuit(1, 1, [measure(0, 0), x(0)])

    def test_clbit_written_twice(self):
        with pytest.raises(CircuitError):
            Circuit(2, 1, [measure(0, 0), measure(1, 0)])

    def test_qubit_out_of_range(self):
        with pytest.raises(CircuitError):
            Circuit(2, 0, [cx(0, 2)])


@pytest.mark.unit
class TestCircuitText:
    """Test parsing and emitting the circuit text format."""

    def test_parse_bell(self):
        c = parse_circuit(BELL)
        assert c.name == 'bell'
        assert (c.n_qubits, c.n_clbits, len(c)) == (2, 2, 4)
        assert c.measurements == {0: 0, 1: 1}

    def test_several_statements_per_line(self):
        c = parse_circuit("qubits 1; clbits 0; h q0; x q0;")
        assert [g.kind for g in c.gates] == ['h', 'x']

    def test_statement_may_span_lines(self):
        c = parse_circuit("qubits 1; clbits 0;\nu3 0.1\n 0.2 0.3 q0;")
        assert c.gates[0].params == pytest.approx((0.1, 0.2, 0.3))

    def test_emit_then_parse_is_identity(self):
        c = parse_circuit(BELL).with_gates([u3(0.1, -2.5, PI, 0), cx(0, 1), measure(1, 0)])
        again = parse_circuit(emit_circuit(c))
        assert again == c
        assert again.name == 'bell'

    @pytest.mark.parametrize('text, line', [
        ("qubits 1; clbits 0;\nh q0", 2),
        ("qubits 1; clbits 0;\nfoo q0;", 2),
        ("qubits 2; clbits 1;\nmeasure q0 -> c0;\nmeasure q1 -> c0;", 3),
        ("qubits 1; clbits 1;\nmeasure q0 -> c0;\nx q0;", 3),
        ("qubits 1; clbits 0;\ncx q0 q1;", 2),
        ("h q0;", 1),
    ])
    def test_errors_carry_line_numbers(self, text, line):
        with pytest.raises(CircuitError) as info:
            parse_circuit(text)
        assert info.value.line == line

    def test_missing_header(self):
        with pytest.raises(CircuitError):
            parse_circuit("# nothing here\n")


@pytest.mark.unit
class TestUnitaries:
    """Test matrices, decomposition and inversion."""

    def test_little_endian(self):
        assert unitary_of(Circuit(2, 0, [x(0)]))[1, 0] == pytest.approx(1)
        # control q0 set (index 1) flips q1 -> index 3
        assert unitary_of(Circuit(2, 0, [cx(0, 1)]))[3, 1] == pytest.approx(1)

    def test_decompose_preserves_unitary(self):
        c = Circuit(3, 0, [h(0), cz(0, 1), swap(1, 2), cu1(0.3, 2, 0), ccx(0, 1, 2),
                           Gate('t', (1,)), Gate('sdg', (2,)), Gate('y', (0,)), Gate('rz', (1,), (0.7,))])
        basis = decompose_to_basis(c)
        assert basis.is_basis()
        assert phase_fidelity(unitary_of(c), unitary_of(basis)) == pytest.approx(1.0)

    def test_toffoli_uses_six_cx(self):
        stats = gate_stats(decompose_to_basis(Circuit(3, 0, [ccx(0, 1, 2)])))
        assert stats.count_2q == 6

    def test_inverse(self):
        c = Circuit(2, 0, [u3(0.4, 1.1, -0.3, 0), u2(0.2, 0.9, 1), cx(0, 1), Gate('s', (1,)), cu1(0.8, 1, 0)])
        product = unitary_of(inverse(c)) @ unitary_of(c)
        assert phase_fidelity(product, np.eye(4)) == pytest.approx(1.0)

    def test_zyz_decompose(self):
        m = unitary_of(Circuit(1, 0, [h(0), Gate('t', (0,)), h(0)]))
        g = zyz_decompose(m, 0)
        assert phase_fidelity(unitary_of(Circuit(1, 0, [g])), m) == pytest.approx(1.0)
        assert zyz_decompose(np.eye(2), 0) is None
        assert zyz_decompose(np.diag([1, 1j]), 0).kind == 'u1'
        assert zyz_decompose(unitary_of(Circuit(1, 0, [h(0)])), 0).kind == 'u2'

    def test_gate_stats(self):
        stats = gate_stats(parse_circuit(BELL))
        assert (stats.count_1q, stats.count_2q, stats.depth) == (1, 1, 3)
        assert stats.width == 2
        assert stats.measured_qubits == {0, 1}


@pytest.mark.unit
class TestBenchmarks:
    """Test benchmark generators and suites."""

    def test_bv_layout(self):
        bench = bv(3, '101')
        assert bench.expected == '0101'
        assert bench.n_readouts == 4
        assert bench.circuit.n_qubits == 4

    @pytest.mark.parametrize('bench', [
        bv(3, '101'),
        bv(4, '0000'),
        hidden_shift(4, '1001'),
        hidden_shift(6, '011100'),
        qft_bench(3, 5),
        qft_bench(4, 0),
        toffoli_bench(2, '11'),
        toffoli_bench(2, '10'),
        toffoli_bench(3, '111'),
        toffoli_bench(4, '1101'),
        adder_bench(2, 3, 1),
        adder_bench(3, '101', '011'),
    ], ids=lambda b: f"{b.name}-{b.expected}")
    def test_noiseless_output_is_expected(self, bench):
        dist = run_noiseless(decompose_to_basis(bench.circuit))
        assert dist.get(bench.expected, 0.0) == pytest.approx(1.0, abs=1e-9)

    def test_toffoli_expected_strings(self):
        assert toffoli_bench(2, '11').expected == '111'
        assert toffoli_bench(2, '10').expected == '100'
        assert toffoli_bench(4, '1101').circuit.n_qubits == 7

    def test_adder_shape(self):
        bench = adder_bench(2, 3, 1)
        assert bench.expected == '100'
        assert bench.circuit.n_qubits == 6
        assert bench.n_readouts == 3

    def test_hidden_shift_needs_even_n(self):
        with pytest.raises(ValidationError):
            hidden_shift(3, '101')

    def test_hidden_shift_only_touches_pairs(self):
        basis = decompose_to_basis(hidden_shift(6, '110010').circuit)
        pairs = {tuple(sorted(g.qubits)) for g in basis.gates if g.kind == 'cx'}
        assert pairs == {(0, 1), (2, 3), (4, 5)}

    def test_qft_circuit_is_unitary_dft(self):
        n = 3
        dim = 2 ** n
        dft = np.array([[np.exp(2j * PI * j * k / dim) for k in range(dim)] for j in range(dim)]) / math.sqrt(dim)
        assert phase_fidelity(unitary_of(qft_circuit(n)), dft) == pytest.approx(1.0)

    def test_parse_benchmark(self):
        assert parse_benchmark('hidden_shift(6)') == ('hs', 6)
        assert parse_benchmark(' QFT( 4 ) ') == ('qft', 4)
        with pytest.raises(ValidationError):
            parse_benchmark('grover(3)')
        with pytest.raises(ValidationError):
            parse_benchmark('bv4')

    def test_suite_is_seeded_per_entry(self):
        alone = build_suite('bv(6)', seed=7)[0]
        mixed = build_suite('hs(4),bv(6)', seed=7)[1]
        assert alone.params == mixed.params
        assert build_suite('bv(6)', seed=7)[0].circuit == alone.circuit

    def test_default_job_fits(self):
        suite = default_suite()
        assert len(suite) == len(DEFAULT_JOB.split(','))
        assert job_size(suite) <= MAX_JOB_CIRCUITS

    def test_oversized_job_rejected(self):
        suite = build_suite(','.join(['hs(2)'] * 181))
        with pytest.raises(ValidationError):
            job_size(suite)

    def test_accuracy(self):
        counts = Counts({'01': 3, '11': 1}, 4, 2)
        assert accuracy(counts, '01') == 0.75
        assert accuracy(counts, '00') == 0.0
        with pytest.raises(ValidationError):
            accuracy(counts, '001')


@pytest.mark.unit
class TestCounts:
    """Test the readout histogram."""

    def test_bit_order(self):
        counts = Counts({'01': 3, '11': 1}, 4, 2)
        assert counts.bit_ones(0) == 4
        assert counts.bit_ones(1) == 1
        assert counts.marginal([1]).histogram == {'0': 3, '1': 1}

    def test_sum_must_match_shots(self):
        with pytest.raises(SimulationError):
            Counts({'0': 3}, 4, 1)


@pytest.mark.unit
class TestPeephole:
    """Test CX cancellation and single-qubit fusion."""

    def test_adjacent_cx_pair_cancels(self):
        c = Circuit(2, 0, [cx(0, 1), cx(0, 1)])
        assert len(peephole_optimize(c)) == 0

    def test_cancellation_after_fusion(self):
        c = Circuit(2, 0, [cx(0, 1), u1(0.3, 1), u1(-0.3, 1), cx(0, 1)])
        assert len(peephole_optimize(c)) == 0

    def test_blocked_cx_pair_stays(self):
        c = Circuit(2, 0, [cx(0, 1), u1(0.3, 1), cx(0, 1)])
        assert [g.kind for g in peephole_optimize(c).gates] == ['cx', 'u1', 'cx']

    def test_reversed_cx_does_not_cancel(self):
        c = Circuit(2, 0, [cx(0, 1), cx(1, 0)])
        assert len(peephole_optimize(c)) == 2

    def test_preserves_unitary(self):
        c = decompose_to_basis(Circuit(3, 0, [h(0), h(0), u3(0.2, 0.4, 0.6, 1), u2(0.1, 0.3, 1), cx(1, 2),
                                              cx(1, 2), ccx(0, 1, 2), u1(0.5, 2), u1(0.25, 2)]))
        out = peephole_optimize(c)
        assert len(out) < len(c)
        assert phase_fidelity(unitary_of(c), unitary_of(out)) == pytest.approx(1.0)

    def test_measurements_stay_last_on_wire(self):
        c = Circuit(1, 1, [u1(0.2, 0), u1(0.3, 0), measure(0, 0)])
        out = peephole_optimize(c)
        assert [g.kind for g in out.gates] == ['u1', 'measure']
        assert out.gates[0].params[0] == pytest.approx(0.5)


@pytest.mark.unit
class TestLayouts:
    """Test Layout validation, sidecar text and ids."""

    def test_not_injective(self):
        with pytest.raises(LayoutError):
            Layout((0, 0), 5)

    def test_outside_device(self):
        with pytest.raises(LayoutError):
            Layout((5,), 5)

    def test_sidecar_text(self):
        layout = Layout((2, 0, 4), 5)
        assert layout.to_text() == "v0 -> p2\nv1 -> p0\nv2 -> p4\n"
        assert layout_from_text(layout.to_text(), 5) == layout

    def test_sidecar_gaps_rejected(self):
        with pytest.raises(LayoutError):
            layout_from_text("v0 -> p1\nv2 -> p3\n", 5)

    def test_layout_id(self):
        a, b = Layout((2, 0, 4), 5), Layout((0, 2, 4), 5)
        assert layout_id(a) == layout_id(Layout((2, 0, 4), 27))
        assert layout_id(a) != layout_id(b)
        assert len(layout_id(a)) == 10


@pytest.mark.unit
class TestTopology:
    """Test presets and edge lists."""

    def test_parametric_presets(self):
        assert len(build_topology('line(5)').edges) == 4
        assert build_topology('line(5)').max_degree == 2
        grid = build_topology('grid(2,3)')
        assert (grid.n_qubits, len(grid.edges)) == (6, 7)
        assert len(build_topology('ring(6)').edges) == 6

    def test_device_presets(self):
        assert build_topology('paris27').n_qubits == 27
        assert build_topology('almaden20').n_qubits == 20
        assert build_topology('paris27').max_degree <= 3

    @pytest.mark.parametrize('spec', ['grid(3)', 'line(0)', 'mystery', 'ring(4,4)'])
    def test_bad_presets(self, spec):
        with pytest.raises(TopologyError):
            build_topology(spec)

    def test_edge_list_file(self, tmp_path):
        path = tmp_path / 'tiny.txt'
        path.write_text("# tiny device\n0 1\n1 2  # middle\n\n")
        topo = load_edge_list(path)
        assert topo.name == 'tiny'
        assert topo.edges == ((0, 1), (1, 2))

    def test_disconnected_rejected(self):
        with pytest.raises(TopologyError):
            build_topology([(0, 1), (2, 3)])

    def test_degree_limit(self):
        with pytest.raises(TopologyError):
            build_topology([(0, i) for i in range(1, 6)])


@pytest.mark.unit
class TestSnapshots:
    """Test snapshot validation and serialisation."""

    def test_json_round_trip(self, line5):
        snap = uniform_snapshot(line5, epc_2q=0.02, readout_err=0.01, timestamp_min=30.0)
        again = snapshot_from_json(snapshot_to_json(snap), line5)
        assert again == snap
        assert again.origin == 'synthetic'

    def test_missing_qubit(self, line5):
        snap = uniform_snapshot(build_topology('line(4)'))
        with pytest.raises(CalibrationError):
            check_coverage(snap, line5)

    def test_probability_range(self):
        with pytest.raises(CalibrationError):
            CalibrationSnapshot(0.0, 'x', 'oracle', [QubitCalibration(0, 0.6, 0.0, 0.3, 0.0)], [])

    def test_unknown_origin(self, line5):
        snap = uniform_snapshot(line5)
        with pytest.raises(CalibrationError):
            snap.relabel(origin='guess')

    def test_age(self, line5):
        assert uniform_snapshot(line5, timestamp_min=30.0).age_at(100.0) == 70.0


@pytest.mark.unit
class TestHeatmap:
    """Test the colour ramp and DOT output."""

    def test_ramp_stops(self):
        assert ramp_color(0.0, 0.0, 1.0) == '#00aa00'
        assert ramp_color(0.5, 0.0, 1.0) == '#0000ff'
        assert ramp_color(1.0, 0.0, 1.0) == '#ff0000'
        assert ramp_color(0.3, 0.3, 0.3) == '#00aa00'

    def test_dot_marks_used_elements(self, line5):
        snap = uniform_snapshot(line5)
        circuit = Circuit(2, 0, [cx(0, 1)])
        dot = emit_heatmap(snap, line5, Layout((2, 3), 5), circuit)
        lines = dot.splitlines()
        assert all(ln.startswith('//') for ln in lines[:3])
        assert 'graph "line(5)" {' in lines
        assert dot.count('style=filled') == 2
        assert any(ln.strip().startswith('q2 -- q3') and 'penwidth=4' in ln for ln in lines)
        assert sum('penwidth=2]' in ln for ln in lines) == 3

    def test_worst_edge_is_red(self, line5):
        qubits = [QubitCalibration(q, 0.02, 0.02, 0.02, 0.001) for q in range(5)]
        errors = {(0, 1): 0.01, (1, 2): 0.02, (2, 3): 0.09, (3, 4): 0.015}
        edges = [EdgeCalibration(a, b, errors[(a, b)]) for a, b in line5.edges]
        dot = emit_heatmap(CalibrationSnapshot(0.0, 'line(5)', 'estimated', qubits, edges), line5)
        red = [ln for ln in dot.splitlines() if '--' in ln and 'color="#ff0000"' in ln]
        assert [ln.split('[')[0].strip() for ln in red] == ['q2 -- q3']
        assert 'q0 -- q1 [color="#00aa00"' in dot
        assert 'min 0.01 (green) max 0.09 (red)' in dot

    def test_two_qubit_gates_mark_couplings(self, line5):
        circuit = Circuit(3, 0, [cz(0, 1), swap(1, 2)])
        dot = emit_heatmap(uniform_snapshot(line5), line5, Layout((1, 2, 3), 5), circuit)
        thick = {ln.split('[')[0].strip() for ln in dot.splitlines() if 'penwidth=4' in ln}
        assert thick == {'q1 -- q2', 'q2 -- q3'}

    def test_edgeless_device(self):
        single = build_topology('line(1)')
        dot = emit_heatmap(uniform_snapshot(single), single, Layout((0,), 1))
        assert 'edge epc_2q scale: min 0 (green) max 0 (red)' in dot
        assert dot.count('style=filled') == 1
        assert '--' not in dot.split('{', 1)[1]

    def test_layout_must_cover_circuit(self, line5):
        with pytest.raises(LayoutError):
            emit_heatmap(uniform_snapshot(line5), line5, Layout((0,), 5), Circuit(2, 0, [cx(0, 1)]))


@pytest.mark.unit
class TestScenarioConfig:
    """Test scenario configuration parsing."""

    def test_defaults(self):
        config = ScenarioConfig()
        assert config.spacing_min == pytest.approx(1440 / 8)
        assert config.cotd_policy == 'fixed-age'

    def test_mode_presets_then_explicit_keys(self):
        assert config_from_mapping({'mode': 'burst'}).runs == 4
        assert config_from_mapping({'mode': 'burst'}).cotd_policy == 'daily'
        assert config_from_mapping({'MODE': 'burst', 'runs': '6'}).runs == 6

    def test_coercion(self):
        config = config_from_mapping({'rb_lengths': '1,4,16', 'jit_delay_range': '5,15',
                                      'rb_1q': 'yes', 'run_spacing_min': 'auto'}, seed=9)
        assert config.rb_lengths == (1, 4, 16)
        assert config.jit_delay_range == (5.0, 15.0)
        assert config.rb_1q is True
        assert config.run_spacing_min is None
        assert config.seed == 9

    @pytest.mark.parametrize('values', [
        {'colour': 'blue'},
        {'runs': 'many'},
        {'runs': '0'},
        {'mode': 'weekend'},
        {'level': '5'},
        {'rb_lengths': '4,1,16'},
        {'jit_delay_range': '20,10'},
        {'seed': '-1'},
    ])
    def test_invalid_values(self, values):
        with pytest.raises(ConfigError):
            config_from_mapping(values)

    def test_load_file_and_seed_override(self, tmp_path):
        path = tmp_path / 'mine.cfg'
        path.write_text("# comment\nmode=fairshare\nruns=3\nseed=4\n")
        assert load_scenario(path).seed == 4
        config = load_scenario(path, seed=11)
        assert (config.mode, config.runs, config.seed) == ('fairshare', 3, 11)

    def test_shipped_scenarios(self):
        assert load_scenario('dedicated.cfg').mode == 'dedicated'
        assert load_scenario('burst.cfg').cotd_policy == 'daily'
        assert load_scenario('fairshare.cfg').jit_delay_range == (39.0, 120.0)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_scenario(tmp_path / 'absent.cfg')


@pytest.mark.unit
class TestClock:
    """Test device-clock parsing and formatting."""

    def test_parse(self):
        assert parse_clock("600") == 600.0
        assert parse_clock("10:00") == 600.0
        assert parse_clock("1:02:30") == 1590.0
        assert parse_clock(90) == 90.0

    @pytest.mark.parametrize('text', ["", None, "abc", "10:75", "1:25:00", "-5", "1:2:3:4",
                                      "1e12", "inf", "nan", "-inf"])
    def test_parse_invalid(self, text):
        assert parse_clock(text) is None

    def test_horizon(self):
        assert parse_clock("100", horizon=100) == 100.0
        assert parse_clock("100.5", horizon=100) is None
        assert parse_clock("2:00:00", horizon=1440) is None

    def test_format(self):
        assert format_clock(600) == "10:00"
        assert format_clock(1590) == "1d 02:30"
        assert format_clock(None) == ""
