"""
Integration tests for the command line and the Flask web application.

Runs the CLI subcommands end to end in a temporary directory and exercises
the API endpoints.
"""

import json

import pytest

from execution import jit_transpile, settings, sweep_drift
from execution.circuit_core import parse_circuit
from execution.device_model import build_topology
from execution.snapshot import snapshot_from_json, snapshot_to_dict, uniform_snapshot
from web.app import app

SMALL_SCENARIO = """\
# two-run scenario on a five-qubit line
mode=dedicated
device=line(5)
runs=2
shots=256
repetitions=2
cotd_age_min=120
jit_delay_min=10
span_min=120
suite=bv(2),hs(2)
seed=3
cal_shots=512
rb_lengths=1,4,12
rb_samples=2
probe_span_min=120
probe_interval_min=60
"""

BELL = "qubits 2; clbits 2;\nh q0;\ncx q0 q1;\nmeasure q0 -> c0;\nmeasure q1 -> c1;\n"


@pytest.fixture
def client():
    """Create test client for Flask app."""
    app.config['TESTING'] = True
    with app.test_client() as client:
        yield client


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / 'small.cfg'
    path.write_text(SMALL_SCENARIO)
    return path


@pytest.fixture
def oracle_snapshot(tmp_path):
    """Ground-truth snapshot of line(5) at t=30 written by the CLI."""
    out = tmp_path / 'snaps'
    assert jit_transpile.main(['calibrate', '--device', 'line(5)', '--time', '30', '--oracle',
                               '--out', str(out)]) == 0
    return out / 'snapshot_line(5)_t30_oracle.json'


@pytest.mark.integration
class TestCommandLine:
    """Test the jit_transpile subcommands."""

    def test_bench_gen(self, tmp_path):
        assert jit_transpile.main(['bench', 'gen', 'hs(4),bv(3)', '--out', str(tmp_path)]) == 0
        for stem in ('hs_4', 'bv_3'):
            circuit = parse_circuit((tmp_path / f'{stem}.circuit.txt').read_text())
            assert circuit.n_qubits >= 4
            assert (tmp_path / f'{stem}.expected.txt').read_text().strip()

    def test_calibrate_oracle(self, oracle_snapshot):
        snap = snapshot_from_json(oracle_snapshot.read_text(), build_topology('line(5)'))
        assert snap.origin == 'oracle'
        assert snap.timestamp_min == 30.0
        assert len(snap.qubits) == 5 and len(snap.edges) == 4

    def test_calibrate_estimated(self, tmp_path, scenario_file):
        assert jit_transpile.main(['calibrate', '--config', str(scenario_file), '--time', '15',
                                   '--out', str(tmp_path)]) == 0
        snap = snapshot_from_json((tmp_path / 'snapshot_line(5)_t15_estimated.json').read_text())
        assert snap.origin == 'estimated'

    def test_transpile_run_and_heatmap(self, tmp_path, oracle_snapshot):
        circuit = tmp_path / 'bell.txt'
        circuit.write_text(BELL)
        assert jit_transpile.main(['transpile', str(circuit), '--snapshot', str(oracle_snapshot),
                                   '--out', str(tmp_path)]) == 0
        physical = tmp_path / 'bell.transpiled.txt'
        sidecar = tmp_path / 'bell.layout.txt'
        assert parse_circuit(physical.read_text()).n_qubits == 5
        assert sidecar.read_text().startswith('v0 -> p')

        assert jit_transpile.main(['run', str(physical), '--device', 'line(5)', '--time', '30',
                                   '--shots', '100', '--out', str(tmp_path)]) == 0
        counts = (tmp_path / 'bell.transpiled.counts.txt').read_text()
        assert counts.startswith('shots 100')

        assert jit_transpile.main(['heatmap', '--snapshot', str(oracle_snapshot), '--layout', str(sidecar),
                                   '--circuit', str(circuit), '--out', str(tmp_path)]) == 0
        dot = (tmp_path / 'heatmap_line(5)_t30.dot').read_text()
        assert 'graph "line(5)" {' in dot
        assert 'penwidth=4' in dot

    def test_experiment_is_deterministic(self, tmp_path, scenario_file):
        first, second = tmp_path / 'a', tmp_path / 'b'
        for out in (first, second):
            assert jit_transpile.main(['experiment', '--config', str(scenario_file), '--format', 'all',
                                       '--out', str(out)]) == 0
        name = 'experiment_dedicated_seed3'
        assert (first / f'{name}.csv').read_bytes() == (second / f'{name}.csv').read_bytes()
        assert (first / f'{name}.txt').exists()
        doc = json.loads((first / f'{name}.json').read_text())
        assert doc

    def test_report_summary(self, tmp_path, scenario_file, capsys):
        jit_transpile.main(['experiment', '--config', str(scenario_file), '--out', str(tmp_path)])
        capsys.readouterr()
        summary = tmp_path / 'summary.txt'
        assert jit_transpile.main(['report', str(tmp_path / 'experiment_dedicated_seed3.csv'),
                                   '--out-file', str(summary)]) == 0
        assert 'win rate' in capsys.readouterr().out
        assert 'cells: 4 over 2 runs' in summary.read_text()

    def test_probe(self, tmp_path, scenario_file):
        assert jit_transpile.main(['probe', '--config', str(scenario_file), '--out', str(tmp_path)]) == 0
        lines = (tmp_path / 'probe_line(5)_seed3.csv').read_text().splitlines()
        assert lines[0].startswith('time_min,qubit')
        assert len(lines) == 1 + 3 * 5

    def test_seed_flag_overrides_config(self, tmp_path, scenario_file):
        assert jit_transpile.main(['probe', '--config', str(scenario_file), '--seed', '8',
                                   '--out', str(tmp_path)]) == 0
        assert (tmp_path / 'probe_line(5)_seed8.csv').exists()

    def test_report_takes_common_flags(self, tmp_path, scenario_file, capsys):
        jit_transpile.main(['experiment', '--config', str(scenario_file), '--out', str(tmp_path)])
        code = jit_transpile.main(['report', str(tmp_path / 'experiment_dedicated_seed3.csv'),
                                   '--config', str(scenario_file), '--seed', '3', '--out', str(tmp_path)])
        assert code == 0
        assert 'win rate' in capsys.readouterr().out


@pytest.mark.integration
class TestExitCodes:
    """Test that failures map to exit codes instead of tracebacks."""

    def test_missing_circuit_file(self, tmp_path, oracle_snapshot, capsys):
        code = jit_transpile.main(['transpile', str(tmp_path / 'nope.txt'), '--snapshot', str(oracle_snapshot),
                                   '--out', str(tmp_path)])
        assert code == 1
        assert 'file not found' in capsys.readouterr().err

    def test_malformed_circuit_reports_line(self, tmp_path, oracle_snapshot, capsys):
        circuit = tmp_path / 'bad.txt'
        circuit.write_text("qubits 2; clbits 0;\nh q0;\nfrobnicate q1;\n")
        code = jit_transpile.main(['transpile', str(circuit), '--snapshot', str(oracle_snapshot),
                                   '--out', str(tmp_path)])
        assert code == 1
        assert 'line 3' in capsys.readouterr().err

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / 'bad.cfg'
        cfg.write_text("mode=dedicated\nwarp_factor=9\n")
        assert jit_transpile.main(['experiment', '--config', str(cfg), '--out', str(tmp_path)]) == 1

    def test_uncoupled_physical_circuit(self, tmp_path):
        circuit = tmp_path / 'far.txt'
        circuit.write_text("qubits 4; clbits 1;\ncx q0 q3;\nmeasure q3 -> c0;\n")
        assert jit_transpile.main(['run', str(circuit), '--device', 'line(5)', '--out', str(tmp_path)]) == 1

    @pytest.mark.parametrize('argv', [
        ['probe', '--seed', '-1'],
        ['bench', 'gen', 'hs(2)', '--seed', '-1'],
        ['calibrate', '--device', 'line(5)', '--oracle', '--seed', '-4'],
    ])
    def test_negative_seed(self, tmp_path, argv, capsys):
        assert jit_transpile.main(argv + ['--out', str(tmp_path)]) == 1
        assert 'seed must be >= 0' in capsys.readouterr().err

    @pytest.mark.parametrize('time', ['inf', 'nan', '1e12'])
    def test_clock_past_horizon(self, tmp_path, time):
        code = jit_transpile.main(['calibrate', '--device', 'line(5)', '--oracle', '--time', time,
                                   '--out', str(tmp_path)])
        assert code == 1

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / 'taken'
        blocker.write_text('not a directory')
        code = jit_transpile.main(['calibrate', '--device', 'line(5)', '--oracle', '--out', str(blocker)])
        assert code == 2


@pytest.mark.integration
class TestDriftSweep:
    """Test the volatility sweep script."""

    def test_sweep_writes_one_row_per_value(self, tmp_path, scenario_file):
        assert sweep_drift.main(['--config', str(scenario_file), '--volatilities', '0,0.1',
                                 '--out', str(tmp_path)]) == 0
        lines = (tmp_path / 'sweep_dedicated_seed3.csv').read_text().splitlines()
        assert len(lines) == 3

    def test_bad_values(self, tmp_path, scenario_file):
        assert sweep_drift.main(['--config', str(scenario_file), '--volatilities', 'fast',
                                 '--out', str(tmp_path)]) == 1

    def test_unwritable_output(self, tmp_path, scenario_file, capsys):
        blocker = tmp_path / 'taken'
        blocker.write_text('not a directory')
        assert sweep_drift.main(['--config', str(scenario_file), '--volatilities', '0',
                                 '--out', str(blocker)]) == 2
        assert 'cannot write sweep' in capsys.readouterr().err

    def test_negative_seed(self, tmp_path, scenario_file):
        assert sweep_drift.main(['--config', str(scenario_file), '--seed', '-1',
                                 '--out', str(tmp_path)]) == 1


@pytest.mark.integration
class TestFlaskRoutes:
    """Test Flask application routes."""

    def test_index(self, client):
        response = client.get('/')
        assert response.status_code == 200
        data = response.get_json()
        assert 'paris27' in data['presets']
        assert 'dedicated.cfg' in data['scenarios']

    def test_device(self, client):
        response = client.get('/devices/line(5)')
        assert response.status_code == 200
        data = response.get_json()
        assert data['n_qubits'] == 5
        assert data['edges'] == [[0, 1], [1, 2], [2, 3], [3, 4]]

    def test_unknown_device(self, client):
        response = client.get('/devices/atlantis99')
        assert response.status_code == 400
        assert 'error' in response.get_json()

    def test_snapshot_at_clock_time(self, client):
        response = client.get('/snapshot/line(5)?time=1:00')
        assert response.status_code == 200
        data = response.get_json()
        assert data['timestamp_min'] == 60.0
        assert data['clock'] == '01:00'
        assert data['origin'] == 'oracle'

    @pytest.mark.parametrize('query', ['time=soon', 'time=-5', 'time=1e12', 'time=inf', 'time=nan',
                                       'kind=guess', 'seed=x', 'seed=-1'])
    def test_snapshot_bad_query(self, client, query):
        response = client.get(f'/snapshot/line(5)?{query}')
        assert response.status_code == 400

    def test_transpile_by_device(self, client):
        response = client.post('/transpile', json={'circuit': BELL, 'device': 'line(5)', 'time': '30'})
        assert response.status_code == 200
        data = response.get_json()
        assert data['swaps'] == 0
        assert len(data['layout_id']) == 10
        assert parse_circuit(data['circuit']).n_qubits == 5

    def test_transpile_past_horizon(self, client):
        response = client.post('/transpile', json={'circuit': BELL, 'device': 'line(5)', 'time': 'inf'})
        assert response.status_code == 400
        assert 'invalid time' in response.get_json()['error']

    def test_transpile_inline_snapshot(self, client):
        line5 = build_topology('line(5)')
        body = {'circuit': BELL, 'snapshot': snapshot_to_dict(uniform_snapshot(line5)), 'level': 1}
        response = client.post('/transpile', json=body)
        assert response.status_code == 200
        assert response.get_json()['level'] == 1

    def test_transpile_negative_seed(self, client):
        response = client.post('/transpile', json={'circuit': BELL, 'device': 'line(5)', 'seed': -2})
        assert response.status_code == 400

    def test_transpile_needs_circuit(self, client):
        response = client.post('/transpile', json={'device': 'line(5)'})
        assert response.status_code == 400

    def test_transpile_bad_circuit(self, client):
        response = client.post('/transpile', json={'circuit': 'qubits 2; clbits 0;\ncx q0;\n', 'device': 'line(5)'})
        assert response.status_code == 400
        assert 'line 2' in response.get_json()['error']

    def test_heatmap(self, client):
        response = client.post('/heatmap', json={'device': 'line(5)', 'time': 30, 'layout': [2, 3]})
        assert response.status_code == 200
        assert response.get_json()['dot'].startswith('//')

    def test_heatmap_marks_cz_coupling(self, client):
        body = {'device': 'line(5)', 'layout': [2, 3], 'circuit': 'qubits 2; clbits 0;\ncz q0 q1;\n'}
        response = client.post('/heatmap', json=body)
        assert response.status_code == 200
        thick = [ln for ln in response.get_json()['dot'].splitlines() if 'penwidth=4' in ln]
        assert len(thick) == 1 and thick[0].strip().startswith('q2 -- q3')

    def test_heatmap_needs_snapshot(self, client):
        assert client.post('/heatmap', json={}).status_code == 400


@pytest.mark.integration
class TestReportRoutes:
    """Test the report listing and download endpoints."""

    @pytest.fixture(autouse=True)
    def report_dir(self, tmp_path, monkeypatch):
        monkeypatch.setattr(settings, 'REPORT_DIR', tmp_path)
        (tmp_path / 'experiment_dedicated_seed0.csv').write_text('run_index\n0\n')
        return tmp_path

    def test_list(self, client):
        response = client.get('/reports')
        assert response.status_code == 200
        assert 'experiment_dedicated_seed0.csv' in json.dumps(response.get_json())

    def test_download(self, client):
        response = client.get('/reports/experiment_dedicated_seed0.csv')
        assert response.status_code == 200
        assert response.data.startswith(b'run_index')

    def test_missing(self, client):
        assert client.get('/reports/experiment_fairshare_seed0.csv').status_code == 404

    def test_bad_suffix(self, client):
        assert client.get('/reports/secrets.env').status_code == 400
