#!/usr/bin/env python3
"""
Just-in-time transpilation toolkit - command line.

Subcommands:
    calibrate    run a calibration job (or read the oracle) and write a snapshot
    transpile    circuit + snapshot -> transpiled circuit + layout sidecar
    bench gen    write benchmark circuits and their expected outputs
    run          execute a physical circuit on the noisy simulator
    experiment   run the COTD vs JIT scenario and write the report
    probe        hourly readout probes of the drifting device
    heatmap      DOT heatmap of a snapshot, optionally with a layout
    report       aggregates of a CSV report

Usage:
    python execution/jit_transpile.py experiment --config data/scenarios/dedicated.cfg --seed 1
    python execution/jit_transpile.py calibrate --time 600 --out data/reports

Exit codes: 0 success, 1 invalid input, 2 internal error.
"""

import argparse
import logging
import sys
from pathlib import Path

if __package__ in (None, ''):
    sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from execution import settings
from execution.benchmarks import build_suite, expected_text
from execution.calibration import run_calibration
from execution.circuit_core import decompose_to_basis, emit_circuit, parse_circuit
from execution.device_model import build_topology, init_noise, true_snapshot
from execution.errors import ConfigError, ReportError, ValidationError
from execution.heatmap import emit_heatmap
from execution.noisy_simulator import counts_to_text, derive_seed, execute
from execution.reporting import FORMATS, SUFFIX, emit_report, read_report_csv, render_summary
from execution.scenario import probe_drift, run_scenario
from execution.settings import load_scenario
from execution.snapshot import snapshot_from_json, snapshot_to_json
from execution.transpiler import layout_from_text, transpile

logger = logging.getLogger('jit_transpile')

# seed stream tag of CLI-level calibrations
_CLI_CAL = 21


def _read(path):
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"file not found: {path}")
    return path.read_text()


def _write(out_dir, name, text):
    out_dir = Path(out_dir)
    path = out_dir / name
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise ReportError(f"cannot write output: {exc.strerror}", path)
    return path


def _fmt_time(t):
    return f"{t:g}".replace('.', 'p')


def _config(args):
    config = load_scenario(args.config, seed=args.seed)
    if getattr(args, 'device', None):
        config = config.with_overrides(device=args.device)
    return config


def _load_snapshot(path, device=None):
    text = _read(path)
    snap = snapshot_from_json(text)
    topology = build_topology(device or snap.device)
    return snapshot_from_json(text, topology), topology


def cmd_calibrate(args):
    config = _config(args)
    topology = build_topology(config.device)
    print(f"📂 Device {topology.name}: {topology.n_qubits} qubits, {len(topology.edges)} couplings")
    noise = init_noise(topology, config.drift_params())
    noise.advance_to(args.time)
    if args.oracle:
        snapshot = true_snapshot(noise)
    else:
        snapshot, job = run_calibration(
            noise, shots=config.cal_shots, lengths=config.rb_lengths, samples=config.rb_samples,
            seed=derive_seed(config.seed, _CLI_CAL), gate_err_1q_prior=config.gate_err_1q_prior,
            rb_1q=config.rb_1q)
        print(f"   {job.n_circuits} calibration circuits in {len(job.batches)} RB batches")
    kind = 'oracle' if args.oracle else 'estimated'
    path = _write(args.out, f"snapshot_{topology.name}_t{_fmt_time(args.time)}_{kind}.json",
                  snapshot_to_json(snapshot))
    print(f"✅ Snapshot saved to {path}")


def cmd_transpile(args):
    circuit = parse_circuit(_read(args.circuit))
    snapshot, topology = _load_snapshot(args.snapshot, args.device)
    print(f"📂 {circuit.name or args.circuit}: {circuit.n_qubits} qubits, {len(circuit)} gates")
    result = transpile(circuit, topology, snapshot, level=args.level, seed=args.seed or 0)
    stem = Path(args.circuit).stem
    out = _write(args.out, f"{stem}.transpiled.txt", emit_circuit(result.physical_circuit))
    side = _write(args.out, f"{stem}.layout.txt", result.initial_layout.to_text())
    print(f"🎯 Level {args.level} on {topology.name}: cost {result.cost:.4f}, {result.n_swaps} swaps")
    print(f"✅ Transpiled circuit saved to {out}")
    print(f"✅ Layout saved to {side}")


def cmd_bench_gen(args):
    suite = build_suite(args.suite, args.seed or 0)
    for bench in suite:
        stem = f"{bench.family}_{bench.n}"
        _write(args.out, f"{stem}.circuit.txt", emit_circuit(bench.circuit))
        _write(args.out, f"{stem}.expected.txt", expected_text(bench))
        print(f"   {bench.name}: {bench.circuit.n_qubits} qubits, expected {bench.expected}")
    print(f"✅ {len(suite)} benchmark(s) written to {args.out}")


def cmd_run(args):
    config = _config(args)
    topology = build_topology(config.device)
    circuit = decompose_to_basis(parse_circuit(_read(args.circuit)))
    noise = init_noise(topology, config.drift_params())
    noise.advance_to(args.time)
    shots = args.shots or config.shots
    counts = execute(circuit, noise, shots, derive_seed(config.seed, int(round(args.time * 1000))))
    path = _write(args.out, f"{Path(args.circuit).stem}.counts.txt", counts_to_text(counts))
    top = max(counts.histogram.items(), key=lambda kv: (kv[1], kv[0]))
    print(f"🎯 Most frequent outcome {top[0]} ({top[1]}/{shots})")
    print(f"✅ Counts saved to {path}")


def cmd_experiment(args):
    config = _config(args)
    print(f"📂 Scenario: {config.mode} on {config.device}, {config.runs} runs, seed {config.seed}")
    report = run_scenario(config)
    formats = FORMATS if args.format == 'all' else (args.format,)
    for fmt in formats:
        path = emit_report(report, fmt, Path(args.out) / f"experiment_{config.mode}_seed{config.seed}{SUFFIX[fmt]}")
        print(f"✅ {fmt} report saved to {path}")
    frame = report.to_frame()
    improved = (frame['accuracy_jit'] > frame['accuracy_baseline']).mean()
    print(f"✨ JIT improved {improved:.0%} of {len(frame)} cells")


def cmd_probe(args):
    config = _config(args)
    print(f"📂 Probing {config.device} every {config.probe_interval_min:g} min for {config.probe_span_min:g} min")
    frame = probe_drift(config)
    path = Path(args.out) / f"probe_{config.device}_seed{config.seed}.csv"
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, lineterminator='\n')
    except OSError as exc:
        raise ReportError(f"cannot write probe data: {exc.strerror}", path)
    print(f"✅ Probe series ({len(frame)} rows) saved to {path}")


def cmd_heatmap(args):
    snapshot, topology = _load_snapshot(args.snapshot, args.device)
    layout = layout_from_text(_read(args.layout), topology.n_qubits) if args.layout else None
    circuit = parse_circuit(_read(args.circuit)) if args.circuit else None
    path = _write(args.out, f"heatmap_{topology.name}_t{_fmt_time(snapshot.timestamp_min)}.dot",
                  emit_heatmap(snapshot, topology, layout, circuit))
    print(f"✅ Heatmap saved to {path}")


def cmd_report(args):
    frame = read_report_csv(args.report)
    text = render_summary(frame)
    print(text, end='')
    if args.out_file:
        path = _write(Path(args.out_file).parent, Path(args.out_file).name, text)
        print(f"✅ Summary saved to {path}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, default=None, help='scenario file (key=value)')
    common.add_argument('--seed', type=int, default=None, help='master seed (overrides the config)')
    common.add_argument('--out', type=Path, default=settings.REPORT_DIR, help='output directory')

    parser = argparse.ArgumentParser(description='Just-in-time noise-aware transpilation toolkit')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('calibrate', parents=[common], help='emit a calibration snapshot')
    p.add_argument('--device', default=None)
    p.add_argument('--time', type=float, default=0.0, help='device clock in minutes')
    p.add_argument('--oracle', action='store_true', help='write the ground truth instead of estimating')
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser('transpile', parents=[common], help='transpile a circuit against a snapshot')
    p.add_argument('circuit', type=Path)
    p.add_argument('--snapshot', type=Path, required=True)
    p.add_argument('--device', default=None)
    p.add_argument('--level', type=int, choices=(0, 1, 2, 3), default=3)
    p.set_defaults(func=cmd_transpile)

    p = sub.add_parser('bench', help='benchmark generators')
    bench_sub = p.add_subparsers(dest='bench_command', required=True)
    g = bench_sub.add_parser('gen', parents=[common], help='write benchmark instances')
    g.add_argument('suite', help="e.g. 'hs(4)' or 'bv(4),qft(3)'")
    g.set_defaults(func=cmd_bench_gen)

    p = sub.add_parser('run', parents=[common], help='execute a physical circuit')
    p.add_argument('circuit', type=Path)
    p.add_argument('--device', default=None)
    p.add_argument('--time', type=float, default=0.0)
    p.add_argument('--shots', type=int, default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser('experiment', parents=[common], help='COTD vs JIT scenario')
    p.add_argument('--format', choices=FORMATS + ('all',), default='csv')
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser('probe', parents=[common], help='readout drift probe')
    p.add_argument('--device', default=None)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser('heatmap', parents=[common], help='DOT heatmap of a snapshot')
    p.add_argument('--snapshot', type=Path, required=True)
    p.add_argument('--device', default=None)
    p.add_argument('--layout', type=Path, default=None, help='layout sidecar (v<i> -> p<j>)')
    p.add_argument('--circuit', type=Path, default=None)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser('report', parents=[common], help='aggregates of a CSV report')
    p.add_argument('report', type=Path)
    p.add_argument('--out-file', type=Path, default=None)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, settings.LOG_LEVEL, logging.WARNING),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        if args.seed is not None and args.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {args.seed}")
        args.func(args)
    except ValidationError as exc:
        print(f"❌ {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        logger.exception("internal error")
        print(f"❌ Internal error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == '__main__':
    sys.exit(main())
