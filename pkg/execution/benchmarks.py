"""
Benchmark circuit generators with known reference outputs.

Families: Bernstein-Vazirani (bv), hidden shift (hs), QFT (qft), multi-controlled
Toffoli (toffoli) and the Cuccaro ripple-carry adder (adder). Every instance is
deterministic under ideal execution; `expected` is the bitstring it must read
(clbit 0 rightmost).
"""

import logging
import re
import zlib
from dataclasses import dataclass, field

import numpy as np

from execution.circuit_core import (
    PI, Circuit, ccx, cu1, cx, cz, h, inverse, measure, swap, u1, x,
)
from execution.errors import ValidationError

logger = logging.getLogger(__name__)

FAMILIES = ('bv', 'hs', 'qft', 'toffoli', 'adder')
_ALIASES = {'hidden_shift': 'hs', 'hiddenshift': 'hs', 'bernstein_vazirani': 'bv'}

# 5 families x 3 sizes; with 5 repetitions this is the 75-circuit job
DEFAULT_JOB = ('bv(4),bv(6),bv(8),hs(4),hs(6),hs(8),qft(4),qft(5),qft(6),'
               'toffoli(2),toffoli(3),toffoli(4),adder(1),adder(2),adder(3)')
DEFAULT_REPETITIONS = 5
MAX_JOB_CIRCUITS = 900


@dataclass(frozen=True)
class BenchmarkInstance:
    name: str
    family: str
    n: int
    circuit: Circuit
    expected: str
    params: dict = field(default_factory=dict, compare=False)

    @property
    def n_readouts(self):
        return len(self.expected)


def _check_bits(bits, n, what):
    if len(bits) != n or any(ch not in '01' for ch in bits):
        raise ValidationError(f"{what} must be a {n}-bit string, got '{bits}'")


def bv(n, secret):
    """Bernstein-Vazirani; data qubit q reads clbit q, the ancilla (qubit n) reads clbit n."""
    if n < 1:
        raise ValidationError(f"bv needs n >= 1, got {n}")
    _check_bits(secret, n, 'secret')
    anc = n
    gates = [x(anc), h(anc)]
    gates += [h(q) for q in range(n)]
    gates += [cx(q, anc) for q in range(n) if secret[n - 1 - q] == '1']
    gates += [h(q) for q in range(n)]
    gates += [h(anc), x(anc)]
    gates += [measure(q, q) for q in range(n + 1)]
    circuit = Circuit(n + 1, n + 1, gates, f"bv({n})")
    return BenchmarkInstance(f"bv({n})", 'bv', n, circuit, '0' + secret, {'secret': secret})


def hidden_shift(n, shift):
    """
    Hidden shift for the inner-product bent function f(x) = sum x_2i x_2i+1.

    H, shifted oracle (X-conjugated CZ pairs), H, dual oracle (CZ pairs), H.
    Two-qubit gates only ever touch the disjoint pairs (2i, 2i+1).
    """
    if n < 2 or n % 2:
        raise ValidationError(f"hidden shift needs an even n >= 2, got {n}")
    _check_bits(shift, n, 'shift')
    flips = [x(q) for q in range(n) if shift[n - 1 - q] == '1']
    pairs = [cz(2 * i, 2 * i + 1) for i in range(n // 2)]
    layer = [h(q) for q in range(n)]
    gates = layer + flips + pairs + flips + layer + pairs + layer
    gates += [measure(q, q) for q in range(n)]
    circuit = Circuit(n, n, gates, f"hs({n})")
    return BenchmarkInstance(f"hs({n})", 'hs', n, circuit, shift, {'shift': shift})


def _qft_rotations(n):
    """QFT without the final qubit reversal; qubit n-1 is the most significant."""
    gates = []
    for j in reversed(range(n)):
        gates.append(h(j))
        for m in reversed(range(j)):
            gates.append(cu1(PI / 2 ** (j - m), m, j))
    return gates


def qft_circuit(n):
    """Plain QFT on n qubits, final swaps included (no measurements)."""
    if n < 1:
        raise ValidationError(f"qft needs n >= 1, got {n}")
    gates = _qft_rotations(n) + [swap(q, n - 1 - q) for q in range(n // 2)]
    return Circuit(n, 0, gates, f"qft_circuit({n})")


def qft_bench(n, value):
    """
    Prepare the Fourier encoding of `value`, undo it with the inverse QFT.

    The inverse runs without swaps on reversed qubit labels, so qubit q ends up
    holding bit n-1-q and is measured into clbit n-1-q.
    """
    if n < 1:
        raise ValidationError(f"qft needs n >= 1, got {n}")
    if not 0 <= value < 2 ** n:
        raise ValidationError(f"qft value {value} is outside [0, {2 ** n})")
    prep = []
    for q in range(n):
        prep += [h(q), u1(2 * PI * value * 2 ** q / 2 ** n, q)]
    reverse = {q: n - 1 - q for q in range(n)}
    undo = [g.remap(reverse) for g in inverse(Circuit(n, 0, _qft_rotations(n))).gates]
    gates = prep + undo + [measure(q, n - 1 - q) for q in range(n)]
    circuit = Circuit(n, n, gates, f"qft({n})")
    return BenchmarkInstance(f"qft({n})", 'qft', n, circuit, format(value, f'0{n}b'), {'value': value})


def toffoli_bench(n, bits):
    """
    n-controlled NOT; input character i drives control qubit i (clbit n-i), the
    target is qubit n (clbit 0). For n >= 3 a V-chain of n-2 clean ancillas
    (qubits n+1..) computes the partial ANDs and is uncomputed afterwards.
    """
    if n < 2:
        raise ValidationError(f"toffoli needs n >= 2, got {n}")
    _check_bits(bits, n, 'input')
    target = n
    gates = [x(i) for i in range(n) if bits[i] == '1']
    if n == 2:
        gates.append(ccx(0, 1, target))
        n_qubits = 3
    else:
        anc = [n + 1 + k for k in range(n - 2)]
        chain = [ccx(0, 1, anc[0])]
        for k in range(1, n - 2):
            chain.append(ccx(k + 1, anc[k - 1], anc[k]))
        gates += chain
        gates.append(ccx(n - 1, anc[-1], target))
        gates += list(reversed(chain))
        n_qubits = 2 * n - 1
    gates += [measure(i, n - i) for i in range(n)]
    gates.append(measure(target, 0))
    circuit = Circuit(n_qubits, n + 1, gates, f"toffoli({n})")
    expected = bits + ('1' if bits == '1' * n else '0')
    return BenchmarkInstance(f"toffoli({n})", 'toffoli', n, circuit, expected, {'input': bits})


def _maj(c, b, a):
    return [cx(a, b), cx(a, c), ccx(c, b, a)]


def _uma(c, b, a):
    return [ccx(c, b, a), cx(a, c), cx(c, b)]


def _operand(value, n, what):
    if isinstance(value, str):
        _check_bits(value, n, what)
        return int(value, 2)
    value = int(value)
    if not 0 <= value < 2 ** n:
        raise ValidationError(f"{what} = {value} does not fit in {n} bits")
    return value


def adder_bench(n, a, b):
    """
    Cuccaro ripple-carry adder on 2n+2 qubits: carry-in 0, a_i = 1+i,
    b_i = 1+n+i, carry-out 2n+1. Sum bit i is read from b_i into clbit i and
    the carry-out into clbit n.
    """
    if n < 1:
        raise ValidationError(f"adder needs n >= 1, got {n}")
    a, b = _operand(a, n, 'a'), _operand(b, n, 'b')
    cin, cout = 0, 2 * n + 1
    qa = [1 + i for i in range(n)]
    qb = [1 + n + i for i in range(n)]
    gates = [x(qa[i]) for i in range(n) if (a >> i) & 1]
    gates += [x(qb[i]) for i in range(n) if (b >> i) & 1]
    gates += _maj(cin, qb[0], qa[0])
    for i in range(1, n):
        gates += _maj(qa[i - 1], qb[i], qa[i])
    gates.append(cx(qa[n - 1], cout))
    for i in reversed(range(1, n)):
        gates += _uma(qa[i - 1], qb[i], qa[i])
    gates += _uma(cin, qb[0], qa[0])
    gates += [measure(qb[i], i) for i in range(n)]
    gates.append(measure(cout, n))
    circuit = Circuit(2 * n + 2, n + 1, gates, f"adder({n})")
    return BenchmarkInstance(f"adder({n})", 'adder', n, circuit, format(a + b, f'0{n + 1}b'), {'a': a, 'b': b})


def accuracy(counts, expected):
    """Fraction of shots that read exactly `expected`."""
    if counts.n_clbits != len(expected):
        raise ValidationError(f"expected '{expected}' has width {len(expected)}, counts have {counts.n_clbits}")
    return counts.get(expected) / counts.shots


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

_ENTRY = re.compile(r'^\s*([a-z_]+)\s*\(\s*(\d+)\s*\)\s*$')


def parse_benchmark(text):
    """'hs(6)' -> ('hs', 6)."""
    m = _ENTRY.match(text.lower())
    if not m:
        raise ValidationError(f"cannot parse benchmark '{text}' (expected family(n))")
    family = _ALIASES.get(m.group(1), m.group(1))
    if family not in FAMILIES:
        raise ValidationError(f"unknown benchmark family '{m.group(1)}' (choose from {', '.join(FAMILIES)})")
    return family, int(m.group(2))


def _random_bits(rng, n):
    return ''.join('1' if b else '0' for b in rng.integers(0, 2, n))


def make_instance(family, n, rng):
    """Instance of one family with parameters drawn from `rng`."""
    if family == 'bv':
        return bv(n, _random_bits(rng, n))
    if family == 'hs':
        return hidden_shift(n, _random_bits(rng, n))
    if family == 'qft':
        return qft_bench(n, int(rng.integers(0, 2 ** n)))
    if family == 'toffoli':
        return toffoli_bench(n, _random_bits(rng, n))
    if family == 'adder':
        return adder_bench(n, int(rng.integers(0, 2 ** n)), int(rng.integers(0, 2 ** n)))
    raise ValidationError(f"unknown benchmark family '{family}'")


def build_suite(spec, seed=0):
    """
    Seeded instances for a comma-separated suite string.

    Parameters of each entry depend only on (seed, entry name), so adding an
    entry never changes the others.
    """
    entries = [s for s in spec.split(',') if s.strip()] if isinstance(spec, str) else list(spec)
    if not entries:
        raise ValidationError("benchmark suite is empty")
    suite = []
    for entry in entries:
        family, n = parse_benchmark(entry)
        name = f"{family}({n})"
        rng = np.random.default_rng([int(seed), zlib.crc32(name.encode())])
        suite.append(make_instance(family, n, rng))
    logger.debug("built suite of %d benchmarks (seed %s)", len(suite), seed)
    return suite


def default_suite(seed=0):
    return build_suite(DEFAULT_JOB, seed)


def job_size(suite, repetitions=DEFAULT_REPETITIONS):
    """Circuits submitted for one suite execution; must stay within MAX_JOB_CIRCUITS."""
    total = len(suite) * repetitions
    if total > MAX_JOB_CIRCUITS:
        raise ValidationError(f"job of {total} circuits exceeds the {MAX_JOB_CIRCUITS}-circuit limit")
    return total


def expected_text(instance):
    return f"expected {instance.expected}\n"
