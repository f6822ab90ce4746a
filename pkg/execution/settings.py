"""
Process-level settings and scenario configuration.

Environment knobs (read once from .env / the process environment):
    JITQ_SHOT_BLOCK     shots simulated per vectorised block (default 1024). Each block
                        draws from its own seed, so counts for a given seed change
                        when this changes. JITQ_WORKERS never changes them.
    JITQ_WORKERS        threads used to evaluate shot blocks (default 1)
    JITQ_LOG_LEVEL      logging level for the command-line tools (default WARNING)
    JITQ_PROGRESS       show tqdm progress bars (default true)
    JITQ_DATA_DIR       data directory (default <project>/data)
    JITQ_RUN_SLOW       enable the long acceptance tests (default false)
    JITQ_MAX_CLOCK_MIN  latest device-clock time accepted, in minutes (default 43200, 30 days)

Scenario files are flat `key=value` documents, e.g. data/scenarios/dedicated.cfg.
"""

import os
from dataclasses import dataclass, asdict, fields, replace
from pathlib import Path

from dotenv import load_dotenv, dotenv_values

from execution.errors import ConfigError

load_dotenv()

PROJECT_ROOT = Path(__file__).parent.parent


def _env_flag(name, default):
    return os.getenv(name, default).strip().lower() in ('1', 'true', 'yes', 'on')


SHOT_BLOCK = int(os.getenv('JITQ_SHOT_BLOCK', '1024'))
WORKERS = int(os.getenv('JITQ_WORKERS', '1'))
LOG_LEVEL = os.getenv('JITQ_LOG_LEVEL', 'WARNING').upper()
SHOW_PROGRESS = _env_flag('JITQ_PROGRESS', 'true')
DATA_DIR = Path(os.getenv('JITQ_DATA_DIR', str(PROJECT_ROOT / 'data')))
RUN_SLOW = _env_flag('JITQ_RUN_SLOW', 'false')
MAX_CLOCK_MIN = float(os.getenv('JITQ_MAX_CLOCK_MIN', '43200'))

TOPOLOGY_DIR = DATA_DIR / 'topologies'
SCENARIO_DIR = DATA_DIR / 'scenarios'
REPORT_DIR = DATA_DIR / 'reports'

MODES = ('fairshare', 'dedicated', 'burst', 'custom')
COTD_POLICIES = ('fixed-age', 'daily')
DEFAULT_SUITE = 'bv(4),hs(4),hs(6),qft(4),toffoli(2),adder(2)'


@dataclass(frozen=True)
class ScenarioConfig:
    """One experiment: device, drift, timing and suite. Every field has a default."""
    device: str = 'paris27'
    mode: str = 'dedicated'
    runs: int = 8
    shots: int = 4096
    repetitions: int = 5
    level: int = 3
    cotd_age_min: float = 600.0
    cotd_policy: str = 'fixed-age'
    jit_delay_min: float = 10.0
    jit_delay_range: tuple = (39.0, 120.0)
    span_min: float = 1440.0
    run_spacing_min: float = None
    suite: str = DEFAULT_SUITE
    seed: int = 0
    readout_mean: float = 2e-2
    read_asymmetry: float = 2.0
    gate_1q_mean: float = 1.5e-3
    gate_2q_mean: float = 1.5e-2
    drift_reversion_rate: float = 1 / 240
    drift_volatility: float = 0.055
    drift_spread: float = 0.25
    drift_bad_fraction: float = 0.1
    cal_shots: int = 4096
    rb_lengths: tuple = (1, 4, 16, 32, 64)
    rb_samples: int = 5
    gate_err_1q_prior: float = 1.5e-3
    rb_1q: bool = False
    probe_span_min: float = 1440.0
    probe_interval_min: float = 60.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}, got '{self.mode}'")
        if self.cotd_policy not in COTD_POLICIES:
            raise ConfigError(f"cotd_policy must be one of {', '.join(COTD_POLICIES)}, got '{self.cotd_policy}'")
        for key in ('runs', 'shots', 'repetitions', 'cal_shots', 'rb_samples'):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be >= 1, got {getattr(self, key)}")
        if self.level not in (0, 1, 2, 3):
            raise ConfigError(f"level must be 0-3, got {self.level}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        for key in ('cotd_age_min', 'jit_delay_min', 'span_min', 'probe_span_min'):
            if getattr(self, key) < 0:
                raise ConfigError(f"{key} must be >= 0, got {getattr(self, key)}")
        if self.run_spacing_min is not None and self.run_spacing_min < 0:
            raise ConfigError(f"run_spacing_min must be >= 0, got {self.run_spacing_min}")
        if self.probe_interval_min <= 0:
            raise ConfigError("probe_interval_min must be > 0")
        lo, hi = self.jit_delay_range
        if not 0 <= lo <= hi:
            raise ConfigError(f"jit_delay_range must satisfy 0 <= low <= high, got {lo},{hi}")
        for key in ('readout_mean', 'gate_1q_mean', 'gate_2q_mean', 'gate_err_1q_prior'):
            if not 0 < getattr(self, key) < 0.5:
                raise ConfigError(f"{key} must lie in (0, 0.5), got {getattr(self, key)}")
        if self.read_asymmetry <= 0:
            raise ConfigError("read_asymmetry must be > 0")
        if self.drift_reversion_rate <= 0:
            raise ConfigError("drift_reversion_rate must be > 0")
        if self.drift_volatility < 0 or self.drift_spread < 0:
            raise ConfigError("drift_volatility and drift_spread must be >= 0")
        if not 0 <= self.drift_bad_fraction <= 1:
            raise ConfigError("drift_bad_fraction must lie in [0, 1]")
        lengths = self.rb_lengths
        if len(lengths) < 3 or any(m < 1 for m in lengths) or list(lengths) != sorted(set(lengths)):
            raise ConfigError(f"rb_lengths must be >= 3 strictly increasing positive integers, got {lengths}")

    @property
    def spacing_min(self):
        if self.run_spacing_min is not None:
            return self.run_spacing_min
        return self.span_min / self.runs

    def drift_params(self, seed=None):
        from execution.device_model import DriftParams
        return DriftParams(
            readout_mean=self.readout_mean,
            read_asymmetry=self.read_asymmetry,
            gate_1q_mean=self.gate_1q_mean,
            gate_2q_mean=self.gate_2q_mean,
            reversion_rate=self.drift_reversion_rate,
            volatility=self.drift_volatility,
            spread=self.drift_spread,
            persistent_bad_fraction=self.drift_bad_fraction,
            seed=self.seed if seed is None else seed,
        )

    def to_dict(self):
        return asdict(self)

    def with_overrides(self, **overrides):
        return replace(self, **overrides)


# Mode presets, applied before explicit keys.
MODE_DEFAULTS = {
    'fairshare': {'cotd_age_min': 600.0},
    'dedicated': {'cotd_age_min': 600.0, 'jit_delay_min': 10.0},
    'burst': {'runs': 4, 'run_spacing_min': 15.0, 'jit_delay_min': 5.0, 'cotd_policy': 'daily'},
    'custom': {},
}

_FIELD_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}


def _coerce(key, raw):
    kind = _FIELD_TYPES[key]
    text = str(raw).strip()
    try:
        if key == 'rb_lengths':
            return tuple(int(v) for v in text.split(',') if v.strip())
        if key == 'jit_delay_range':
            lo, hi = (float(v) for v in text.split(','))
            return (lo, hi)
        if key == 'run_spacing_min':
            return None if text.lower() in ('', 'none', 'auto') else float(text)
        if kind is bool:
            if text.lower() not in ('true', 'false', '1', '0', 'yes', 'no'):
                raise ValueError(text)
            return text.lower() in ('true', '1', 'yes')
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"bad value for '{key}': '{raw}'")


def config_from_mapping(values, seed=None):
    """Build a ScenarioConfig from raw key/value pairs (case-insensitive keys)."""
    raw = {}
    for key, value in values.items():
        k = key.strip().lower()
        if k not in _FIELD_TYPES:
            raise ConfigError(f"unknown configuration key '{key}'")
        if value is None:
            raise ConfigError(f"configuration key '{key}' has no value")
        raw[k] = value
    mode = str(raw.get('mode', ScenarioConfig.mode)).strip()
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {', '.join(MODES)}, got '{mode}'")

    merged = dict(MODE_DEFAULTS[mode])
    merged.update({k: _coerce(k, v) for k, v in raw.items()})
    if seed is not None:
        merged['seed'] = int(seed)
    return ScenarioConfig(**merged)


def load_scenario(path=None, seed=None):
    """Load a scenario file; `seed` (from --seed) overrides the file's seed."""
    if path is None:
        return config_from_mapping({}, seed=seed)
    path = Path(path)
    if not path.exists():
        candidate = SCENARIO_DIR / path.name
        if not candidate.exists():
            raise ConfigError(f"scenario file not found: {path}")
        path = candidate
    return config_from_mapping(dotenv_values(path), seed=seed)
