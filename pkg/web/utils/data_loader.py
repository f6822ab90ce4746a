"""
Data discovery for the web app: device presets, scenario files and reports.

Files are resolved under the project's data directory (JITQ_DATA_DIR).
"""

import sys
from pathlib import Path

# Get the project root directory (parent of web/)
PROJECT_ROOT = Path(__file__).parent.parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from execution import settings  # noqa: E402
from execution.errors import ValidationError  # noqa: E402

REPORT_SUFFIXES = ('.csv', '.json', '.txt', '.dot')
PARAMETRIC_PRESETS = ['line(n)', 'ring(n)', 'tree(n)', 'grid(r,c)']


def list_presets():
    """
    Device presets available to the app.

    Returns:
        list: preset names with an edge-list file, followed by the parametric forms
    """
    files = sorted(p.stem for p in settings.TOPOLOGY_DIR.glob('*.txt')) if settings.TOPOLOGY_DIR.exists() else []
    for name in ('almaden20', 'paris27'):
        if name not in files:
            files.append(name)
    return files + PARAMETRIC_PRESETS


def list_scenarios():
    if not settings.SCENARIO_DIR.exists():
        return []
    return sorted(p.name for p in settings.SCENARIO_DIR.glob('*.cfg'))


def list_reports(report_dir=None):
    """Report files (newest first) in the report directory."""
    report_dir = Path(report_dir or settings.REPORT_DIR)
    if not report_dir.exists():
        return []
    files = [p for p in report_dir.iterdir() if p.is_file() and p.suffix in REPORT_SUFFIXES]
    files.sort(key=lambda p: (-p.stat().st_mtime, p.name))
    return [{'name': p.name, 'bytes': p.stat().st_size} for p in files]


def report_path(name, report_dir=None):
    """Resolve a report name, refusing anything outside the report directory."""
    report_dir = Path(report_dir or settings.REPORT_DIR).resolve()
    path = (report_dir / name).resolve()
    if path.parent != report_dir or path.suffix not in REPORT_SUFFIXES:
        raise ValidationError(f"invalid report name '{name}'")
    if not path.exists():
        raise FileNotFoundError(name)
    return path
