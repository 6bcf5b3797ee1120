"""
Run orchestration: configuration loading, artifact output and dispatch to
the per-app report builders.

Artifacts are a pure function of the validated configuration; only the
manifest carries wall-clock information.
"""

import csv
import io
import json
import logging
import platform
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import django
import numpy as np
import scipy
from django.conf import settings
from marshmallow import ValidationError

import PyDIFS
from affine.maps import AffineMap, from_fixed_point
from grid.lattice import GridSpace
from PyDIFS.conf import difs_setting
from PyDIFS.exceptions import ArtifactReadError, ArtifactWriteError, ConfigValidationError
from render.rasters import write_raster
from runs.schemas import RunConfigSchema, flatten_errors

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.txt'


@dataclass
class RunConfig:
    """A validated run configuration with its numeric parts built."""
    command: str
    seed: int
    threads: Optional[int]
    out: Path
    grid: Optional[GridSpace]
    maps: List[AffineMap]
    probabilities: Optional[List[float]]
    probability_type: str
    table_file: Optional[str]
    options: Dict[str, Any]
    echo: Dict[str, Any] = field(repr=False)

    @property
    def n_jobs(self) -> Optional[int]:
        if self.threads is not None:
            return self.threads
        return difs_setting('DEFAULT_THREADS')


def apply_override(data: dict, dotted: str, value):
    """Set data['a']['b'] = value for dotted = 'a.b', creating blocks on the way."""
    *parents, leaf = dotted.split('.')
    node = data
    for key in parents:
        child = node.get(key)
        if not isinstance(child, dict):
            child = {}
            node[key] = child
        node = child
    node[leaf] = value


def read_config_file(path) -> dict:
    try:
        with open(path, 'r', encoding='utf-8') as stream:
            data = json.load(stream)
    except OSError as exc:
        raise ArtifactReadError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigValidationError(
            f"config {path} is not valid JSON", field_errors={'<root>': [str(exc)]}
        ) from exc
    if not isinstance(data, dict):
        raise ConfigValidationError("config must be a JSON object", field_errors={'<root>': ["not an object"]})
    return data


def build_maps(entries: Sequence[dict]) -> List[AffineMap]:
    maps = []
    for entry in entries:
        if entry.get('fixed_point') is not None:
            maps.append(from_fixed_point(entry['matrix'], entry['fixed_point']))
        else:
            maps.append(AffineMap(entry['matrix'], entry['translation']))
    return maps


def parse_config(
    path: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
    command: Optional[str] = None,
) -> RunConfig:
    """
    Load, override and validate a run configuration.

    overrides maps dotted keys ('render.steps', 'seed') to values; None
    values are ignored so unset command line flags leave the file alone.

    Raises:
        ConfigValidationError: schema violations, with dotted field paths
        ArtifactReadError: the config file cannot be read
    """
    data = read_config_file(path) if path else {}
    if command is not None:
        if data.get('command') not in (None, command):
            raise ConfigValidationError(
                f"config is for '{data['command']}', not '{command}'",
                field_errors={'command': [f"expected '{command}'"]},
            )
        data['command'] = command
    for dotted, value in (overrides or {}).items():
        if value is not None:
            apply_override(data, dotted, value)

    try:
        loaded = RunConfigSchema().load(data)
    except ValidationError as exc:
        field_errors = flatten_errors(exc.messages)
        raise ConfigValidationError(
            f"invalid run configuration ({', '.join(sorted(field_errors))})", field_errors=field_errors
        ) from exc

    grid = None
    if loaded.get('grid') is not None:
        grid = GridSpace(loaded['grid']['n'], loaded['grid']['delta'], loaded['grid']['norm'])
    probabilities = loaded['probabilities']
    values = probabilities.get('values') if probabilities['type'] == 'constant' else None
    out = Path(loaded['out']) if loaded.get('out') else Path(settings.DIFS_OUTPUT_ROOT) / loaded['command']
    cfg = RunConfig(
        command=loaded['command'],
        seed=loaded['seed'],
        threads=loaded.get('threads'),
        out=out,
        grid=grid,
        maps=build_maps(loaded['maps']),
        probabilities=list(values) if values is not None else None,
        probability_type=probabilities['type'],
        table_file=probabilities.get('file'),
        options=loaded[command_block(loaded['command'])],
        echo=loaded,
    )
    logger.debug(f"Parsed {cfg.command} config with {len(cfg.maps)} maps, seed {cfg.seed}")
    return cfg


def command_block(command: str) -> str:
    return command.split('-')[0]


class RunContext:
    """
    Output directory of one run. Every artifact goes through here so the
    manifest can list it.
    """

    def __init__(self, out: Path):
        self.out = Path(out)
        self.artifacts: List[str] = []
        self.summary: List[str] = []
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ArtifactWriteError(f"cannot create output directory {self.out}: {exc}") from exc

    def path(self, name: str) -> Path:
        return self.out / name

    def _record(self, name: str):
        if name not in self.artifacts:
            self.artifacts.append(name)

    def write_text(self, name: str, text: str):
        try:
            with open(self.path(name), 'w', encoding='utf-8', newline='\n') as stream:
                stream.write(text)
        except OSError as exc:
            raise ArtifactWriteError(f"cannot write {self.path(name)}: {exc}") from exc
        self._record(name)

    def write_csv(self, name: str, header: Sequence[str], rows: Sequence[Sequence[Any]]):
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(header)
        writer.writerows(rows)
        self.write_text(name, buffer.getvalue())

    def write_raster(self, name: str, raster: np.ndarray):
        write_raster(raster, self.path(name))
        self._record(name)

    def note(self, line: str):
        self.summary.append(line)


def versions() -> Dict[str, str]:
    return {
        'pydifs': PyDIFS.__version__,
        'python': platform.python_version(),
        'django': django.get_version(),
        'numpy': np.__version__,
        'scipy': scipy.__version__,
    }


def write_manifest(ctx: RunContext, cfg: RunConfig, started: datetime, elapsed: float):
    lines = [
        f"command: {cfg.command}",
        f"seed: {cfg.seed}",
        f"started: {started.isoformat()}",
        f"wall_time_seconds: {elapsed:.3f}",
    ]
    lines.extend(f"version {name}: {value}" for name, value in versions().items())
    lines.append('artifacts:')
    lines.extend(f"  {name}" for name in ctx.artifacts)
    lines.append('config:')
    lines.append(json.dumps(cfg.echo, sort_keys=True, indent=2))
    ctx.write_text(MANIFEST_NAME, '\n'.join(lines) + '\n')


def runner_for(command: str):
    from absorbing.reports import run_mas
    from difs.reports import run_analyze, run_orbit
    from render.reports import run_render
    from stats.reports import run_stats
    from verify.reports import run_verify

    return {
        'mas': run_mas,
        'stats': run_stats,
        'difs-analyze': run_analyze,
        'difs-run': run_orbit,
        'render': run_render,
        'verify': run_verify,
    }[command]


def execute(cfg: RunConfig) -> RunContext:
    """
    Run the configured command, writing its artifacts and the manifest
    into cfg.out. Domain errors propagate to the caller.
    """
    started = datetime.now(timezone.utc)
    clock = time.perf_counter()
    logger.info(f"Starting {cfg.command} run into {cfg.out} (seed {cfg.seed})")
    ctx = RunContext(cfg.out)
    runner_for(cfg.command)(cfg, ctx)
    elapsed = time.perf_counter() - clock
    write_manifest(ctx, cfg, started, elapsed)
    logger.info(f"Finished {cfg.command} run in {elapsed:.2f}s with {len(ctx.artifacts)} artifacts")
    return ctx
