"""
backend.py - Config files, grid dumps, and sweep output files
backend.py - 配置文件、网格转储与扫描输出文件

Grid dump = <stem>.hdr (text, one `key = value` per line) + <stem>.bin
(raw little-endian float64, row-major in the header's axis order).
"""

import csv
import json
import logging
import math
import os
from dataclasses import dataclass, field, fields
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from config import VERSION, CSV_COLUMNS, RunConfig
from errors import ConfigError, DumpFormatError, DumpLengthError, DumpDtypeError
from geometry import Grid2D, OvalShape
from helmholtz import EigenMode
from wigner import MomentumGrid, WignerField, WignerSlice

logger = logging.getLogger(__name__)

DUMP_FORMAT = "griddump-1"
DUMP_DTYPE = "<f8"


# =============================================================================
# Grid dumps
# =============================================================================
@dataclass
class GridDump:
    kind: str                                   # mode | wigner | slice
    values: np.ndarray
    axes: List[str]
    origins: List[float]                        # first node on each axis
    steps: List[float]                          # spacing on each axis
    meta: Dict[str, str] = field(default_factory=dict)
    version: str = VERSION

    def __post_init__(self):
        n = self.values.ndim
        if not (len(self.axes) == len(self.origins) == len(self.steps) == n):
            raise DumpFormatError(f"dump has {n} dimensions but {len(self.axes)} axes")

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.values.shape)

    def axis_range(self, i: int) -> Tuple[float, float]:
        return self.origins[i], self.origins[i] + self.steps[i] * (self.values.shape[i] - 1)


def _stem(path: str) -> str:
    for ext in ('.hdr', '.bin'):
        if path.endswith(ext):
            return path[:-len(ext)]
    return path


def write_dump(path: str, dump: GridDump) -> str:
    """Write <stem>.hdr and <stem>.bin; returns the header path."""
    stem = _stem(path)
    os.makedirs(os.path.dirname(stem) or '.', exist_ok=True)
    lines = [
        f"format = {DUMP_FORMAT}",
        f"kind = {dump.kind}",
        f"dtype = {DUMP_DTYPE}",
        f"order = C",
        f"shape = {' '.join(str(n) for n in dump.shape)}",
        f"axes = {' '.join(dump.axes)}",
    ]
    for i, name in enumerate(dump.axes):
        lo, hi = dump.axis_range(i)
        lines.append(f"origin.{name} = {float(dump.origins[i])!r}")
        lines.append(f"step.{name} = {float(dump.steps[i])!r}")
        lines.append(f"range.{name} = {lo!r} {hi!r}")
    lines.append(f"version = {dump.version}")
    for key, val in dump.meta.items():
        lines.append(f"meta.{key} = {val}")

    with open(stem + '.hdr', 'w', encoding='utf-8') as f:
        f.write("\n".join(lines) + "\n")
    with open(stem + '.bin', 'wb') as f:
        f.write(np.ascontiguousarray(dump.values, dtype=DUMP_DTYPE).tobytes(order='C'))
    logger.debug(f"wrote {dump.kind} dump {stem} {dump.shape}")
    return stem + '.hdr'


def _parse_header(path: str) -> Dict[str, str]:
    header = {}
    with open(path, 'r', encoding='utf-8') as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith('#'):
                continue
            if '=' not in line:
                raise DumpFormatError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (s.strip() for s in line.split('=', 1))
            header[key] = val
    return header


def read_dump(path: str) -> GridDump:
    stem = _stem(path)
    if not os.path.exists(stem + '.hdr'):
        raise DumpFormatError(f"missing dump header {stem}.hdr")
    h = _parse_header(stem + '.hdr')
    try:
        if h.get('format') != DUMP_FORMAT:
            raise DumpFormatError(f"{stem}.hdr: unknown format {h.get('format')!r}")
        if h.get('dtype') != DUMP_DTYPE:
            raise DumpDtypeError(f"{stem}.hdr: dtype {h.get('dtype')!r}, expected {DUMP_DTYPE}")
        shape = tuple(int(s) for s in h['shape'].split())
        axes = h['axes'].split()
        origins = [float(h[f'origin.{a}']) for a in axes]
        steps = [float(h[f'step.{a}']) for a in axes]
    except KeyError as exc:
        raise DumpFormatError(f"{stem}.hdr: missing key {exc}") from exc
    except ValueError as exc:
        raise DumpFormatError(f"{stem}.hdr: {exc}") from exc

    with open(stem + '.bin', 'rb') as f:
        payload = f.read()
    expected = 8 * int(np.prod(shape))
    if len(payload) != expected:
        raise DumpLengthError(f"{stem}.bin holds {len(payload)} bytes, header implies {expected}")
    values = np.frombuffer(payload, dtype=DUMP_DTYPE).reshape(shape).astype(np.float64)
    meta = {k[5:]: v for k, v in h.items() if k.startswith('meta.')}
    return GridDump(kind=h.get('kind', ''), values=values, axes=axes, origins=origins,
                    steps=steps, meta=meta, version=h.get('version', ''))


# --- conversions ------------------------------------------------------------
def mode_to_dump(mode: EigenMode) -> GridDump:
    g = mode.grid
    meta = {'k': repr(mode.k), 'residual': repr(mode.residual)}
    if mode.shape is not None:
        meta.update(a=repr(mode.shape.a), b=repr(mode.shape.b), theta=repr(mode.shape.theta))
    return GridDump('mode', mode.psi, ['x', 'y'], [g.x_min, g.y_min], [g.dx, g.dy], meta)


def dump_to_mode(dump: GridDump) -> EigenMode:
    if dump.kind != 'mode' or dump.values.ndim != 2:
        raise DumpFormatError(f"expected a 2D mode dump, got kind={dump.kind!r} {dump.shape}")
    nx, ny = dump.shape
    grid = Grid2D(dump.origins[0], dump.origins[1], dump.steps[0], dump.steps[1], nx, ny)
    shape = None
    if all(key in dump.meta for key in ('a', 'b', 'theta')):
        shape = OvalShape(float(dump.meta['a']), float(dump.meta['b']), float(dump.meta['theta']))
    return EigenMode(k=float(dump.meta.get('k', 'nan')), psi=dump.values, grid=grid, shape=shape,
                     residual=float(dump.meta.get('residual', '0')))


def wigner_to_dump(W: WignerField, meta: Dict[str, str] = None) -> GridDump:
    p, m = W.positions, W.momentum
    info = {'raw_norm': repr(W.raw_norm), 'quadrature': repr(W.quadrature)}
    info.update(meta or {})
    return GridDump('wigner', W.values, ['x', 'y', 'px', 'py'],
                    [p.x_min, p.y_min, float(m.px[0]), float(m.py[0])],
                    [p.dx, p.dy, m.dp_x, m.dp_y], info)


def dump_to_wigner(dump: GridDump) -> WignerField:
    if dump.kind != 'wigner' or dump.values.ndim != 4:
        raise DumpFormatError(f"expected a 4D Wigner dump, got kind={dump.kind!r} {dump.shape}")
    nx, ny, npx, npy = dump.shape
    positions = Grid2D(dump.origins[0], dump.origins[1], dump.steps[0], dump.steps[1], nx, ny)
    momentum = MomentumGrid(npx, npy, dump.steps[2], dump.steps[3])
    return WignerField(values=dump.values, positions=positions, momentum=momentum,
                       raw_norm=float(dump.meta.get('raw_norm', '1.0')),
                       quadrature=float(dump.meta.get('quadrature', '1.0')))


def slice_to_dump(s: WignerSlice, meta: Dict[str, str] = None) -> GridDump:
    names = ['x', 'px'] if s.axis == 'X' else ['y', 'py']
    info = {'axis': s.axis}
    info.update(meta or {})
    return GridDump('slice', s.values, names, [float(s.coords[0]), float(s.momenta[0])],
                    [float(s.coords[1] - s.coords[0]), float(s.momenta[1] - s.momenta[0])], info)


# =============================================================================
# Config files
# =============================================================================
_TRUE = {'true', 'yes', 'on', '1'}
_FALSE = {'false', 'no', 'off', '0'}


def _coerce(name: str, kind: Any, text: str) -> Any:
    try:
        if kind in (bool, 'bool'):
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if kind in (int, 'int'):
            return int(text)
        if kind in (float, 'float'):
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {exc}") from exc


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    """`key = value` lines, `#` comments; keys are RunConfig fields."""
    types = {f.name: f.type for f in fields(RunConfig)}
    values: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split('=', 1))
        if key not in types:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = _coerce(key, types[key], val)
    config = RunConfig(**values)
    config.validate()
    return config


def load_config(path: str) -> RunConfig:
    with open(path, 'r', encoding='utf-8') as f:
        return parse_config_text(f.read(), source=path)


# =============================================================================
# Sweep outputs
# =============================================================================
def format_number(value: Any) -> str:
    """17 significant digits, '.' decimal point, no locale."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), '.17g')
    return str(value)


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


class ResultExporter:
    """Writes the files of one run. (写出一次运行的结果文件)"""

    @staticmethod
    def save_csv(rows: Sequence[Sequence[Any]], path: str) -> str:
        os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(CSV_COLUMNS)
            for row in rows:
                writer.writerow([format_number(v) for v in row])
        return path

    @staticmethod
    def load_csv(path: str) -> List[Dict[str, str]]:
        with open(path, 'r', encoding='utf-8', newline='') as f:
            return list(csv.DictReader(f))

    @staticmethod
    def save_json(data: dict, path: str) -> str:
        os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(_jsonable(data), f, indent=2, sort_keys=True)
            f.write("\n")
        return path

    @staticmethod
    def save_manifest(config: RunConfig, path: str, resolution: Dict[str, Any] = None) -> str:
        data = {'version': VERSION, 'config': config.to_dict()}
        if resolution:
            data['resolution'] = resolution
        return ResultExporter.save_json(data, path)

    @staticmethod
    def load_manifest(path: str) -> RunConfig:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
        if 'config' not in data:
            raise ConfigError(f"{path}: manifest has no 'config' section")
        config = RunConfig.from_dict(data['config'])
        config.validate()
        return config
