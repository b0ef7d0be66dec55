import hashlib
import json
import logging
from dataclasses import dataclass, field

from errors import ParseError
from matrixkernel import MatrixKernelSpace
from sequences import SequenceFamily, SequencePair
from space import TridiagonalSpace

logger = logging.getLogger(__name__)

FAMILY_KEYS = {"coeff", "base", "power", "overrides"}
SCALAR_KEYS = {"a", "b", "options"}
MATRIX_KEYS = {"d", "Q", "channels", "A", "B", "options"}
OPTION_DEFAULTS = {
    "truncation": 256,
    "horizon": 64,
    "tolerance": 1e-10,
    "tail_safety_factor": 2.0,
}


@dataclass(frozen=True)
class SpaceOptions:
    truncation: int = 256
    horizon: int = 64
    tolerance: float = 1e-10
    tail_safety_factor: float = 2.0

    def to_dict(self):
        return {
            'truncation': self.truncation,
            'horizon': self.horizon,
            'tolerance': self.tolerance,
            'tail_safety_factor': self.tail_safety_factor,
        }


@dataclass(frozen=True, eq=False)
class SpaceConfig:
    kind: str  # scalar or matrix
    options: SpaceOptions
    sha256: str
    source: str
    pair: SequencePair | None = None
    matrix_space: MatrixKernelSpace | None = None
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def is_matrix(self):
        return self.kind == "matrix"

    def space(self):
        if self.pair is None:
            raise ParseError(f"{self.source}: a scalar space file is required for this command")
        return TridiagonalSpace(self.pair, truncation=self.options.truncation,
                                tail_safety_factor=self.options.tail_safety_factor)


def _complex(value, path):
    if isinstance(value, bool):
        raise ParseError(f"{path}: expected a number or [re, im], got {value!r}")
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, list) and len(value) == 2 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        return complex(value[0], value[1])
    raise ParseError(f"{path}: expected a number or [re, im], got {value!r}")


def _reject_unknown(data, allowed, path):
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ParseError(f"{path}: unknown key(s) {unknown}")


def parse_family(data, path):
    if not isinstance(data, dict):
        raise ParseError(f"{path}: expected an object, got {type(data).__name__}")
    _reject_unknown(data, FAMILY_KEYS, path)
    power = data.get("power", 0.0)
    if isinstance(power, bool) or not isinstance(power, (int, float)):
        raise ParseError(f"{path}.power: expected a real number, got {power!r}")
    overrides = data.get("overrides", {})
    if not isinstance(overrides, dict):
        raise ParseError(f"{path}.overrides: expected an object")

    parsed = {}
    for key, value in overrides.items():
        try:
            index = int(key)
        except ValueError:
            raise ParseError(f"{path}.overrides.{key}: index is not an integer")
        number = _complex(value, f"{path}.overrides.{key}")
        if number == 0:
            raise ParseError(f"{path}.overrides.{key}: override at index {index} is zero")
        parsed[index] = number

    coefficient = _complex(data.get("coeff", 1.0), f"{path}.coeff")
    base = _complex(data.get("base", 1.0), f"{path}.base")
    try:
        return SequenceFamily(
            coefficient=coefficient,
            base=base,
            power=float(power),
            overrides=parsed,
        )
    except ParseError as e:
        raise ParseError(f"{path}: {str(e)}")


def parse_pair(data, path):
    if not isinstance(data, dict):
        raise ParseError(f"{path}: expected an object with keys a and b")
    for key in ("a", "b"):
        if key not in data:
            raise ParseError(f"{path}: missing key '{key}'")
    return SequencePair(parse_family(data["a"], f"{path}.a"), parse_family(data["b"], f"{path}.b"))


def parse_options(data, path="$.options"):
    if not isinstance(data, dict):
        raise ParseError(f"{path}: expected an object")
    _reject_unknown(data, set(OPTION_DEFAULTS), path)
    merged = {**OPTION_DEFAULTS, **data}
    for key in ("truncation", "horizon"):
        if isinstance(merged[key], bool) or not isinstance(merged[key], int) or merged[key] < 1:
            raise ParseError(f"{path}.{key}: expected a positive integer, got {merged[key]!r}")
    for key in ("tolerance", "tail_safety_factor"):
        if isinstance(merged[key], bool) or not isinstance(merged[key], (int, float)) or merged[key] <= 0:
            raise ParseError(f"{path}.{key}: expected a positive number, got {merged[key]!r}")
    if merged["tail_safety_factor"] < 1:
        raise ParseError(f"{path}.tail_safety_factor: must be at least 1")
    return SpaceOptions(
        truncation=merged["truncation"],
        horizon=merged["horizon"],
        tolerance=float(merged["tolerance"]),
        tail_safety_factor=float(merged["tail_safety_factor"]),
    )


def _parse_matrix(value, d, path):
    if not isinstance(value, list) or len(value) != d:
        raise ParseError(f"{path}: expected {d} rows")
    rows = []
    for i, row in enumerate(value):
        if not isinstance(row, list) or len(row) != d:
            raise ParseError(f"{path}[{i}]: expected {d} entries")
        rows.append([_complex(cell, f"{path}[{i}][{j}]") for j, cell in enumerate(row)])
    return rows


def _parse_tables(value, d, path):
    if not isinstance(value, dict):
        raise ParseError(f"{path}: expected an object keyed by index")
    try:
        tables = {int(key): table for key, table in value.items()}
    except ValueError:
        raise ParseError(f"{path}: table keys must be integers")
    indices = sorted(tables)
    if indices != list(range(len(indices))):
        raise ParseError(f"{path}: table indices must be 0..{len(indices) - 1} without gaps")
    return tuple(_parse_matrix(tables[n], d, f"{path}.{n}") for n in indices)


def parse_space_config(data, sha256="", source="<memory>"):
    """Build a SpaceConfig from decoded JSON; errors name the offending position."""
    if not isinstance(data, dict):
        raise ParseError(f"{source}: top level must be an object")
    options = parse_options(data.get("options", {}))

    if "channels" in data or "d" in data:
        _reject_unknown(data, MATRIX_KEYS, "$")
        d = data.get("d")
        if isinstance(d, bool) or not isinstance(d, int) or d < 1:
            raise ParseError(f"$.d: expected a positive integer, got {d!r}")
        channels = data.get("channels")
        if not isinstance(channels, list) or len(channels) != d:
            raise ParseError(f"$.channels: expected {d} channel objects")
        pairs = tuple(parse_pair(channel, f"$.channels[{q}]") for q, channel in enumerate(channels))
        if "Q" not in data:
            raise ParseError("$: missing key 'Q'")
        q_matrix = _parse_matrix(data["Q"], d, "$.Q")
        raw_a = _parse_tables(data["A"], d, "$.A") if "A" in data else None
        raw_b = _parse_tables(data["B"], d, "$.B") if "B" in data else None
        if (raw_a is None) != (raw_b is None):
            raise ParseError("$: raw tables A and B must be given together")
        try:
            mspace = MatrixKernelSpace(d=d, Q=q_matrix, channels=pairs, raw_a=raw_a, raw_b=raw_b,
                                       truncation=options.truncation)
        except ParseError as e:
            where = "$.Q" if "unitary" in str(e) else "$"
            raise ParseError(f"{where}: {str(e)}")
        return SpaceConfig(kind="matrix", options=options, sha256=sha256, source=source,
                           matrix_space=mspace, raw=data)

    _reject_unknown(data, SCALAR_KEYS, "$")
    pair = parse_pair(data, "$")
    return SpaceConfig(kind="scalar", options=options, sha256=sha256, source=source, pair=pair, raw=data)


def load_space_config(path):
    """Read, hash and parse a JSON space file."""
    try:
        with open(path, "rb") as handle:
            content = handle.read()
    except OSError as e:
        raise ParseError(f"{path}: cannot read space file: {str(e)}")
    digest = hashlib.sha256(content).hexdigest()
    try:
        data = json.loads(content.decode("utf-8"))
    except UnicodeDecodeError as e:
        raise ParseError(f"{path}: not UTF-8: {str(e)}")
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}:{e.lineno}:{e.colno}: {e.msg}")
    config = parse_space_config(data, sha256=digest, source=str(path))
    logger.debug(f'Loaded {config.kind} space from {path} (sha256 {digest[:12]})')
    return config
