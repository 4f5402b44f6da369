"""Measurement tables of configurations per environment, plus manifest I/O.

A *manifest* is a YAML file naming the system, the objective direction, the
option schema and one CSV file per environment::

    system: sqlite
    objective: minimize
    units: us
    options:
      - {name: cache, kind: categorical, levels: ["off", "on"]}
      - {name: page_size, kind: numeric, min: 512, max: 8192}
    environments:
      - {name: nuc_seq, csv: nuc_seq.csv, hardware: nuc, workload: seq, version: "3.7", role: source}

Each CSV has one column per option (categorical values as labels) and a final
``perf`` column.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
import yaml

from ._seeding import derive_rng

MINIMIZE = "minimize"
MAXIMIZE = "maximize"
PERF_COLUMN = "perf"

Configuration = tuple  # one float per option; categorical options hold level indices


class DatasetError(ValueError):
    """Raised when a manifest or measurement table fails validation."""

    def __init__(self, message, env=None, row=None):
        where = []
        if env is not None:
            where.append(f"environment {env!r}")
        if row is not None:
            where.append(f"row {row}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.env = env
        self.row = row


@dataclass(frozen=True)
class Option:
    name: str
    kind: str
    levels: tuple = ()
    low: float | None = None
    high: float | None = None

    @property
    def is_categorical(self) -> bool:
        return self.kind == "categorical"

    @property
    def constant(self) -> bool:
        return not self.is_categorical and self.low == self.high

    def encode(self, raw: str) -> float:
        if self.is_categorical:
            try:
                return float(self.levels.index(raw))
            except ValueError:
                raise ValueError(f"{raw!r} is not a level of option {self.name!r}") from None
        value = float(raw)
        if not math.isfinite(value):
            raise ValueError(f"non-finite value for option {self.name!r}")
        return value

    def decode(self, value: float) -> str:
        if self.is_categorical:
            return self.levels[int(value)]
        return repr(float(value))

    def contains(self, value: float) -> bool:
        if self.is_categorical:
            return float(value).is_integer() and 0 <= value < len(self.levels)
        return self.low <= value <= self.high


class OptionSchema:
    """Ordered, named configuration options with their domains."""

    def __init__(self, options: Sequence[Option]):
        options = tuple(options)
        if not options:
            raise DatasetError("schema must declare at least one option")
        names = [o.name for o in options]
        if len(set(names)) != len(names):
            raise DatasetError("option names must be unique")
        if PERF_COLUMN in names:
            raise DatasetError(f"{PERF_COLUMN!r} is reserved for the performance column")
        for o in options:
            if o.kind not in ("numeric", "categorical"):
                raise DatasetError(f"option {o.name!r}: unknown kind {o.kind!r}")
            if o.is_categorical and len(o.levels) < 2:
                raise DatasetError(f"option {o.name!r}: categorical options need >= 2 levels")
            if not o.is_categorical:
                if o.low is None or o.high is None or o.low > o.high:
                    raise DatasetError(f"option {o.name!r}: numeric range needs min <= max")
        self.options = options

    @classmethod
    def binary(cls, n: int, prefix: str = "o") -> "OptionSchema":
        width = len(str(n - 1))
        return cls([Option(f"{prefix}{i:0{width}d}", "categorical", ("0", "1")) for i in range(n)])

    @property
    def names(self) -> list[str]:
        return [o.name for o in self.options]

    def __len__(self) -> int:
        return len(self.options)

    def __eq__(self, other) -> bool:
        return isinstance(other, OptionSchema) and self.options == other.options

    def __hash__(self) -> int:
        return hash(self.options)

    def __repr__(self) -> str:
        return f"OptionSchema({self.names})"

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Lower/upper value of each option in encoded units."""
        lo = np.array([0.0 if o.is_categorical else o.low for o in self.options])
        hi = np.array([len(o.levels) - 1.0 if o.is_categorical else o.high for o in self.options])
        return lo, hi

    def normalize(self, X: np.ndarray) -> np.ndarray:
        """Min-max scale encoded configurations to [0, 1] per option."""
        lo, hi = self.bounds()
        span = np.where(hi > lo, hi - lo, 1.0)
        return (np.asarray(X, dtype=float) - lo) / span

    def validate_row(self, values) -> None:
        if len(values) != len(self.options):
            raise ValueError(f"expected {len(self.options)} option values, got {len(values)}")
        for o, v in zip(self.options, values):
            if not o.contains(v):
                raise ValueError(f"value {v!r} outside the domain of option {o.name!r}")

    def to_dict(self) -> list[dict]:
        out = []
        for o in self.options:
            if o.is_categorical:
                out.append({"name": o.name, "kind": o.kind, "levels": list(o.levels)})
            else:
                out.append({"name": o.name, "kind": o.kind, "min": o.low, "max": o.high})
        return out

    @classmethod
    def from_dict(cls, entries) -> "OptionSchema":
        options = []
        for e in entries or []:
            try:
                kind = e["kind"]
                if kind == "categorical":
                    options.append(Option(str(e["name"]), kind, tuple(str(v) for v in e["levels"])))
                else:
                    options.append(Option(str(e["name"]), kind, low=float(e["min"]), high=float(e["max"])))
            except (KeyError, TypeError) as exc:
                raise DatasetError(f"malformed option entry {e!r}") from exc
        return cls(options)


@dataclass(frozen=True)
class EnvironmentId:
    name: str
    hardware: str = ""
    workload: str = ""
    version: str = ""

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, eq=False)
class MeasurementTable:
    """Measured (configuration, performance) rows of one environment."""

    env: EnvironmentId
    schema: OptionSchema
    X: np.ndarray
    perf: np.ndarray
    objective: str = MINIMIZE
    units: str = ""
    _index: dict = field(default=None, init=False, repr=False)

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        perf = np.array(self.perf, dtype=float).ravel()
        name = self.env.name
        if self.objective not in (MINIMIZE, MAXIMIZE):
            raise DatasetError(f"unknown objective {self.objective!r}", env=name)
        if X.ndim != 2 or X.shape[1] != len(self.schema):
            raise DatasetError(f"expected {len(self.schema)} option columns", env=name)
        if X.shape[0] != perf.shape[0]:
            raise DatasetError("configuration and performance row counts differ", env=name)
        if X.shape[0] < 1:
            raise DatasetError("table has no rows", env=name)
        bad = np.flatnonzero(~np.isfinite(perf))
        if bad.size:
            raise DatasetError("non-finite performance value", env=name, row=int(bad[0]) + 1)
        index = {}
        for i, row in enumerate(map(tuple, X.tolist())):
            try:
                self.schema.validate_row(row)
            except ValueError as exc:
                raise DatasetError(str(exc), env=name, row=i + 1) from None
            if row in index:
                raise DatasetError(f"duplicate configuration (first seen at row {index[row] + 1})", env=name, row=i + 1)
            index[row] = i
        X.setflags(write=False)
        perf.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "perf", perf)
        object.__setattr__(self, "_index", index)

    @property
    def name(self) -> str:
        return self.env.name

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    def __len__(self) -> int:
        return self.n_rows

    @property
    def degenerate(self) -> bool:
        return bool(self.perf.max() == self.perf.min())

    def config(self, i: int) -> Configuration:
        return tuple(self.X[i].tolist())

    def configurations(self) -> list[Configuration]:
        return [tuple(r) for r in self.X.tolist()]

    def index_of(self, config) -> int:
        """Row index of ``config``; raises KeyError if it was never measured here."""
        key = tuple(float(v) for v in config)
        try:
            return self._index[key]
        except KeyError:
            raise KeyError(f"configuration {key} not measured in {self.name!r}") from None

    def has(self, config) -> bool:
        return tuple(float(v) for v in config) in self._index

    def perf_of(self, config) -> float:
        return float(self.perf[self.index_of(config)])

    def subset(self, indices) -> "MeasurementTable":
        idx = np.asarray(indices, dtype=int)
        return MeasurementTable(self.env, self.schema, self.X[idx], self.perf[idx], self.objective, self.units)

    def with_perf(self, perf) -> "MeasurementTable":
        return MeasurementTable(self.env, self.schema, self.X, perf, self.objective, self.units)

    def same_rows(self, other: "MeasurementTable") -> bool:
        return (
            self.env == other.env
            and self.schema == other.schema
            and self.objective == other.objective
            and self.units == other.units
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.perf, other.perf)
        )


@dataclass(frozen=True)
class EnvironmentCommunity:
    """Measured environments of one system, split into candidate sources and targets."""

    schema: OptionSchema
    sources: tuple
    targets: tuple = ()
    system: str = "system"

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "targets", tuple(self.targets))
        seen = set()
        for t in self.tables:
            if t.schema != self.schema:
                raise DatasetError("schema differs from the community schema", env=t.name)
            if t.name in seen:
                raise DatasetError("environment name is not unique", env=t.name)
            seen.add(t.name)

    @property
    def tables(self) -> tuple:
        return self.sources + self.targets

    def table(self, name: str) -> MeasurementTable:
        for t in self.tables:
            if t.name == name:
                return t
        raise KeyError(f"no environment named {name!r}")

    @property
    def source_names(self) -> list[str]:
        return [t.name for t in self.sources]


class Optimum(NamedTuple):
    config: Configuration
    perf: float
    index: int
    degenerate: bool


def true_optimum(table: MeasurementTable) -> Optimum:
    """Best measured row; ties go to the lowest row index."""
    if table.degenerate:
        return Optimum(table.config(0), float(table.perf[0]), 0, True)
    i = int(np.argmin(table.perf) if table.objective == MINIMIZE else np.argmax(table.perf))
    return Optimum(table.config(i), float(table.perf[i]), i, False)


def sample_size(n_rows: int, fraction: float) -> int:
    """Rows drawn for ``fraction`` of ``n_rows``: round half up, at least one."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    return min(n_rows, max(1, math.floor(fraction * n_rows + 0.5)))


def sample_indices(n_rows: int, fraction: float, rng_seed) -> np.ndarray:
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else derive_rng(rng_seed)
    return np.sort(rng.choice(n_rows, size=sample_size(n_rows, fraction), replace=False))


def sample_rows(table: MeasurementTable, fraction: float, rng_seed) -> MeasurementTable:
    """Uniform sample of rows without replacement, deterministic for a seed."""
    return table.subset(sample_indices(table.n_rows, fraction, rng_seed))


# --- CSV + manifest I/O -----------------------------------------------------


def _format_float(v: float) -> str:
    return repr(float(v))


def table_to_csv(table: MeasurementTable) -> str:
    """Canonical CSV: option columns sorted by name, then ``perf``; floats via repr."""
    schema = table.schema
    order = sorted(range(len(schema)), key=lambda j: schema.options[j].name)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([schema.options[j].name for j in order] + [PERF_COLUMN])
    for row, y in zip(table.X.tolist(), table.perf.tolist()):
        w.writerow([schema.options[j].decode(row[j]) for j in order] + [_format_float(y)])
    return buf.getvalue()


def read_table_csv(path, env: EnvironmentId, schema: OptionSchema, objective=MINIMIZE, units="") -> MeasurementTable:
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"measurement file not found: {path}", env=env.name)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError("empty CSV file", env=env.name) from None
        expected = set(schema.names) | {PERF_COLUMN}
        if len(header) != len(expected) or set(header) != expected:
            raise DatasetError(
                f"schema mismatch: header has {len(header)} columns {header}, "
                f"expected options {schema.names} plus {PERF_COLUMN!r}",
                env=env.name,
            )
        col = {name: header.index(name) for name in header}
        X, y = [], []
        for lineno, rec in enumerate(reader, start=1):
            if not rec:
                continue
            if len(rec) != len(header):
                raise DatasetError(f"expected {len(header)} fields, got {len(rec)}", env=env.name, row=lineno)
            try:
                X.append([o.encode(rec[col[o.name]]) for o in schema.options])
                y.append(float(rec[col[PERF_COLUMN]]))
            except ValueError as exc:
                raise DatasetError(str(exc), env=env.name, row=lineno) from None
    if len(y) < 2:
        raise DatasetError(f"need at least 2 measured rows, found {len(y)}", env=env.name)
    return MeasurementTable(env, schema, np.array(X, dtype=float).reshape(len(y), len(schema)), y, objective, units)


def _env_entry(table: MeasurementTable, role: str) -> dict:
    return {
        "name": table.env.name,
        "csv": f"{table.env.name}.csv",
        "hardware": table.env.hardware,
        "workload": table.env.workload,
        "version": table.env.version,
        "role": role,
    }


def save_community(community: EnvironmentCommunity, directory, manifest_name: str = "manifest.yaml") -> Path:
    """Write a manifest plus one canonical CSV per environment; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    first = community.tables[0]
    manifest = {
        "system": community.system,
        "objective": first.objective,
        "units": first.units,
        "options": community.schema.to_dict(),
        "environments": [_env_entry(t, "source") for t in community.sources]
        + [_env_entry(t, "target") for t in community.targets],
    }
    for t in community.tables:
        (directory / f"{t.env.name}.csv").write_text(table_to_csv(t), encoding="utf-8")
    path = directory / manifest_name
    path.write_text(yaml.safe_dump(manifest, sort_keys=False, allow_unicode=True), encoding="utf-8")
    return path


def load_community(manifest_path) -> EnvironmentCommunity:
    """Read and validate a manifest and every table it references."""
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise DatasetError(f"manifest not found: {manifest_path}")
    try:
        doc = yaml.safe_load(manifest_path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise DatasetError(f"cannot parse manifest {manifest_path}: {exc}") from None
    if not isinstance(doc, dict):
        raise DatasetError(f"manifest {manifest_path} is not a mapping")
    schema = OptionSchema.from_dict(doc.get("options"))
    objective = doc.get("objective", MINIMIZE)
    units = str(doc.get("units", "") or "")
    base = manifest_path.parent
    sources, targets = [], []
    for entry in doc.get("environments") or []:
        if "name" not in entry or "csv" not in entry:
            raise DatasetError(f"environment entry needs 'name' and 'csv': {entry!r}")
        env = EnvironmentId(
            str(entry["name"]),
            str(entry.get("hardware", "") or ""),
            str(entry.get("workload", "") or ""),
            str(entry.get("version", "") or ""),
        )
        table = read_table_csv(base / os.fspath(entry["csv"]), env, schema, objective, units)
        role = entry.get("role", "source")
        if role not in ("source", "target"):
            raise DatasetError(f"unknown role {role!r}", env=env.name)
        (sources if role == "source" else targets).append(table)
    return EnvironmentCommunity(schema, sources, targets, str(doc.get("system", "system")))
