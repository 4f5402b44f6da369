"""Synthetic environment communities with a planted bellwether.

Every environment measures the same configuration rows. Performance derives
from one base surface (a random shallow tree plus linear and pairwise terms,
square-root compressed) through a per-environment relation:

``affine``   a * base + b + noise
``warp``     monotone (square-root) reshaping of base + noise
``shuffled`` base values permuted across rows + noise
``noise``    i.i.d. values independent of base

Noise is Gaussian with standard deviation ``noise_sd * std(base)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._seeding import derive_rng
from .dataset import (
    MINIMIZE,
    EnvironmentCommunity,
    EnvironmentId,
    MeasurementTable,
    Option,
    OptionSchema,
)

MODES = ("affine", "warp", "shuffled", "noise")


@dataclass(frozen=True)
class EnvSpec:
    mode: str = "affine"
    a: float = 1.0
    b: float = 0.0
    noise_sd: float = 0.0
    role: str = "source"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown relatedness mode {self.mode!r}")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        if self.mode in ("affine", "warp") and self.a <= 0:
            raise ValueError("affine/warp scale must be positive")
        if self.role not in ("source", "target"):
            raise ValueError(f"unknown role {self.role!r}")


PLANTED = EnvSpec("affine", 1.0, 0.0, 0.0)


@dataclass(frozen=True)
class CommunitySpec:
    envs: tuple = field(default_factory=lambda: (PLANTED, EnvSpec("shuffled")))
    planted: int = 0
    n_binary: int = 10
    n_numeric: int = 0
    numeric_levels: int = 5
    rows_per_env: int = 500
    seed: int = 0
    tree_depth: int = 4
    n_interactions: int = 3
    system: str = "synthetic"

    def __post_init__(self):
        object.__setattr__(self, "envs", tuple(self.envs))
        if self.n_binary + self.n_numeric < 1:
            raise ValueError("need at least one option")
        if not 0 <= self.planted < len(self.envs):
            raise ValueError("planted index out of range")
        p = self.envs[self.planted]
        if (p.mode, p.a, p.b, p.noise_sd, p.role) != ("affine", 1.0, 0.0, 0.0, "source"):
            raise ValueError("the planted bellwether must be a noise-free affine(1, 0) source")
        if self.numeric_levels < 2:
            raise ValueError("numeric_levels must be >= 2")
        if self.rows_per_env < 2:
            raise ValueError("rows_per_env must be >= 2")
        if self.rows_per_env > self.space_size:
            raise ValueError(
                f"rows_per_env={self.rows_per_env} exceeds the configuration space ({self.space_size})"
            )

    @property
    def n_options(self) -> int:
        return self.n_binary + self.n_numeric

    @property
    def space_size(self) -> int:
        return 2**self.n_binary * self.numeric_levels**self.n_numeric

    @property
    def planted_name(self) -> str:
        return env_name(self.planted)


def env_name(i: int) -> str:
    return f"env_{i:02d}"


def planted_spec(seed: int = 0, n_sources: int = 8, n_targets: int = 4, rows: int = 500, n_options: int = 10) -> CommunitySpec:
    """The reference community: one planted bellwether among degraded decoys.

    Two decoys are near-copies (noise 0.1) and so are legitimate co-bellwethers;
    the rest carry heavy noise or no signal at all.
    Targets are mildly noisy affine/warped copies of the base surface. The
    planted environment's position among the sources depends on ``seed``.
    """
    decoys = [
        EnvSpec("affine", 1.2, 5.0, 0.1),
        EnvSpec("warp", 1.0, 0.0, 0.1),
        EnvSpec("affine", 0.8, -3.0, 1.5),
        EnvSpec("shuffled"),
        EnvSpec("warp", 0.5, 2.0, 2.0),
        EnvSpec("affine", 1.5, 0.0, 3.0),
        EnvSpec("noise"),
    ]
    target_specs = [
        EnvSpec("affine", 1.5, 3.0, 0.15, role="target"),
        EnvSpec("warp", 1.0, 0.0, 0.15, role="target"),
        EnvSpec("affine", 0.7, 2.0, 0.2, role="target"),
        EnvSpec("warp", 2.0, 1.0, 0.1, role="target"),
    ]
    sources = [decoys[i % len(decoys)] for i in range(n_sources - 1)]
    pos = int(derive_rng(seed, 99).integers(0, n_sources))
    sources.insert(pos, PLANTED)
    targets = [target_specs[i % len(target_specs)] for i in range(n_targets)]
    return CommunitySpec(
        envs=tuple(sources + targets),
        planted=pos,
        n_binary=n_options,
        rows_per_env=rows,
        seed=seed,
        system="planted",
    )


def _schema(spec: CommunitySpec) -> OptionSchema:
    width = len(str(spec.n_options - 1))
    opts = []
    for j in range(spec.n_options):
        name = f"o{j:0{width}d}"
        if j < spec.n_binary:
            opts.append(Option(name, "categorical", ("off", "on")))
        else:
            opts.append(Option(name, "numeric", low=0.0, high=float(spec.numeric_levels - 1)))
    return OptionSchema(opts)


def _sample_configs(spec: CommunitySpec, rng: np.random.Generator) -> np.ndarray:
    radices = [2] * spec.n_binary + [spec.numeric_levels] * spec.n_numeric
    size = spec.space_size
    if size <= 2**62:
        codes = [int(c) for c in rng.choice(size, size=spec.rows_per_env, replace=False)]
    else:
        seen, codes = set(), []
        while len(codes) < spec.rows_per_env:
            c = tuple(int(rng.integers(0, r)) for r in radices)
            if c not in seen:
                seen.add(c)
                codes.append(c)
        return np.array(codes, dtype=float)
    X = np.empty((len(codes), len(radices)), dtype=float)
    for i, code in enumerate(codes):
        for j in range(len(radices) - 1, -1, -1):
            code, X[i, j] = divmod(code, radices[j])
    return X


def _random_tree(Z: np.ndarray, depth: int, rng: np.random.Generator) -> np.ndarray:
    """Evaluate a random axis-aligned tree on normalized configurations ``Z``."""
    out = np.empty(Z.shape[0])

    def grow(rows: np.ndarray, level: int):
        if level == depth or rows.size == 0 or (level > 1 and rng.random() < 0.2):
            out[rows] = rng.uniform(0.0, 100.0)
            return
        j = int(rng.integers(0, Z.shape[1]))
        cut = rng.uniform(0.2, 0.8)
        left = Z[rows, j] <= cut
        grow(rows[left], level + 1)
        grow(rows[~left], level + 1)

    grow(np.arange(Z.shape[0]), 0)
    return out


def base_surface(spec: CommunitySpec, X: np.ndarray, schema: OptionSchema) -> np.ndarray:
    rng = derive_rng(spec.seed, 0)
    Z = schema.normalize(X)
    d = Z.shape[1]
    y = _random_tree(Z, spec.tree_depth, rng)
    y += Z @ rng.uniform(-15.0, 15.0, size=d)
    for _ in range(spec.n_interactions if d > 1 else 0):
        i, j = rng.choice(d, size=2, replace=False)
        y += rng.uniform(-20.0, 20.0) * Z[:, i] * Z[:, j]
    # square root spreads out the low tail so the optimum stands apart
    return 10.0 * np.sqrt(y - y.min()) + 10.0


def derive_perf(env: EnvSpec, base: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    sd = float(base.std()) or 1.0
    if env.mode == "affine":
        y = env.a * base + env.b
    elif env.mode == "warp":
        lo, span = base.min(), float(np.ptp(base)) or 1.0
        y = env.b + lo + env.a * span * np.sqrt((base - lo) / span)
    elif env.mode == "shuffled":
        y = rng.permutation(base)
    else:
        y = rng.normal(base.mean(), sd, size=base.size)
    if env.noise_sd > 0:
        y = y + rng.normal(0.0, env.noise_sd * sd, size=base.size)
    return y


def generate(spec: CommunitySpec) -> EnvironmentCommunity:
    """Materialize ``spec`` as a community; deterministic per ``spec.seed``."""
    schema = _schema(spec)
    X = _sample_configs(spec, derive_rng(spec.seed, 1))
    base = base_surface(spec, X, schema)
    sources, targets = [], []
    for i, env in enumerate(spec.envs):
        perf = derive_perf(env, base, derive_rng(spec.seed, 2, i))
        eid = EnvironmentId(env_name(i), hardware=f"h{i}", workload=env.mode, version="1")
        table = MeasurementTable(eid, schema, X, perf, MINIMIZE, "ms")
        (sources if env.role == "source" else targets).append(table)
    return EnvironmentCommunity(schema, sources, targets, spec.system)
