import numpy as np
import pytest

from bellwether._seeding import derive_rng
from bellwether.beetle import score_source
from bellwether.dataset import table_to_csv
from bellwether.harness import run_rq1
from bellwether.synthetic import (
    PLANTED,
    CommunitySpec,
    EnvSpec,
    base_surface,
    generate,
    planted_spec,
    _schema,
)


def test_two_planted_copies_are_identical():
    com = generate(CommunitySpec(envs=(PLANTED, EnvSpec("affine", 1.0, 0.0, 0.0)), rows_per_env=100, n_binary=8))
    a, b = com.sources
    assert np.array_equal(a.perf, b.perf) and np.array_equal(a.X, b.X)


def test_shuffled_env_is_uncorrelated_with_base():
    rs = []
    for seed in range(100):
        spec = CommunitySpec(envs=(PLANTED, EnvSpec("shuffled")), rows_per_env=200, n_binary=9, seed=seed)
        com = generate(spec)
        rs.append(np.corrcoef(com.sources[0].perf, com.sources[1].perf)[0, 1])
    assert np.mean(rs) < 0.3


def test_generation_is_deterministic():
    spec = planted_spec(11, rows=120, n_options=8)
    a, b = generate(spec), generate(spec)
    assert [table_to_csv(t) for t in a.tables] == [table_to_csv(t) for t in b.tables]


def test_mixed_option_kinds_and_bounds():
    spec = CommunitySpec(envs=(PLANTED,), n_binary=3, n_numeric=2, numeric_levels=4, rows_per_env=100)
    com = generate(spec)
    X = com.sources[0].X
    assert X.shape == (100, 5)
    assert set(np.unique(X[:, 3])) <= {0.0, 1.0, 2.0, 3.0}
    assert len({tuple(r) for r in X}) == 100


@pytest.mark.parametrize("seed", range(10))
def test_affine_envs_keep_the_argmin(seed):
    spec = CommunitySpec(
        envs=(PLANTED, EnvSpec("affine", 3.7, -12.0, 0.0), EnvSpec("affine", 0.2, 40.0, 0.0)),
        rows_per_env=300, n_binary=10, seed=seed,
    )
    com = generate(spec)
    base = base_surface(spec, com.sources[0].X, _schema(spec))
    for t in com.sources:
        assert int(np.argmin(t.perf)) == int(np.argmin(base))


def test_infeasible_specs_rejected():
    with pytest.raises(ValueError):
        CommunitySpec(envs=(PLANTED,), n_binary=3, rows_per_env=9)
    with pytest.raises(ValueError):
        CommunitySpec(envs=(EnvSpec("affine", 2.0, 0.0, 0.0),))
    with pytest.raises(ValueError):
        EnvSpec("sideways")
    with pytest.raises(ValueError):
        EnvSpec("affine", -1.0)


def test_planted_spec_layout():
    spec = planted_spec(4)
    com = generate(spec)
    assert len(com.sources) == 8 and len(com.targets) == 4
    assert {t.n_rows for t in com.tables} == {500} and len(com.schema) == 10
    assert spec.envs[spec.planted] == PLANTED


@pytest.mark.slow
def test_noise_sources_transfer_no_better_than_planted():
    noise_nars, planted_nars = [], []
    for seed in range(30):
        spec = CommunitySpec(envs=(PLANTED, EnvSpec("noise"), EnvSpec("affine", 1.3, 2.0, 0.2, role="target")),
                             rows_per_env=300, n_binary=9, seed=seed)
        com = generate(spec)
        good, noise = com.sources
        tgt = com.targets[0]
        planted_nars.append(score_source(good, [tgt])[0].value)
        noise_nars.append(score_source(noise, [tgt], rng=derive_rng(seed), repeats=1)[0].value)
    assert np.median(noise_nars) >= np.median(planted_nars)


@pytest.mark.slow
def test_planted_env_ranks_first_in_round_robin():
    hits = 0
    for seed in range(30):
        spec = planted_spec(seed)
        ranking, _ = run_rq1(generate(spec), repeats=30, seed=seed)
        hits += spec.planted_name in ranking.best
    assert hits >= 27
