"""Bellwether discovery and transfer learning for software configuration optimization."""

from .beetle import (
    BeetleTransfer,
    BellwetherFinder,
    DiscoveryResult,
    RacingConfig,
    RacingConfigError,
    beetle_outcome,
    find_bellwether,
    round_robin,
    score_source,
    transfer,
)
from .dataset import (
    MAXIMIZE,
    MINIMIZE,
    DatasetError,
    EnvironmentCommunity,
    EnvironmentId,
    MeasurementTable,
    Option,
    OptionSchema,
    load_community,
    read_table_csv,
    sample_rows,
    save_community,
    table_to_csv,
    true_optimum,
)
from .metrics import NarScore, UndefinedMetricError, dense_ranks, mmre, nar, nar_at, rank_difference
from .outcome import TransferOutcome
from .ranking import RankedGroups, TestConfig, Treatment, a12, bootstrap_differs, scott_knott
from .synthetic import CommunitySpec, EnvSpec, generate, planted_spec
from .tree import RegressionTree, fit_tree, predict_best

__version__ = "0.1.0"

__all__ = [
    "MAXIMIZE",
    "MINIMIZE",
    "BeetleTransfer",
    "BellwetherFinder",
    "CommunitySpec",
    "DatasetError",
    "DiscoveryResult",
    "EnvSpec",
    "EnvironmentCommunity",
    "EnvironmentId",
    "MeasurementTable",
    "NarScore",
    "Option",
    "OptionSchema",
    "RacingConfig",
    "RacingConfigError",
    "RankedGroups",
    "RegressionTree",
    "TestConfig",
    "TransferOutcome",
    "Treatment",
    "UndefinedMetricError",
    "a12",
    "beetle_outcome",
    "bootstrap_differs",
    "dense_ranks",
    "find_bellwether",
    "fit_tree",
    "generate",
    "load_community",
    "mmre",
    "nar",
    "nar_at",
    "planted_spec",
    "predict_best",
    "rank_difference",
    "read_table_csv",
    "round_robin",
    "sample_rows",
    "save_community",
    "score_source",
    "scott_knott",
    "table_to_csv",
    "transfer",
    "true_optimum",
]
