"""Scenario objects shared by the config golden-file test and the acceptance suite."""

from hlflatency.distributions import Exponential, Gamma, Gev
from hlflatency.harness import RegimeThresholds, SweepSpec
from hlflatency.simulator import SimConfig

SB10_TB2_CONFIG = "configs/table1_sb10_tb2.toml"

SB10_TB2_SPEC = SweepSpec(
    lambda_t=(8.0, 9.0, 10.0, 11.0),
    block_size=(10,),
    block_timeout=(2.0,),
    base=SimConfig(
        lambda_t=8.0,
        block_size=10,
        block_timeout=2.0,
        endorse_model=Exponential(94.5),
        order_overhead_model=Gamma(16.0, 80.0),
        validate_base_model=Gev(0.2105, 0.05, 0.55),
        validate_per_tx_model=Gamma(4.0, 180.0),
        n_tx=1000,
        seed=42,
        warmup_discard=0,
    ),
    runs_per_point=10,
    significance=0.01,
    outlier_k=5.0,
    thresholds=RegimeThresholds(0.95, 0.01, 0.95, 4.0),
    paired_seeds=False,
)
