from .battery import BatteryConfig, BatteryReport, ConfigError, load_config, run_battery
from .checks import (
    EntStatistics,
    InsufficientData,
    TestOutcome,
    UndefinedStatistic,
    block_frequency_p,
    chi2_bytes_p,
    ent_mean_p,
    ent_pi_p,
    ent_scc_p,
    ent_statistics,
    linear_complexity_p,
    monobit_p,
    runs_p,
    serial2_p,
    serial_p,
)
from .verdicts import (
    PROFILES,
    InvalidPValue,
    TwoLevelResult,
    Verdict,
    VerdictProfile,
    classify,
    combine_type2,
    nist_two_level,
    practrand_grade,
)
