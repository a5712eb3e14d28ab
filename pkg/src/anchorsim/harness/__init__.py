from .scenario import (
    NAMED_CONSTELLATIONS,
    PathUpdateConfig,
    Scenario,
    ServerSite,
    TimingConfig,
    UserTrack,
    load_scenario,
    load_stations_csv,
)
from .bench import (
    ResultRow,
    reproduce_table1,
    rows_to_csv,
    run_distribution_bench,
    run_latency_bench,
    run_session_bench,
    write_rows,
)

__all__ = [
    "NAMED_CONSTELLATIONS",
    "PathUpdateConfig",
    "Scenario",
    "ServerSite",
    "TimingConfig",
    "UserTrack",
    "load_scenario",
    "load_stations_csv",
    "ResultRow",
    "reproduce_table1",
    "rows_to_csv",
    "run_distribution_bench",
    "run_latency_bench",
    "run_session_bench",
    "write_rows",
]
