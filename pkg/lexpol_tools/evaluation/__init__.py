from .protocol import (
    EvalReport,
    EvalSnapshot,
    PairComparison,
    SignificanceResult,
    aggregate,
    evaluate,
    pairwise_welch,
    snapshot_from_outcomes,
    welch_bonferroni,
    welch_t,
)
from .dominance import DominanceMap, emit_dominance_map, grid_cells
from .reporting import (
    MethodRow,
    TrajectoryWriter,
    compare,
    format_summary,
    read_gate_csv,
    read_run_series,
    read_series_csv,
    run_mode,
    write_gate_csv,
    write_run_report,
    write_series_csv,
)
