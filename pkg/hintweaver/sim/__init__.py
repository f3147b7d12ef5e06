from .harness import (
    AttackRound,
    PairedResult,
    PairedRound,
    RoundRecord,
    RunMetrics,
    StrategyOutcome,
    allocate,
    attack_setup,
    build_attack,
    build_chain,
    build_searchers,
    build_specs,
    draw_users,
    run_paired_rounds,
    run_scenario,
)
from .reports import ROUND_COLUMNS, emit_reports, render_report, summary_document

__all__ = [
    "ROUND_COLUMNS",
    "AttackRound",
    "PairedResult",
    "PairedRound",
    "RoundRecord",
    "RunMetrics",
    "StrategyOutcome",
    "allocate",
    "attack_setup",
    "build_attack",
    "build_chain",
    "build_searchers",
    "build_specs",
    "draw_users",
    "emit_reports",
    "render_report",
    "run_paired_rounds",
    "run_scenario",
    "summary_document",
]
