from .experiment import (
    AttackOutcome,
    AttackSetup,
    AttackVariant,
    mae_interval,
    run_attack_experiment,
    run_attack_trial,
)
from .sybil import AttackPlan, VictimEstimate, craft_sybil_batch, infer_victim_value

__all__ = [
    "AttackOutcome",
    "AttackPlan",
    "AttackSetup",
    "AttackVariant",
    "VictimEstimate",
    "craft_sybil_batch",
    "infer_victim_value",
    "mae_interval",
    "run_attack_experiment",
    "run_attack_trial",
]
