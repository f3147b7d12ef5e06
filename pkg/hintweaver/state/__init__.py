from .round import Matchmaker, RoundPhase, SubmitAck

__all__ = ["Matchmaker", "RoundPhase", "SubmitAck"]
