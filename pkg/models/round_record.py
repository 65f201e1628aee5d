from dataclasses import dataclass, field
from typing import Dict, List

CSV_HEADER = ["round", "g_acc", "l_acc", "loss_fid", "loss_tran", "loss_div", "loss_kl", "loss_kl_ema", "seconds"]


@dataclass
class RoundRecord:
    """Metrics of one communication round"""
    round: int
    g_acc: float
    l_acc: float
    loss_fid: float = 0.0
    loss_tran: float = 0.0
    loss_div: float = 0.0
    loss_kl: float = 0.0
    loss_kl_ema: float = 0.0
    seconds: float = 0.0
    participants: List[int] = field(default_factory=list)
    skipped: bool = False

    def __post_init__(self):
        if not (0.0 <= self.g_acc <= 1.0 and 0.0 <= self.l_acc <= 1.0):
            raise ValueError(f"accuracies must lie in [0, 1]: g_acc={self.g_acc}, l_acc={self.l_acc}")

    def to_row(self) -> List[str]:
        values = [self.g_acc, self.l_acc, self.loss_fid, self.loss_tran, self.loss_div,
                  self.loss_kl, self.loss_kl_ema, self.seconds]
        return [str(self.round)] + [f"{value:.10g}" for value in values]

    def as_dict(self) -> Dict[str, float]:
        return dict(zip(CSV_HEADER, [self.round, self.g_acc, self.l_acc, self.loss_fid, self.loss_tran,
                                     self.loss_div, self.loss_kl, self.loss_kl_ema, self.seconds]))


@dataclass
class RunSummary:
    """Best round of a run: the top G.acc and the L.acc measured in that same round."""
    seed: int
    top_g_acc: float
    l_acc_at_top: float
    best_round: int

    @classmethod
    def from_records(cls, seed: int, records: List[RoundRecord]) -> "RunSummary":
        if not records:
            raise ValueError("cannot summarise a run without rounds")
        # first round reaching the maximum wins ties
        best = max(records, key=lambda record: (record.g_acc, -record.round))
        return cls(seed, best.g_acc, best.l_acc, best.round)
