from dataclasses import dataclass
from typing import List


@dataclass(frozen=True)
class BudgetPlan:
    """Width fractions R_i of clients 0..N-1, from R_i = (1/2)^min(sigma, floor(rho * i / N)), i = 1..N."""
    fractions: List[float]
    sigma: int
    rho: int

    def __len__(self) -> int:
        return len(self.fractions)

    def __getitem__(self, client_id: int) -> float:
        return self.fractions[client_id]


def assign_budgets(num_clients: int, sigma: int, rho: int) -> BudgetPlan:
    if min(num_clients, sigma, rho) < 1:
        raise ValueError(f"N, sigma and rho must all be >= 1, got N={num_clients}, sigma={sigma}, rho={rho}")
    fractions = [0.5 ** min(sigma, (rho * i) // num_clients) for i in range(1, num_clients + 1)]
    return BudgetPlan(fractions, sigma, rho)


def homogeneous_budgets(num_clients: int) -> BudgetPlan:
    """Every client holds the full model (the FedAvg setting)."""
    return BudgetPlan([1.0] * num_clients, 0, 0)
