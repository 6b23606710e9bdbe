"""Simulated cost accounting in epoch-equivalents.

One unit is one training epoch of one architecture (roughly 90 s of GPU
time on the tabular benchmarks this stands in for; the mapping is
documentation only and never enters any computation).
"""

from dataclasses import dataclass, asdict

from .errors import InvalidArgument


@dataclass(frozen=True)
class CostModel:
    epoch_cost: float = 1.0
    zero_cost_query: float = 0.05
    model_query: float = 0.0

    def __post_init__(self):
        if self.epoch_cost <= 0 or self.zero_cost_query < 0 or self.model_query < 0:
            raise InvalidArgument("costs must be non-negative (epoch cost positive)")

    def to_dict(self) -> dict:
        return asdict(self)


class BudgetLedger:
    """Tracks initialization and per-query spending against fixed budgets.

    The query budget is an allowance for each individual query; the log of
    per-query spends is append-only so total spend can be reconstructed.
    """

    def __init__(self, init_budget: float = float("inf"),
                 query_budget: float = float("inf")):
        if init_budget < 0 or query_budget < 0:
            raise InvalidArgument("budgets must be >= 0")
        self.init_budget = float(init_budget)
        self.query_budget = float(query_budget)
        self.init_spent = 0.0
        self.query_log: list[float] = []
        self._open_query: float | None = None

    def charge_init(self, amount: float) -> None:
        if amount < 0:
            raise InvalidArgument("charge must be >= 0")
        if self.init_spent + amount > self.init_budget + 1e-9:
            raise InvalidArgument(
                f"initialization overspend: {self.init_spent + amount} > {self.init_budget}"
            )
        self.init_spent += amount

    def init_remaining(self) -> float:
        return self.init_budget - self.init_spent

    def begin_query(self) -> None:
        if self._open_query is not None:
            raise InvalidArgument("previous query still open")
        self._open_query = 0.0

    def charge_query(self, amount: float) -> None:
        if self._open_query is None:
            raise InvalidArgument("no open query")
        if amount < 0:
            raise InvalidArgument("charge must be >= 0")
        if self._open_query + amount > self.query_budget + 1e-9:
            raise InvalidArgument(
                f"query overspend: {self._open_query + amount} > {self.query_budget}"
            )
        self._open_query += amount

    def query_remaining(self) -> float:
        if self._open_query is None:
            raise InvalidArgument("no open query")
        return self.query_budget - self._open_query

    def end_query(self) -> float:
        if self._open_query is None:
            raise InvalidArgument("no open query")
        spent = self._open_query
        self.query_log.append(spent)
        self._open_query = None
        return spent

    @property
    def query_spent(self) -> float:
        return sum(self.query_log)

    @property
    def total_spent(self) -> float:
        return self.init_spent + self.query_spent


def unlimited_ledger() -> BudgetLedger:
    return BudgetLedger()
