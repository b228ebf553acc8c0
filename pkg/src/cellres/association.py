"""Greedy user-to-cell association.

Users are visited in a seed-determined random order; each one attaches to the
eligible cell maximizing SINR divided by the load the cell would have after
the join. Users with no cell at or above the SINR threshold stay unassigned
and form the disconnected set.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geo import ANY_OPERATOR, User
from .radio import LinkBudget, LinkModel

MODE_PER_OPERATOR = "per-operator"
MODE_ROAMING = "roaming"
MODE_BOTH = "both"


def candidate_cells(user: User, cells, mode: str):
    """Cells the user may attach to: own operator's, or all under roaming."""
    if mode == MODE_ROAMING or user.operator == ANY_OPERATOR:
        return list(cells)
    return [c for c in cells if c.operator == user.operator]


@dataclass
class AssociationState:
    """Assignment x, per-cell load D, and the budgets backing the decision."""

    assigned: dict[int, int] = field(default_factory=dict)  # user id -> cell index
    loads: dict[int, int] = field(default_factory=dict)  # cell index -> user count
    budgets: dict[int, LinkBudget] = field(default_factory=dict)  # user id -> serving budget
    unassigned: list[int] = field(default_factory=list)  # user ids

    def cell_of(self, user_id: int) -> int | None:
        return self.assigned.get(user_id)

    def users_of(self, cell_index: int) -> list[int]:
        return [u for u, c in self.assigned.items() if c == cell_index]


def associate(
    users,
    cells,
    link: LinkModel,
    gamma_min_db: float,
    *,
    mode: str = MODE_PER_OPERATOR,
    order_seed: int = 0,
) -> AssociationState:
    """Run the greedy association over all users.

    Order is a seeded uniform permutation. A cell is eligible when its SINR is
    at or above gamma_min; the score is sinr / (load + 1), and ties fall to
    the lowest cell index, so the result is fully deterministic under
    (inputs, order_seed).
    """
    users = list(users)
    cells = list(cells)
    gamma_min = 10.0 ** (gamma_min_db / 10.0)
    state = AssociationState(loads={c.index: 0 for c in cells})
    order = np.random.default_rng(order_seed).permutation(len(users))
    for pos in order:
        user = users[int(pos)]
        near = link.cells_within(user.position)
        best_cell = None
        best_score = 0.0
        best_budget = None
        for cell in candidate_cells(user, near, mode):
            budget = link.budget_for_user(user, cell)
            if budget.sinr < gamma_min:
                continue
            score = budget.sinr / (state.loads[cell.index] + 1)
            if best_cell is None or score > best_score:
                best_cell, best_score, best_budget = cell, score, budget
        if best_cell is None:
            state.unassigned.append(user.id)
        else:
            state.assigned[user.id] = best_cell.index
            state.budgets[user.id] = best_budget
            state.loads[best_cell.index] += 1
    return state
