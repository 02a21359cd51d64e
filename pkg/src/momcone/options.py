"""Options shared by the membership, optimization and certificate loops."""
from __future__ import annotations

from dataclasses import dataclass, field

from .sdp import SolverOptions


@dataclass
class Options:
    """Tolerances and limits for the relaxation loops.

    Attributes
    ----------
    max_order : int, optional
        Highest relaxation order tried.  ``None`` means six orders past
        the starting one.
    seed : int
        Seed for random objectives and random combinations in extraction.
    tol_rank : float
        Relative singular-value threshold for numerical ranks.
    tol_gap : float
        Relative tolerance for ``b^k = c^k``.
    tol_feas : float
        Tolerance for constraint residuals of returned witnesses.
    ball_radius : float, optional
        Radius of a ball containing ``K``; overrides the one stored in ``K``.
    deep_membership : bool
        Run the randomized membership check when no flat truncation exists.
    extra_orders : int
        Default number of orders past the start when ``max_order`` is unset.
    membership_tries : int
        Random objectives tried per order by the moment membership check
        (seeds ``seed, seed + 1, ...``) before moving to the next order.
    """

    max_order: int | None = None
    seed: int = 0
    tol_rank: float = 1e-6
    tol_gap: float = 1e-6
    tol_feas: float = 1e-6
    ball_radius: float | None = None
    deep_membership: bool = False
    extra_orders: int = 6
    membership_tries: int = 3
    solver: SolverOptions = field(default_factory=SolverOptions)

    def last_order(self, k0: int) -> int:
        return self.max_order if self.max_order is not None else k0 + self.extra_orders
