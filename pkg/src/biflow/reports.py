"""Small result records shared by the flow and convexity checks."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field


def slack_for(lhs: float, rhs: float, h: float, scale: float, factor: float = 1e-3) -> float:
    """``factor * max(|lhs|, |rhs|, h^2 * scale)``: vanishes under refinement."""
    return factor * max(abs(lhs), abs(rhs), h * h * abs(scale))


@dataclass
class ConvexityReport:
    """Left/middle/right sides of a convexity inequality.

    ``passed`` means ``lhs <= rhs + slack`` and, when ``mid`` is present,
    ``lhs <= mid + slack`` and ``mid <= rhs + slack``.
    """

    name: str
    lhs: float
    rhs: float
    slack: float
    mid: float | None = None
    hypotheses_met: bool = True
    eps0: float = math.nan
    eps_u: float = math.nan
    eps_v: float = math.nan
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        ok = self.lhs <= self.rhs + self.slack
        if self.mid is not None:
            ok = ok and self.lhs <= self.mid + self.slack and self.mid <= self.rhs + self.slack
        return bool(ok)

    @property
    def margin(self) -> float:
        """Smallest gap in the chain with ``slack`` added (negative on failure)."""
        gaps = [self.rhs + self.slack - self.lhs]
        if self.mid is not None:
            gaps += [self.mid + self.slack - self.lhs, self.rhs + self.slack - self.mid]
        return min(gaps)

    def as_dict(self):
        out = asdict(self)
        out["passed"] = self.passed
        return out

    def to_row(self, seed=None, amplitude=None):
        mid = math.nan if self.mid is None else self.mid
        return [seed, amplitude, self.eps_u, self.eps_v, self.lhs, mid, self.rhs,
                self.slack, int(self.passed)]


CONVEXITY_CSV_HEADER = ["seed", "amplitude", "eps_measured_u", "eps_measured_v",
                        "lhs", "mid", "rhs", "slack", "pass"]


@dataclass
class MonotoneReport:
    """Outcome of the ``|u_t|^2`` averaging check along a trajectory."""

    passed: bool
    worst_excess: float       # max over pairs of |u_t(t2)|^2 - mean_[t1,t2] |u_t|^2
    slack: float
    worst_pair: tuple | None  # ledger row indices (i1, i2) of the worst pair
    pairs_checked: int
