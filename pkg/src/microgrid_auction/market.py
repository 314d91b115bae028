"""Market primitives: agent states, truthful bid/ask responses, payoffs.

Buyers value consumed energy d through u(d) = x*log(y*d + 1) and communicate a
single scalar bid b (total money offered). Sellers value retained generation
g - s through v(g - s) = x*log(y*(g - s) + 1) and communicate a scalar ask c
(reserve price per unit). The controller never sees x or y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .utility import LogUtility

#: Relative slack used when validating allocations against declared limits.
ALLOC_TOL = 1e-9


@dataclass(frozen=True)
class MarketParams:
    """Market-wide constants.

    Attributes:
        p: price floor for buyers and price ceiling for asks, in money per
           unit energy. Buyers cannot pay less than p per unit; sellers cannot
           ask more.
    """

    p: float = 0.25

    def __post_init__(self) -> None:
        if not (math.isfinite(self.p) and self.p > 0):
            raise ValueError(f"price floor must be positive and finite, got {self.p}")


@dataclass(frozen=True)
class BuyerState:
    """One buyer: private utility parameters plus communicated/allocated state.

    Attributes:
        x: private utility scale (money units).
        y: private utility shape (per unit energy).
        b: current communicated bid, total money offered.
        d: current allocated energy.
    """

    x: float
    y: float
    b: float = 0.0
    d: float = 0.0

    def __post_init__(self) -> None:
        LogUtility(self.x, self.y)  # validates x, y
        if self.b < 0 or not math.isfinite(self.b):
            raise ValueError(f"bid must be finite and >= 0, got {self.b}")
        if self.d < 0 or not math.isfinite(self.d):
            raise ValueError(f"allocation must be finite and >= 0, got {self.d}")

    @property
    def utility(self) -> LogUtility:
        return LogUtility(self.x, self.y)


@dataclass(frozen=True)
class SellerState:
    """One seller: private utility parameters plus communicated/allocated state.

    Attributes:
        x: private utility scale (money units).
        y: private utility shape (per unit energy).
        g: generated energy this round.
        a: declared availability, fixed at auction start; 0 marks an inert
           seller that never enters clearing.
        c: current communicated ask, money per unit energy.
        s: current allocated (sold) energy.
    """

    x: float
    y: float
    g: float
    a: float = 0.0
    c: float = 0.0
    s: float = 0.0

    def __post_init__(self) -> None:
        LogUtility(self.x, self.y)
        if not (math.isfinite(self.g) and self.g > 0):
            raise ValueError(f"generation must be positive and finite, got {self.g}")
        if not (0.0 <= self.a <= self.g * (1.0 + ALLOC_TOL)):
            raise ValueError(f"availability must lie in [0, g], got {self.a}")
        if self.c < 0 or not math.isfinite(self.c):
            raise ValueError(f"ask must be finite and >= 0, got {self.c}")
        if not (0.0 <= self.s <= self.a * (1.0 + ALLOC_TOL) + ALLOC_TOL):
            raise ValueError(f"sold energy must lie in [0, a], got {self.s}")

    @property
    def utility(self) -> LogUtility:
        return LogUtility(self.x, self.y)


@dataclass(frozen=True)
class Payoffs:
    """Realized payoffs for one clearing: buyers, sellers, and the controller."""

    buyer_payoffs: tuple[float, ...]
    seller_payoffs: tuple[float, ...]
    mc_revenue: float


def buyer_utility(x: float, y: float, d: float) -> float:
    """u(d) = x*log(y*d + 1); u(0) = 0."""
    return LogUtility(x, y).value(d)


def buyer_marginal(x: float, y: float, d: float) -> float:
    """u'(d) = x*y / (y*d + 1)."""
    return LogUtility(x, y).marginal(d)


def seller_utility(x: float, y: float, g: float, s: float) -> float:
    """v(g - s): utility of generation retained after selling s.

    Raises ValueError outside 0 <= s <= g.
    """
    if s < 0 or s > g:
        raise ValueError(f"sold energy must lie in [0, g={g}], got {s}")
    return LogUtility(x, y).value(g - s)


def seller_marginal(x: float, y: float, g: float, s: float) -> float:
    """v'(g - s): marginal value of retained generation; increases with s."""
    if s < 0 or s > g:
        raise ValueError(f"sold energy must lie in [0, g={g}], got {s}")
    return LogUtility(x, y).marginal(g - s)


def declare_availability(seller: SellerState, params: MarketParams) -> float:
    """Energy a seller is willing to offer at the floor price.

    The declared amount is the largest s whose marginal retained value stays
    at or below p: a = clamp(g - v'^{-1}(p), 0, g). Declared once, before the
    first iteration, and never revised during an auction.
    """
    retained = seller.utility.inverse_marginal(params.p)
    return min(max(seller.g - retained, 0.0), seller.g)


def buyer_bid_update(buyer: BuyerState, d: float) -> float:
    """Truthful bid response to an allocation: b = u'(d) * d.

    Strictly increasing in d and bounded above by x.
    """
    if d < 0 or not math.isfinite(d):
        raise ValueError(f"allocation must be finite and >= 0, got {d}")
    return buyer.utility.marginal(d) * d


def seller_ask_update(seller: SellerState, s: float) -> float:
    """Truthful ask response to an allocation: c = v'(g - s).

    Strictly increasing in s; equals the floor price exactly when an
    interior-availability seller is fully dispatched. Raises ValueError when
    s exceeds the declared availability.
    """
    if s < 0 or not math.isfinite(s):
        raise ValueError(f"sold energy must be finite and >= 0, got {s}")
    if s > seller.a * (1.0 + ALLOC_TOL) + ALLOC_TOL:
        raise ValueError(f"sold energy {s} exceeds declared availability {seller.a}")
    return seller.utility.marginal(seller.g - min(s, seller.g))


def compute_payoffs(
    buyers: list[BuyerState] | tuple[BuyerState, ...],
    sellers: list[SellerState] | tuple[SellerState, ...],
    params: MarketParams,
) -> Payoffs:
    """Settle one clearing at the communicated scalars.

    Buyers pay their full bid: pi_i = u(d_i) - b_i. Sellers are reimbursed at
    their own ask: pi_j = v(g_j - s_j) + c_j * s_j. The controller keeps the
    difference, mc_revenue = sum(b) - sum(c * s), which is nonnegative at any
    clearing solution.
    """
    del params  # payoffs depend only on communicated scalars and allocations
    buyer_pi = tuple(b.utility.value(b.d) - b.b for b in buyers)
    seller_pi = tuple(
        s.utility.value(max(s.g - s.s, 0.0)) + s.c * s.s for s in sellers
    )
    revenue = math.fsum(b.b for b in buyers) - math.fsum(s.c * s.s for s in sellers)
    return Payoffs(buyer_pi, seller_pi, revenue)
