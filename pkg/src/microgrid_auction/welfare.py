"""Full-information welfare benchmark.

Computes the allocation a planner who could read every agent's utility would
pick: maximize total welfare sum(u_i(d_i)) + sum(v_j(g_j - s_j)) subject to
the same budget caps, availability bounds, and energy balance the auction
enforces. The auction never consults this module; it exists so tests and
experiments can measure how close the bid-driven outcome gets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .clearing import BID_FLOOR
from .market import BuyerState, MarketParams, SellerState

_RANGE_TOL = 1e-9


@dataclass(frozen=True)
class WelfareSolution:
    """Planner's optimum: allocations, shadow price, and welfare value.

    mu_star is the price equating marginal utility across the market; None
    when the marginal curves never cross with positive volume (no trade).
    """

    d_star: tuple[float, ...]
    s_star: tuple[float, ...]
    mu_star: float | None
    theta: float

    @property
    def no_trade(self) -> bool:
        return self.mu_star is None


def social_welfare(
    buyers: list[BuyerState] | tuple[BuyerState, ...],
    sellers: list[SellerState] | tuple[SellerState, ...],
    d: tuple[float, ...] | list[float],
    s: tuple[float, ...] | list[float],
) -> float:
    """Total welfare sum(u_i(d_i)) + sum(v_j(g_j - s_j)) of an allocation."""
    if len(d) != len(buyers):
        raise ValueError(f"{len(d)} allocations vs {len(buyers)} buyers")
    if len(s) != len(sellers):
        raise ValueError(f"{len(s)} allocations vs {len(sellers)} sellers")
    total = 0.0
    for buyer, di in zip(buyers, d):
        if di < -_RANGE_TOL or not math.isfinite(di):
            raise ValueError(f"buyer allocation out of range: {di}")
        total += buyer.utility.value(max(di, 0.0))
    for seller, sj in zip(sellers, s):
        slack = _RANGE_TOL * max(1.0, seller.g)
        if sj < -slack or sj > seller.g + slack or not math.isfinite(sj):
            raise ValueError(f"seller allocation out of range: {sj} (g={seller.g})")
        retained = min(max(seller.g - sj, 0.0), seller.g)
        total += seller.utility.value(retained)
    return total


def _buyer_response(buyer: BuyerState, bid: float, mu: float, p: float) -> float:
    if bid <= BID_FLOOR:
        return 0.0
    return min(buyer.utility.inverse_marginal(mu), bid / p)


def _seller_response(seller: SellerState, avail: float, mu: float) -> float:
    retained = seller.utility.inverse_marginal(mu)
    return min(max(seller.g - retained, 0.0), avail)


def solve_welfare(
    buyers: list[BuyerState] | tuple[BuyerState, ...],
    sellers: list[SellerState] | tuple[SellerState, ...],
    bids: tuple[float, ...] | list[float],
    avails: tuple[float, ...] | list[float],
    params: MarketParams,
) -> WelfareSolution:
    """Maximize total welfare subject to budgets, availabilities, and balance.

    Strict concavity gives a unique optimum characterized by one price mu:
    buyers demand u'^-1(mu) capped at b/p, sellers supply down to the stock
    whose retained marginal value is mu, capped at their availability. Demand
    falls and supply rises in mu, so bisection finds the crossing. Bids and
    availabilities are taken as given, typically the auction's final ones.
    """
    if len(bids) != len(buyers):
        raise ValueError(f"{len(bids)} bids vs {len(buyers)} buyers")
    if len(avails) != len(sellers):
        raise ValueError(f"{len(avails)} availabilities vs {len(sellers)} sellers")
    bids = tuple(float(b) for b in bids)
    avails = tuple(float(a) for a in avails)
    p = params.p

    active_b = [i for i, b in enumerate(bids) if b > BID_FLOOR]
    active_s = [j for j, a in enumerate(avails) if a > 0]

    def autarky(mu: float | None) -> WelfareSolution:
        d0 = (0.0,) * len(buyers)
        s0 = (0.0,) * len(sellers)
        return WelfareSolution(d0, s0, mu, social_welfare(buyers, sellers, d0, s0))

    if not active_b or not active_s:
        return autarky(None)

    mu_lo = min(sellers[j].utility.marginal(sellers[j].g) for j in active_s)
    mu_hi = max(buyers[i].utility.marginal(0.0) for i in active_b)
    if mu_hi <= mu_lo:
        # The keenest buyer values energy below the cheapest seller's
        # marginal value of keeping it: no mutually beneficial trade.
        return autarky(None)

    def excess(mu: float) -> float:
        demand = math.fsum(_buyer_response(buyers[i], bids[i], mu, p) for i in active_b)
        supply = math.fsum(_seller_response(sellers[j], avails[j], mu) for j in active_s)
        return demand - supply

    lo, hi = mu_lo, mu_hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    mu = hi  # supply side of the bracket: allocations never exceed demand funds

    d = [0.0] * len(buyers)
    s = [0.0] * len(sellers)
    for i in active_b:
        d[i] = _buyer_response(buyers[i], bids[i], mu, p)
    for j in active_s:
        s[j] = _seller_response(sellers[j], avails[j], mu)
    total_d = math.fsum(d)
    total_s = math.fsum(s)
    if total_d <= 0.0 or total_s <= 0.0:
        return autarky(None)
    # Rescale the larger side down so the balance holds to round-off; bounds
    # survive because scaling only shrinks allocations.
    if total_d > total_s:
        ratio = total_s / total_d
        d = [v * ratio for v in d]
    elif total_s > total_d:
        ratio = total_d / total_s
        s = [v * ratio for v in s]
    theta = social_welfare(buyers, sellers, d, s)
    return WelfareSolution(tuple(d), tuple(s), mu, theta)


def efficiency_gap(theta_auction: float, theta_optimal: float) -> float:
    """Percent welfare shortfall of the auction against the planner optimum."""
    if theta_optimal <= 0:
        raise ValueError(f"optimal welfare must be positive, got {theta_optimal}")
    return 100.0 * (theta_optimal - theta_auction) / theta_optimal
