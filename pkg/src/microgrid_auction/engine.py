"""Iterative double-auction engine.

The controller repeatedly clears the market from the current bids and asks,
reports allocations back, and lets each agent re-quote: buyers bid their
marginal spend u'(d)*d, sellers ask the marginal value v'(g - s) of the last
unit they would give up, both with damping. The controller never sees a
utility function, only the quoted scalars.

The inner clearing regularizes seller allocations toward the previous
iterate (see clear_market_proximal). Exact all-or-nothing clearing is
discontinuous where asks tie, and at low demand the equilibrium sits exactly
on such a tie, so damping alone oscillates there; the regularized step is
continuous, has the same fixed points, and converges geometrically. Its
weights are adapted per seller from the observed ask/allocation slopes, which
uses only quoted information.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal

from .clearing import (
    BID_FLOOR,
    PROPORTIONAL,
    ClearingResult,
    clear_market,
    clear_market_proximal,
    clearing_objective,
)
from .market import (
    BuyerState,
    MarketParams,
    Payoffs,
    SellerState,
    compute_payoffs,
    declare_availability,
)
from .welfare import social_welfare

_PROX_WEIGHT_MIN = 1e-4
_PROX_WEIGHT_MAX = 1e4


@dataclass(frozen=True)
class AuctionConfig:
    """Engine knobs.

    damping blends old and target quotes (1 = undamped). Convergence needs
    three things within tol_rel: stationary bids and asks, stationary seller
    allocations, and a clearing whose optimality residual is below
    inner_kkt_tol. tie_policy picks the inner solver: "proximal" is the
    regularized clearing described in the module docstring, "proportional"
    is exact clearing with availability-proportional tie splits. Bids
    decaying below bid_floor park the buyer (frozen at zero, never re-enters);
    allocations below report_threshold count as not served in price reports.
    """

    damping: float = 0.5
    tol_rel: float = 1e-6
    max_iters: int = 500
    tie_policy: Literal["proximal", "proportional"] = "proximal"
    inner_kkt_tol: float = 1e-6
    prox_weight: float = 0.5
    adaptive_prox: bool = True
    record_trace: bool = True
    bid_floor: float = BID_FLOOR
    report_threshold: float = 1e-6

    def __post_init__(self) -> None:
        if not 0 < self.damping <= 1:
            raise ValueError(f"damping must be in (0, 1], got {self.damping}")
        if self.tol_rel <= 0:
            raise ValueError(f"tol_rel must be positive, got {self.tol_rel}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tie_policy not in ("proximal", "proportional"):
            raise ValueError(f"unknown tie policy {self.tie_policy!r}")
        if self.inner_kkt_tol <= 0:
            raise ValueError(f"inner_kkt_tol must be positive, got {self.inner_kkt_tol}")
        if self.prox_weight <= 0:
            raise ValueError(f"prox_weight must be positive, got {self.prox_weight}")
        if self.bid_floor < 0 or self.report_threshold < 0:
            raise ValueError("bid_floor and report_threshold must be >= 0")


@dataclass(frozen=True)
class IterationRecord:
    """One loop pass: the quotes that were cleared and what they produced."""

    iteration: int
    bids: tuple[float, ...]
    asks: tuple[float, ...]
    d: tuple[float, ...]
    s: tuple[float, ...]
    mu: float | None
    phi: float
    theta: float


@dataclass
class AuctionState:
    """Mutable loop state; auction_step consumes one and returns the next.

    bids/asks are the quotes to clear next. prev_s anchors the proximal
    clearing and carries the previous allocations; last_targets and curv_ema
    drive the per-seller weight adaptation. clearing holds the result of the
    most recent step, i.e. the clearing of the PREVIOUS state's quotes.
    """

    buyers: tuple[BuyerState, ...]
    sellers: tuple[SellerState, ...]
    params: MarketParams
    bids: tuple[float, ...]
    asks: tuple[float, ...]
    avails: tuple[float, ...]
    parked: tuple[bool, ...]
    prev_s: tuple[float, ...]
    prox_weights: tuple[float, ...]
    curv_ema: tuple[float, ...]
    last_targets: tuple[float, ...]
    iteration: int = 0
    clearing: ClearingResult | None = None


@dataclass(frozen=True)
class AuctionOutcome:
    """Final clearing plus the quotes that produced it and settlement data.

    bids/asks are the inputs of the final clearing (at convergence the next
    quotes coincide within tol_rel). unit_prices holds b_i/d_i per served
    buyer, None for buyers below the reporting threshold.
    """

    clearing: ClearingResult
    bids: tuple[float, ...]
    asks: tuple[float, ...]
    avails: tuple[float, ...]
    params: MarketParams
    unit_prices: tuple[float | None, ...]
    payoffs: Payoffs
    iterations: int
    converged: bool
    trace: tuple[IterationRecord, ...] = field(repr=False)


def init_auction(
    buyers: list[BuyerState] | tuple[BuyerState, ...],
    sellers: list[SellerState] | tuple[SellerState, ...],
    params: MarketParams,
) -> tuple[tuple[float, ...], tuple[float, ...], tuple[float, ...]]:
    """Opening quotes: (bids, asks, availabilities).

    Every buyer opens bidding the floor price for one energy unit. Sellers
    declare availability once (it never changes mid-auction) and open asking
    the marginal value of their full stock, their cheapest truthful ask,
    clamped to the ceiling p that sellers may never exceed.
    """
    bids = tuple(params.p for _ in buyers)
    avails = tuple(declare_availability(seller, params) for seller in sellers)
    asks = tuple(
        min(seller.utility.marginal(seller.g), params.p) for seller in sellers
    )
    return bids, asks, avails


def _initial_state(
    buyers: list[BuyerState] | tuple[BuyerState, ...],
    sellers: list[SellerState] | tuple[SellerState, ...],
    params: MarketParams,
    config: AuctionConfig,
) -> AuctionState:
    bids, asks, avails = init_auction(buyers, sellers, params)
    n_s = len(sellers)
    # A buyer whose marginal value never reaches the floor price can only
    # ratchet its bid down to zero (the update is strictly decreasing while
    # the bid is positive), so it starts parked at its exact limit.
    parked = tuple(buyer.utility.marginal(0.0) <= params.p for buyer in buyers)
    bids = tuple(0.0 if parked[i] else bids[i] for i in range(len(buyers)))
    return AuctionState(
        buyers=tuple(buyers),
        sellers=tuple(sellers),
        params=params,
        bids=bids,
        asks=asks,
        avails=avails,
        parked=parked,
        prev_s=(0.0,) * n_s,
        prox_weights=(config.prox_weight,) * n_s,
        curv_ema=(config.prox_weight / 2.0,) * n_s,
        last_targets=asks,
    )


def auction_step(state: AuctionState, config: AuctionConfig) -> AuctionState:
    """Clear the current quotes, then damp every agent toward its re-quote."""
    if config.tie_policy == "proximal":
        result = clear_market_proximal(
            state.bids, state.asks, state.avails, state.params,
            prev_s=state.prev_s, weights=state.prox_weights,
        )
    else:
        result = clear_market(
            state.bids, state.asks, state.avails, state.params, PROPORTIONAL
        )

    alpha = config.damping
    p = state.params.p

    new_bids = list(state.bids)
    parked = list(state.parked)
    for i, buyer in enumerate(state.buyers):
        if parked[i]:
            new_bids[i] = 0.0
            continue
        d = result.d[i]
        target = buyer.utility.marginal(d) * d
        b = (1 - alpha) * state.bids[i] + alpha * target
        if b < config.bid_floor:
            b = 0.0
            parked[i] = True
        new_bids[i] = b

    new_asks = list(state.asks)
    targets = [0.0] * len(state.sellers)
    weights = list(state.prox_weights)
    ema = list(state.curv_ema)
    for j, seller in enumerate(state.sellers):
        s = result.s[j]
        target = seller.utility.marginal(max(seller.g - s, 0.0))
        targets[j] = target
        new_asks[j] = min((1 - alpha) * state.asks[j] + alpha * target, p)
        if config.adaptive_prox and state.avails[j] > 0:
            ds = s - state.prev_s[j]
            if abs(ds) > 1e-12 * max(1.0, state.avails[j]):
                slope = abs(target - state.last_targets[j]) / abs(ds)
                ema[j] = 0.5 * ema[j] + 0.5 * slope
                weights[j] = min(max(2.0 * ema[j], _PROX_WEIGHT_MIN), _PROX_WEIGHT_MAX)

    return AuctionState(
        buyers=state.buyers,
        sellers=state.sellers,
        params=state.params,
        bids=tuple(new_bids),
        asks=tuple(new_asks),
        avails=state.avails,
        parked=tuple(parked),
        prev_s=result.s,
        prox_weights=tuple(weights),
        curv_ema=tuple(ema),
        last_targets=tuple(targets),
        iteration=state.iteration + 1,
        clearing=result,
    )


def _relative_change(old: tuple[float, ...], new: tuple[float, ...]) -> float:
    worst = 0.0
    for a, b in zip(old, new):
        worst = max(worst, abs(b - a) / max(abs(a), 1e-12))
    return worst


def _stationary(before: AuctionState, after: AuctionState, config: AuctionConfig) -> bool:
    result = after.clearing
    assert result is not None
    if result.kkt_residual > config.inner_kkt_tol:
        return False
    if _relative_change(before.bids, after.bids) > config.tol_rel:
        return False
    if _relative_change(before.asks, after.asks) > config.tol_rel:
        return False
    for j, a in enumerate(after.avails):
        if abs(result.s[j] - before.prev_s[j]) > config.tol_rel * max(1.0, a):
            return False
    return True


def _settle(
    state_before: AuctionState,
    result: ClearingResult,
    iterations: int,
    converged: bool,
    trace: list[IterationRecord],
    config: AuctionConfig,
) -> AuctionOutcome:
    buyers = tuple(
        replace(buyer, b=state_before.bids[i], d=result.d[i])
        for i, buyer in enumerate(state_before.buyers)
    )
    sellers = tuple(
        replace(seller, a=state_before.avails[j], c=state_before.asks[j], s=result.s[j])
        for j, seller in enumerate(state_before.sellers)
    )
    payoffs = compute_payoffs(buyers, sellers, state_before.params)
    prices: list[float | None] = []
    for i, d in enumerate(result.d):
        if d > config.report_threshold:
            prices.append(state_before.bids[i] / d)
        else:
            prices.append(None)
    return AuctionOutcome(
        clearing=result,
        bids=state_before.bids,
        asks=state_before.asks,
        avails=state_before.avails,
        params=state_before.params,
        unit_prices=tuple(prices),
        payoffs=payoffs,
        iterations=iterations,
        converged=converged,
        trace=tuple(trace),
    )


def run_auction(
    buyers: list[BuyerState] | tuple[BuyerState, ...],
    sellers: list[SellerState] | tuple[SellerState, ...],
    params: MarketParams,
    config: AuctionConfig = AuctionConfig(),
) -> AuctionOutcome:
    """Iterate clear/re-quote until the quotes go stationary.

    Returns the outcome built from the last clearing and the exact quotes it
    cleared. A run that hits max_iters still returns an outcome, flagged
    converged=False. The trace (when recorded) has one entry per clearing.
    """
    state = _initial_state(buyers, sellers, params, config)
    trace: list[IterationRecord] = []
    while True:
        nxt = auction_step(state, config)
        result = nxt.clearing
        assert result is not None
        if config.record_trace:
            trace.append(
                IterationRecord(
                    iteration=nxt.iteration,
                    bids=state.bids,
                    asks=state.asks,
                    d=result.d,
                    s=result.s,
                    mu=result.mu,
                    phi=clearing_objective(state.bids, state.asks, result.d, result.s),
                    theta=social_welfare(state.buyers, state.sellers, result.d, result.s),
                )
            )
        if _stationary(state, nxt, config):
            return _settle(state, result, nxt.iteration, True, trace, config)
        if nxt.iteration >= config.max_iters:
            return _settle(state, result, nxt.iteration, False, trace, config)
        state = nxt


def buyer_prices(outcome: AuctionOutcome, threshold: float | None = None) -> tuple[float | None, ...]:
    """Per-unit prices b_i/d_i; None marks buyers below the served threshold."""
    if threshold is None:
        return outcome.unit_prices
    prices: list[float | None] = []
    for bid, d in zip(outcome.bids, outcome.clearing.d):
        prices.append(bid / d if d > threshold else None)
    return tuple(prices)
