import math
import random

import pytest

from microgrid_auction.clearing import PROPORTIONAL, clear_market
from microgrid_auction.engine import (
    AuctionConfig,
    buyer_prices,
    run_auction,
)
from microgrid_auction.market import BuyerState, MarketParams, SellerState

P = MarketParams()
CFG = AuctionConfig(max_iters=2000)


def _mixed_market(rng, nb, ns):
    """Buyers keen enough and sellers cheap enough that trade happens."""
    buyers = [BuyerState(rng.uniform(0.9, 1.6), rng.uniform(1.2, 1.8)) for _ in range(nb)]
    sellers = [
        SellerState(rng.uniform(0.1, 0.4), rng.uniform(1.2, 1.8), rng.uniform(2.0, 5.0))
        for _ in range(ns)
    ]
    return buyers, sellers


def _seller_payoff(seller: SellerState, ask: float, sold: float) -> float:
    return seller.utility.value(seller.g - sold) + ask * sold


def test_analytic_fixed_point():
    buyers = [BuyerState(1.0, 1.0)]
    sellers = [SellerState(1.0, 1.0, 4.0)]
    outcome = run_auction(buyers, sellers, P, CFG)
    assert outcome.converged
    assert outcome.clearing.d[0] == pytest.approx(1.0, rel=1e-5)
    assert outcome.clearing.s[0] == pytest.approx(1.0, rel=1e-5)
    assert outcome.bids[0] == pytest.approx(0.5, rel=1e-5)
    assert outcome.asks[0] == pytest.approx(0.25, rel=1e-5)
    assert outcome.clearing.mu == pytest.approx(0.5, rel=1e-5)
    assert outcome.unit_prices[0] == pytest.approx(0.5, rel=1e-5)
    assert outcome.payoffs.mc_revenue == pytest.approx(0.25, rel=1e-4)
    assert outcome.payoffs.buyer_payoffs[0] == pytest.approx(math.log(2.0) - 0.5, rel=1e-4)
    assert outcome.payoffs.seller_payoffs[0] == pytest.approx(math.log(4.0) + 0.25, rel=1e-4)


def test_no_sellers_is_a_converged_no_trade():
    buyers = [BuyerState(1.0, 1.0)]
    outcome = run_auction(buyers, [], P, CFG)
    assert outcome.converged
    assert outcome.clearing.no_trade
    assert outcome.payoffs.mc_revenue == 0.0
    assert outcome.unit_prices == (None,)


def test_zero_supply_decays_bids_and_terminates():
    # the seller retains everything at the floor price, so availability is 0
    buyers = [BuyerState(1.0, 1.0)]
    sellers = [SellerState(1.0, 1.0, 1.0)]
    assert sellers[0].utility.marginal(1.0) > P.p
    outcome = run_auction(buyers, sellers, P, CFG)
    assert outcome.converged
    assert outcome.avails == (0.0,)
    assert outcome.clearing.no_trade
    assert outcome.payoffs.buyer_payoffs[0] >= -1e-6
    assert outcome.payoffs.mc_revenue == 0.0


def test_priced_out_buyer_parks_at_zero_immediately():
    # choke price x*y below the floor: no positive demand at any mu >= p
    buyers = [BuyerState(0.2, 1.0), BuyerState(1.0, 1.0)]
    sellers = [SellerState(0.2, 1.0, 4.0)]
    outcome = run_auction(buyers, sellers, P, CFG)
    assert outcome.converged
    assert outcome.bids[0] == 0.0
    assert outcome.clearing.d[0] == 0.0
    assert outcome.clearing.d[1] > 0.0
    for rec in outcome.trace:
        assert rec.bids[0] == 0.0


def test_individual_rationality_and_budget_balance_on_random_runs():
    rng = random.Random(404)
    converged_runs = 0
    for _ in range(40):
        nb = rng.randint(1, 6)
        ns = rng.randint(1, 5)
        buyers, sellers = _mixed_market(rng, nb, ns)
        outcome = run_auction(buyers, sellers, P, CFG)
        assert outcome.converged
        converged_runs += 1
        assert outcome.payoffs.mc_revenue >= -1e-9
        for payoff in outcome.payoffs.buyer_payoffs:
            assert payoff >= -1e-6
        for seller, payoff in zip(sellers, outcome.payoffs.seller_payoffs):
            assert payoff >= seller.utility.value(seller.g) - 1e-6
        for bid, d in zip(outcome.bids, outcome.clearing.d):
            assert P.p * d <= bid + 1e-9
    assert converged_runs == 40


def _deviation_payoff(outcome, sellers, j, perturbed):
    asks = list(outcome.asks)
    asks[j] = perturbed
    redo = clear_market(outcome.bids, asks, outcome.avails, P, PROPORTIONAL)
    return _seller_payoff(sellers[j], perturbed, redo.s[j])


def test_interior_sellers_cannot_gain_by_overbidding():
    """Every partially dispatched seller's ask converges to the shadow price,
    so raising it prices the seller out of the merit order while co-marginal
    sellers absorb its share: the deviation forfeits the sale margin. The
    settled allocations are the baseline; a fresh tie split would break the
    ask = marginal-retained-value premise the argument rests on. The claim
    needs a price-taking seller, so deviations that would move the price are
    out of scope: saturated sellers (shading toward the shadow price is pure
    profit when paid as asked) and sellers too big for the co-marginal spare
    capacity to absorb (monopoly power). Both are filtered, not refuted."""
    rng = random.Random(77)
    checked = 0
    for _ in range(25):
        nb = rng.randint(2, 4)
        ns = rng.randint(4, 6)
        buyers = [BuyerState(rng.uniform(0.5, 1.2), rng.uniform(1.2, 1.8)) for _ in range(nb)]
        sellers = [
            SellerState(rng.uniform(0.1, 0.3), rng.uniform(1.2, 1.8), rng.uniform(2.0, 5.0))
            for _ in range(ns)
        ]
        outcome = run_auction(buyers, sellers, P, CFG)
        assert outcome.converged
        settled = outcome.clearing.s
        for j, seller in enumerate(sellers):
            c = outcome.asks[j]
            a = outcome.avails[j]
            interior = 1e-6 * max(1.0, a) < settled[j] < a - 1e-6 * max(1.0, a)
            raised = min(1.1 * c, P.p)
            if not interior or raised <= c:
                continue
            absorb = math.fsum(
                outcome.avails[k] - settled[k]
                for k in range(len(sellers))
                if k != j and outcome.asks[k] < raised
            )
            if absorb < settled[j]:
                continue
            base_payoff = _seller_payoff(seller, c, settled[j])
            assert _deviation_payoff(outcome, sellers, j, raised) <= base_payoff + 1e-9
            checked += 1
    assert checked >= 20


def test_no_seller_gains_by_underbidding():
    # paid at the own ask, quoting under the marginal value of retained
    # energy loses on every unit, dispatched more or not
    rng = random.Random(78)
    checked = 0
    for _ in range(20):
        nb = rng.randint(1, 5)
        ns = rng.randint(1, 5)
        buyers, sellers = _mixed_market(rng, nb, ns)
        outcome = run_auction(buyers, sellers, P, CFG)
        assert outcome.converged
        settled = outcome.clearing.s
        for j, seller in enumerate(sellers):
            c = outcome.asks[j]
            if c <= 0 or settled[j] <= 1e-9:
                continue
            base_payoff = _seller_payoff(seller, c, settled[j])
            assert _deviation_payoff(outcome, sellers, j, 0.9 * c) <= base_payoff + 1e-9
            checked += 1
    assert checked >= 30


def test_full_damping_step_is_the_undamped_update():
    buyers = [BuyerState(1.2, 1.4), BuyerState(0.8, 1.6)]
    sellers = [SellerState(0.2, 1.3, 3.0), SellerState(0.3, 1.5, 4.0)]
    cfg = AuctionConfig(damping=1.0, max_iters=2000)
    outcome = run_auction(buyers, sellers, P, cfg)
    first, second = outcome.trace[0], outcome.trace[1]
    for i, buyer in enumerate(buyers):
        if first.d[i] > 0:
            target = buyer.utility.marginal(first.d[i]) * first.d[i]
            assert second.bids[i] == pytest.approx(target, rel=1e-12)
    for j, seller in enumerate(sellers):
        target = min(seller.utility.marginal(seller.g - first.s[j]), P.p)
        assert second.asks[j] == pytest.approx(target, rel=1e-12)


def test_asks_never_exceed_the_retail_price():
    rng = random.Random(11)
    buyers, sellers = _mixed_market(rng, 5, 4)
    outcome = run_auction(buyers, sellers, P, CFG)
    for rec in outcome.trace:
        for ask in rec.asks:
            assert ask <= P.p + 1e-12
    for ask in outcome.asks:
        assert ask <= P.p + 1e-12


def test_outcome_quotes_are_the_final_clearing_inputs():
    rng = random.Random(23)
    buyers, sellers = _mixed_market(rng, 3, 2)
    outcome = run_auction(buyers, sellers, P, CFG)
    last = outcome.trace[-1]
    assert outcome.bids == last.bids
    assert outcome.asks == last.asks
    assert outcome.clearing.d == last.d
    assert outcome.clearing.s == last.s
    replay = clear_market(outcome.bids, outcome.asks, outcome.avails, P, PROPORTIONAL)
    assert replay.mu == pytest.approx(outcome.clearing.mu, rel=1e-9)
    assert math.fsum(replay.s) == pytest.approx(math.fsum(outcome.clearing.s), rel=1e-9)


def test_trace_recording_toggle():
    buyers = [BuyerState(1.0, 1.0)]
    sellers = [SellerState(0.2, 1.0, 4.0)]
    with_trace = run_auction(buyers, sellers, P, AuctionConfig(max_iters=2000))
    assert len(with_trace.trace) == with_trace.iterations
    assert with_trace.trace[0].iteration == 1
    silent = run_auction(
        buyers, sellers, P, AuctionConfig(max_iters=2000, record_trace=False)
    )
    assert silent.trace == ()
    assert silent.converged == with_trace.converged
    assert silent.bids == with_trace.bids


def test_tie_policies_reach_equivalent_fixed_points():
    rng = random.Random(99)
    buyers, sellers = _mixed_market(rng, 4, 3)
    prox = run_auction(buyers, sellers, P, AuctionConfig(max_iters=2000))
    prop = run_auction(
        buyers, sellers, P, AuctionConfig(max_iters=2000, tie_policy="proportional")
    )
    assert prox.converged and prop.converged
    assert prox.clearing.mu == pytest.approx(prop.clearing.mu, rel=1e-4)
    for b1, b2 in zip(prox.bids, prop.bids):
        assert b1 == pytest.approx(b2, rel=1e-4, abs=1e-9)


def test_buyer_prices_threshold():
    buyers = [BuyerState(0.2, 1.0), BuyerState(1.0, 1.0)]
    sellers = [SellerState(0.2, 1.0, 4.0)]
    outcome = run_auction(buyers, sellers, P, CFG)
    prices = buyer_prices(outcome)
    assert prices[0] is None
    assert prices[1] == pytest.approx(outcome.bids[1] / outcome.clearing.d[1])
    huge = buyer_prices(outcome, threshold=1e6)
    assert huge == (None, None)


def test_unconverged_run_is_flagged():
    rng = random.Random(8)
    buyers, sellers = _mixed_market(rng, 3, 2)
    outcome = run_auction(buyers, sellers, P, AuctionConfig(max_iters=3))
    assert not outcome.converged
    assert outcome.iterations == 3


def test_config_validation():
    with pytest.raises(ValueError):
        AuctionConfig(damping=0.0)
    with pytest.raises(ValueError):
        AuctionConfig(damping=1.5)
    with pytest.raises(ValueError):
        AuctionConfig(tol_rel=0.0)
    with pytest.raises(ValueError):
        AuctionConfig(max_iters=0)
    with pytest.raises(ValueError):
        AuctionConfig(tie_policy="midpoint")
    with pytest.raises(ValueError):
        AuctionConfig(prox_weight=0.0)


def test_determinism_across_runs():
    rng = random.Random(314)
    buyers, sellers = _mixed_market(rng, 4, 3)
    first = run_auction(buyers, sellers, P, CFG)
    second = run_auction(buyers, sellers, P, CFG)
    assert first.bids == second.bids
    assert first.asks == second.asks
    assert first.clearing == second.clearing
    assert first.iterations == second.iterations
