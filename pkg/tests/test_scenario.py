import pytest

from microgrid_auction.market import MarketParams
from microgrid_auction.scenario import (
    ParameterRanges,
    Scenario,
    generate_scenario,
    load_scenario,
    save_scenario,
    scenario_from_json,
    scenario_to_json,
)


def test_same_seed_same_scenario():
    a = generate_scenario(42, 5, 5)
    b = generate_scenario(42, 5, 5)
    assert a.buyers == b.buyers
    assert a.sellers == b.sellers


def test_different_seeds_differ():
    assert generate_scenario(1, 3, 3).buyers != generate_scenario(2, 3, 3).buyers


def test_generation_bounds():
    scenario = generate_scenario(7, 40, 40)
    for buyer in scenario.buyers:
        assert 0.5 <= buyer.x <= 1.5
        assert 0.5 <= buyer.y <= 1.5
    for seller in scenario.sellers:
        assert 0.5 <= seller.x <= 1.5
        assert 2.0 <= seller.g <= 5.0


def test_empty_counts_are_valid():
    scenario = generate_scenario(0, 0, 0)
    assert scenario.buyers == ()
    assert scenario.sellers == ()
    with pytest.raises(ValueError):
        generate_scenario(0, -1, 0)


def test_centered_ranges():
    ranges = ParameterRanges.centered(0.2)
    assert ranges.buyer_x == (0.8, 1.2)
    assert ranges.seller_y == (0.8, 1.2)
    assert ranges.gen == (2.0, 5.0)
    with pytest.raises(ValueError):
        ParameterRanges(buyer_x=(2.0, 1.0))


def test_json_roundtrip(tmp_path):
    scenario = generate_scenario(9, 4, 3, params=MarketParams(p=0.3))
    text = scenario_to_json(scenario)
    back = scenario_from_json(text)
    assert back.params.p == scenario.params.p
    assert back.buyers == scenario.buyers
    assert back.sellers == scenario.sellers
    # file path round trip too
    path = tmp_path / "scen.json"
    save_scenario(str(path), scenario)
    assert load_scenario(str(path)).sellers == scenario.sellers


def test_malformed_json_is_a_value_error():
    with pytest.raises(ValueError):
        scenario_from_json("{not json")
    with pytest.raises(ValueError):
        scenario_from_json('["list", "not", "object"]')
    with pytest.raises(ValueError):
        scenario_from_json('{"p": 0.25, "buyers": [{"x": 1.0}], "sellers": []}')
