"""Shared builders for the canonical two-token scenarios used throughout."""

import pytest

from dagwood import (
    Amm,
    Deposit,
    GameInput,
    MintedPair,
    PriceOracle,
    Redeem,
    State,
    Swap,
    TokenId,
)

T0 = TokenId("T0")
T1 = TokenId("T1")
PAIR = MintedPair(T0, T1)


@pytest.fixture
def oracle_equal():
    return PriceOracle.of({"T0": 1000.0, "T1": 1000.0})


@pytest.fixture
def example1_game(oracle_equal):
    """Single user swap 40:T0 for at least 35:T1 against a (100, 100) pool."""
    state = State.make(
        {"A": {T0: 40.0}, "L": {PAIR: 100.0}},
        [Amm(PAIR, 100.0, 100.0)],
    )
    return GameInput(
        state=state,
        txpool=(Swap("A", 0, 40.0, T0, 35.0, T1),),
        oracle=oracle_equal,
        miner_id="M",
    )


@pytest.fixture
def example2_game(oracle_equal):
    """Swap + deposit + redeem txpool against a (100, 100) pool."""
    state = State.make(
        {"A": {T0: 70.0, T1: 40.0, PAIR: 10.0}, "L": {PAIR: 90.0}},
        [Amm(PAIR, 100.0, 100.0)],
    )
    return GameInput(
        state=state,
        txpool=(
            Swap("A", 0, 40.0, T0, 35.0, T1),
            Deposit("A", 30.0, T0, 40.0, T1),
            Redeem("A", 10.0, PAIR),
        ),
        oracle=oracle_equal,
        miner_id="M",
    )


@pytest.fixture
def intro_game(oracle_equal):
    """The enabled-as-written user swap 20:T0 for at least 15:T1."""
    state = State.make(
        {"A": {T0: 20.0}, "L": {PAIR: 100.0}},
        [Amm(PAIR, 100.0, 100.0)],
    )
    return GameInput(
        state=state,
        txpool=(Swap("A", 0, 20.0, T0, 15.0, T1),),
        oracle=oracle_equal,
        miner_id="M",
    )
