"""Token pricing, net worth and gain.

Minted tokens are priced by their pro-rata claim on the AMM reserves, so
that depositing or redeeming never changes the issuer's net worth.  The
projected price answers "what would the minted token be worth if a swap
moved the reserve ratio to R", and its minimum over R gives the price floor
an adversary can push a pool to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .engine import (
    Balance,
    MintedPair,
    State,
    StepError,
    TokenId,
    Transaction,
    apply_sequence,
    is_atomic,
    supply,
)
from .errors import NonPositiveRatio, PairMissing, UnknownUser, ZeroSupply


@dataclass(frozen=True)
class PriceOracle:
    """Fixed prices of atomic tokens in the reference currency."""

    prices: Mapping[TokenId, float] = field(default_factory=dict)

    def __post_init__(self):
        for token, price in self.prices.items():
            if price <= 0:
                raise ValueError(f"price of {token} must be positive, got {price}")

    @classmethod
    def of(cls, prices: Mapping[str, float]) -> "PriceOracle":
        return cls({TokenId(sym): p for sym, p in prices.items()})

    def price(self, token: TokenId) -> float:
        try:
            return self.prices[token]
        except KeyError:
            raise KeyError(f"no price for atomic token {token}") from None

    def tokens(self) -> Iterable[TokenId]:
        return self.prices.keys()


@dataclass(frozen=True)
class WealthBreakdown:
    """Net worth split into its atomic and minted components."""

    atomic: float
    minted: float

    @property
    def total(self) -> float:
        return self.atomic + self.minted


@dataclass(frozen=True)
class GainReport:
    """Gain of a user over a sequence, plus whether it was enabled at all.

    A disabled sequence has gain 0 by definition; ``enabled`` lets callers
    tell that apart from a genuinely neutral enabled sequence.
    """

    value: float
    enabled: bool
    error: StepError | None = None


def minted_price(state: State, pair: MintedPair, oracle: PriceOracle) -> float:
    """Price of one unit of the minted pair: reserve value over supply."""
    amm = state.amm(pair)
    if amm is None:
        raise PairMissing(f"no AMM for pair {pair}")
    pool_supply = supply(state, amm.pair)
    if pool_supply <= 0:
        raise ZeroSupply(f"pair {amm.pair} has zero supply")
    value = amm.r0 * oracle.price(amm.pair.t0) + amm.r1 * oracle.price(amm.pair.t1)
    return value / pool_supply


def net_worth(state: State, user: str, oracle: PriceOracle) -> WealthBreakdown:
    """Wallet value at oracle prices, split into atomic and minted parts."""
    if user not in state.wallets:
        raise UnknownUser(f"no wallet for user {user!r}")
    atomic = 0.0
    minted = 0.0
    for token, amount in state.balance(user).amounts.items():
        if is_atomic(token):
            atomic += amount * oracle.price(token)
        elif amount != 0.0:
            minted += amount * minted_price(state, token, oracle)
    return WealthBreakdown(atomic=atomic, minted=minted)


def gain_report(
    state: State, user: str, txs: Iterable[Transaction], oracle: PriceOracle
) -> GainReport:
    """Change of ``user``'s net worth over ``txs``; 0 if the sequence is disabled."""
    before = net_worth(state, user, oracle).total
    try:
        after_state, _ = apply_sequence(state, list(txs), strict=True)
    except StepError as err:
        return GainReport(value=0.0, enabled=False, error=err)
    after = net_worth(after_state, user, oracle).total
    return GainReport(value=after - before, enabled=True)


def gain(state: State, user: str, txs: Iterable[Transaction], oracle: PriceOracle) -> float:
    return gain_report(state, user, txs, oracle).value


def projected_minted_price(
    state: State, pair: MintedPair, oracle: PriceOracle, ratio: float
) -> float:
    """Minted price after a hypothetical swap moving the reserve ratio to
    ``ratio`` (``r0/r1`` in the pair's stored orientation)."""
    if ratio <= 0:
        raise NonPositiveRatio(f"projected ratio must be positive, got {ratio}")
    amm = state.amm(pair)
    if amm is None:
        raise PairMissing(f"no AMM for pair {pair}")
    pool_supply = supply(state, amm.pair)
    if pool_supply <= 0:
        raise ZeroSupply(f"pair {amm.pair} has zero supply")
    product = amm.r0 * amm.r1
    p0 = oracle.price(amm.pair.t0)
    p1 = oracle.price(amm.pair.t1)
    return (math.sqrt(product * ratio) * p0 + math.sqrt(product / ratio) * p1) / pool_supply


def min_minted_price(state: State, pair: MintedPair, oracle: PriceOracle) -> float:
    """Floor of the minted price over every reachable successor state.

    The projected price is minimized at the equilibrium ratio, where it
    collapses to ``2 * sqrt(r0 * r1 * p0 * p1) / supply``.
    """
    amm = state.amm(pair)
    if amm is None:
        raise PairMissing(f"no AMM for pair {pair}")
    pool_supply = supply(state, amm.pair)
    if pool_supply <= 0:
        raise ZeroSupply(f"pair {amm.pair} has zero supply")
    p0 = oracle.price(amm.pair.t0)
    p1 = oracle.price(amm.pair.t1)
    return 2.0 * math.sqrt(amm.r0 * amm.r1 * p0 * p1) / pool_supply


def total_wealth(state: State, oracle: PriceOracle) -> float:
    """Summed net worth of every wallet in the state."""
    return sum(net_worth(state, user, oracle).total for user in state.users())


def balance_value(balance: Balance, oracle: PriceOracle) -> float:
    """Value of a balance of atomic tokens at oracle prices."""
    value = 0.0
    for token, amount in balance.amounts.items():
        if not is_atomic(token):
            raise ValueError(f"balance_value prices atomic tokens only, got {token}")
        value += amount * oracle.price(token)
    return value
