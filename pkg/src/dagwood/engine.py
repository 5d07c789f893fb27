"""Constant-product AMM state model and transition rules.

The engine is a deterministic, validating interpreter: states are immutable
values, each operation either returns the successor state or raises a
:class:`~dagwood.errors.StepError` naming the violated premise.

Conventions:
  * token amounts, reserves and prices are 64-bit floats;
  * pair identity is unordered for lookups, but the creation order of a
    pair is kept for rendering, and reserve indices follow that order;
  * a swap of direction ``d`` deposits the transaction's token at index
    ``d`` and withdraws the other one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

from .errors import (
    InsufficientBalance,
    MintedTokenInDeposit,
    NonPositiveAmount,
    PairAlreadyExists,
    PairMissing,
    RatioMismatch,
    ReserveDrained,
    SameToken,
    SlippageExceeded,
    StepError,
    ZeroSupply,
)

#: Relative tolerance for numeric invariant checks and state comparison.
EPS_NUM = 1e-9
#: Relative tolerance for the existing-pair deposit ratio premise.
EPS_RATIO = 1e-9
#: Absolute dead-band under which a would-be swap amount is treated as zero.
DEAD_BAND = 1e-12


def close(a: float, b: float, rel: float = EPS_NUM) -> bool:
    """Relative closeness with a small absolute floor for near-zero values."""
    return math.isclose(a, b, rel_tol=rel, abs_tol=1e-12)


@dataclass(frozen=True)
class TokenId:
    """An atomic token type, identified by a short symbol."""

    symbol: str

    def __post_init__(self):
        if not self.symbol:
            raise ValueError("token symbol must be non-empty")

    def __str__(self) -> str:
        return self.symbol


@dataclass(frozen=True, eq=False)
class MintedPair:
    """The token minted by the AMM holding ``t0`` and ``t1``.

    Equality and hashing are unordered: ``(t0, t1)`` and ``(t1, t0)`` denote
    the same pair.  The stored order is only used for display and for
    indexing the reserves of the owning AMM.
    """

    t0: TokenId
    t1: TokenId

    def __post_init__(self):
        if self.t0 == self.t1:
            raise ValueError("a minted pair needs two distinct tokens")

    def key(self) -> tuple[str, str]:
        return tuple(sorted((self.t0.symbol, self.t1.symbol)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, MintedPair):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def __str__(self) -> str:
        return f"({self.t0},{self.t1})"


Token = Union[TokenId, MintedPair]


def is_atomic(token: Token) -> bool:
    return isinstance(token, TokenId)


@dataclass(frozen=True)
class Balance:
    """A wallet: a map from token to a nonnegative amount; absent means 0."""

    amounts: Mapping[Token, float] = field(default_factory=dict)

    def __post_init__(self):
        for token, amount in self.amounts.items():
            if amount < 0:
                raise ValueError(f"negative balance {amount} of {token}")

    def get(self, token: Token) -> float:
        return self.amounts.get(token, 0.0)

    def add(self, token: Token, amount: float) -> "Balance":
        new = dict(self.amounts)
        new[token] = new.get(token, 0.0) + amount
        return Balance(new)

    def sub(self, token: Token, amount: float) -> "Balance":
        held = self.get(token)
        if held < amount:
            raise ValueError(f"balance underflow: {held} - {amount} of {token}")
        new = dict(self.amounts)
        new[token] = held - amount
        return Balance(new)

    def plus(self, other: "Balance") -> "Balance":
        merged = dict(self.amounts)
        for token, amount in other.amounts.items():
            merged[token] = merged.get(token, 0.0) + amount
        return Balance(merged)

    def tokens(self) -> Iterable[Token]:
        return self.amounts.keys()

    def __str__(self) -> str:
        inner = ", ".join(f"{v:g}:{t}" for t, v in self.amounts.items())
        return "{" + inner + "}"


@dataclass(frozen=True)
class Amm:
    """An AMM holding ``r0`` units of ``pair.t0`` and ``r1`` of ``pair.t1``."""

    pair: MintedPair
    r0: float
    r1: float

    def __post_init__(self):
        if self.r0 <= 0 or self.r1 <= 0:
            raise ValueError(f"reserves must be positive, got ({self.r0}, {self.r1})")

    def reserve(self, token: TokenId) -> float:
        if token == self.pair.t0:
            return self.r0
        if token == self.pair.t1:
            return self.r1
        raise KeyError(f"{token} not in {self.pair}")

    def __str__(self) -> str:
        return f"({self.r0:g}:{self.pair.t0}, {self.r1:g}:{self.pair.t1})"


@dataclass(frozen=True)
class State:
    """A composition of user wallets and AMMs."""

    wallets: Mapping[str, Balance] = field(default_factory=dict)
    amms: Mapping[MintedPair, Amm] = field(default_factory=dict)

    @classmethod
    def make(cls, wallets: Mapping[str, Mapping[Token, float]], amms: Iterable[Amm]) -> "State":
        indexed: dict[MintedPair, Amm] = {}
        for amm in amms:
            if amm.pair in indexed:
                raise PairAlreadyExists(f"duplicate AMM for pair {amm.pair}")
            indexed[amm.pair] = amm
        return cls(
            wallets={user: Balance(dict(held)) for user, held in wallets.items()},
            amms=indexed,
        )

    def balance(self, user: str) -> Balance:
        return self.wallets.get(user, Balance())

    def amm(self, pair: MintedPair) -> Amm | None:
        return self.amms.get(pair)

    def with_wallet(self, user: str, balance: Balance) -> "State":
        wallets = dict(self.wallets)
        wallets[user] = balance
        return State(wallets=wallets, amms=self.amms)

    def with_amm(self, amm: Amm) -> "State":
        amms = dict(self.amms)
        amms[amm.pair] = amm
        return State(wallets=self.wallets, amms=amms)

    def without_amm(self, pair: MintedPair) -> "State":
        amms = dict(self.amms)
        del amms[pair]
        return State(wallets=self.wallets, amms=amms)

    def users(self) -> Iterable[str]:
        return self.wallets.keys()


@dataclass(frozen=True)
class Deposit:
    """Deposit ``v0:t0`` and ``v1:t1``, receiving minted ``(t0, t1)``."""

    user: str
    v0: float
    t0: TokenId
    v1: float
    t1: TokenId


@dataclass(frozen=True)
class Swap:
    """Swap direction ``d``: deposit ``v_d`` of ``t_d``, receive at least
    ``v_{1-d}`` of the other token."""

    user: str
    d: int
    v0: float
    t0: TokenId
    v1: float
    t1: TokenId

    def token_in(self) -> TokenId:
        return self.t0 if self.d == 0 else self.t1

    def token_out(self) -> TokenId:
        return self.t1 if self.d == 0 else self.t0

    def value_in(self) -> float:
        return self.v0 if self.d == 0 else self.v1

    def value_out_min(self) -> float:
        return self.v1 if self.d == 0 else self.v0


@dataclass(frozen=True)
class Redeem:
    """Redeem ``v`` units of the minted pair for both underlying tokens."""

    user: str
    v: float
    pair: MintedPair


Transaction = Union[Deposit, Swap, Redeem]


@dataclass(frozen=True)
class StepRecord:
    """Outcome of one transition attempt inside :func:`apply_sequence`."""

    tx: Transaction
    state: State
    error: StepError | None = None


def supply(state: State, token: Token) -> float:
    """Total supply of ``token``: wallet holdings, plus reserves if atomic."""
    total = sum(bal.get(token) for bal in state.wallets.values())
    if is_atomic(token):
        for amm in state.amms.values():
            if token == amm.pair.t0:
                total += amm.r0
            elif token == amm.pair.t1:
                total += amm.r1
    return total


def swap_output(r_in: float, r_out: float, v_in: float) -> float:
    """Amount paid out by a constant-product swap depositing ``v_in``."""
    return r_out * v_in / (r_in + v_in)


def deposit(state: State, tx: Deposit, eps_ratio: float = EPS_RATIO) -> State:
    """Apply a deposit: create the AMM if the pair is new, extend it otherwise.

    A deposit into an existing AMM must preserve the reserve ratio within
    ``eps_ratio`` (relative, on the cross products) and mints
    ``v0 / r0 * supply`` units of the pair.
    """
    if tx.v0 <= 0 or tx.v1 <= 0:
        raise NonPositiveAmount(f"deposit amounts must be positive: {tx.v0}, {tx.v1}", tx)
    if not (is_atomic(tx.t0) and is_atomic(tx.t1)):
        raise MintedTokenInDeposit("deposits take atomic tokens only", tx)
    if tx.t0 == tx.t1:
        raise SameToken(f"deposit needs two distinct tokens, got {tx.t0}", tx)
    bal = state.balance(tx.user)
    if bal.get(tx.t0) < tx.v0 or bal.get(tx.t1) < tx.v1:
        raise InsufficientBalance(
            f"{tx.user} holds ({bal.get(tx.t0):g}:{tx.t0}, {bal.get(tx.t1):g}:{tx.t1}),"
            f" needs ({tx.v0:g}, {tx.v1:g})",
            tx,
        )

    pair = MintedPair(tx.t0, tx.t1)
    amm = state.amm(pair)
    if amm is None:
        # Pair creation: reserves are the deposited amounts, mint is v0.
        new_amm = Amm(pair, tx.v0, tx.v1)
        new_bal = bal.sub(tx.t0, tx.v0).sub(tx.t1, tx.v1).add(pair, tx.v0)
        return state.with_wallet(tx.user, new_bal).with_amm(new_amm)

    # Align the AMM's stored orientation with the transaction's token order.
    a0, a1 = amm.reserve(tx.t0), amm.reserve(tx.t1)
    if not close(a1 * tx.v0, a0 * tx.v1, rel=eps_ratio):
        raise RatioMismatch(
            f"deposit ratio {tx.v0:g}/{tx.v1:g} does not match reserves {a0:g}/{a1:g}",
            tx,
        )
    pool_supply = supply(state, amm.pair)
    if pool_supply <= 0:
        raise ZeroSupply(f"pair {amm.pair} has zero supply")
    minted = tx.v0 / a0 * pool_supply

    if tx.t0 == amm.pair.t0:
        new_amm = Amm(amm.pair, amm.r0 + tx.v0, amm.r1 + tx.v1)
    else:
        new_amm = Amm(amm.pair, amm.r0 + tx.v1, amm.r1 + tx.v0)
    new_bal = bal.sub(tx.t0, tx.v0).sub(tx.t1, tx.v1).add(amm.pair, minted)
    return state.with_wallet(tx.user, new_bal).with_amm(new_amm)


def swap(state: State, tx: Swap) -> State:
    """Apply a swap; the user receives the full constant-product output."""
    if tx.d not in (0, 1):
        raise ValueError(f"swap direction must be 0 or 1, got {tx.d}")
    if tx.value_in() <= 0 or tx.value_out_min() <= 0:
        raise NonPositiveAmount(f"swap amounts must be positive: {tx.v0}, {tx.v1}", tx)
    if tx.t0 == tx.t1:
        raise SameToken(f"swap needs two distinct tokens, got {tx.t0}", tx)
    pair = MintedPair(tx.t0, tx.t1)
    amm = state.amm(pair)
    if amm is None:
        raise PairMissing(f"no AMM for pair {pair}", tx)
    bal = state.balance(tx.user)
    t_in, t_out = tx.token_in(), tx.token_out()
    v_in, v_min = tx.value_in(), tx.value_out_min()
    if bal.get(t_in) < v_in:
        raise InsufficientBalance(
            f"{tx.user} holds {bal.get(t_in):g}:{t_in}, needs {v_in:g}", tx
        )
    r_in, r_out = amm.reserve(t_in), amm.reserve(t_out)
    out = swap_output(r_in, r_out, v_in)
    if out >= r_out:
        raise ReserveDrained(f"swap would drain the {t_out} reserve", tx)
    if out < v_min:
        raise SlippageExceeded(
            f"swap pays {out:g}:{t_out}, below the requested minimum {v_min:g}", tx
        )

    if t_in == amm.pair.t0:
        new_amm = Amm(amm.pair, amm.r0 + v_in, amm.r1 - out)
    else:
        new_amm = Amm(amm.pair, amm.r0 - out, amm.r1 + v_in)
    new_bal = bal.sub(t_in, v_in).add(t_out, out)
    return state.with_wallet(tx.user, new_bal).with_amm(new_amm)


def redeem(state: State, tx: Redeem) -> State:
    """Apply a redeem: burn minted tokens for proportional reserve shares."""
    if tx.v <= 0:
        raise NonPositiveAmount(f"redeem amount must be positive: {tx.v}", tx)
    amm = state.amm(tx.pair)
    if amm is None:
        raise PairMissing(f"no AMM for pair {tx.pair}", tx)
    bal = state.balance(tx.user)
    if bal.get(amm.pair) < tx.v:
        raise InsufficientBalance(
            f"{tx.user} holds {bal.get(amm.pair):g}:{amm.pair}, needs {tx.v:g}", tx
        )
    pool_supply = supply(state, amm.pair)
    if tx.v >= pool_supply:
        raise ReserveDrained("redeeming the whole supply would empty the AMM", tx)
    v0 = tx.v * amm.r0 / pool_supply
    v1 = tx.v * amm.r1 / pool_supply

    new_amm = Amm(amm.pair, amm.r0 - v0, amm.r1 - v1)
    new_bal = bal.sub(amm.pair, tx.v).add(amm.pair.t0, v0).add(amm.pair.t1, v1)
    return state.with_wallet(tx.user, new_bal).with_amm(new_amm)


def step(state: State, tx: Transaction, eps_ratio: float = EPS_RATIO) -> State:
    """Apply a single transaction, dispatching on its kind."""
    if isinstance(tx, Deposit):
        return deposit(state, tx, eps_ratio=eps_ratio)
    if isinstance(tx, Swap):
        return swap(state, tx)
    if isinstance(tx, Redeem):
        return redeem(state, tx)
    raise TypeError(f"not a transaction: {tx!r}")


def apply_sequence(
    state: State,
    txs: Iterable[Transaction],
    strict: bool = True,
    eps_ratio: float = EPS_RATIO,
) -> tuple[State, list[StepRecord]]:
    """Fold :func:`step` over ``txs`` left to right.

    In strict mode (default) the first rejection is raised.  In audit mode
    rejections are recorded, the state stays frozen at the failure point and
    later transactions are still attempted against the frozen state.
    """
    records: list[StepRecord] = []
    current = state
    for tx in txs:
        try:
            current = step(current, tx, eps_ratio=eps_ratio)
            records.append(StepRecord(tx, current))
        except StepError as err:
            if strict:
                raise
            records.append(StepRecord(tx, current, error=err))
    return current, records


def balances_close(a: Balance, b: Balance, rel: float = EPS_NUM) -> bool:
    for token in set(a.tokens()) | set(b.tokens()):
        if not close(a.get(token), b.get(token), rel=rel):
            return False
    return True


def states_close(a: State, b: State, rel: float = EPS_NUM) -> bool:
    """Compare two states as multisets of base terms within tolerance."""
    if set(a.users()) != set(b.users()):
        return False
    if set(a.amms.keys()) != set(b.amms.keys()):
        return False
    for user in a.users():
        if not balances_close(a.balance(user), b.balance(user), rel=rel):
            return False
    for pair, amm_a in a.amms.items():
        amm_b = b.amms[pair]
        if not close(amm_a.reserve(amm_b.pair.t0), amm_b.r0, rel=rel):
            return False
        if not close(amm_a.reserve(amm_b.pair.t1), amm_b.r1, rel=rel):
            return False
    return True
