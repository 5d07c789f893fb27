"""Optimal MEV extraction: the multi-layer Dagwood sandwich.

Given a pool of pending user transactions, the solver builds one inner
layer per exploitable user transaction (an optional miner front-run swap
that enables the user transaction at its worst admissible terms, followed
by the user transaction itself) and a final layer of swaps that pushes
every minted-token price to its floor.  Redeems are always dropped: they
can only help their issuer.

The layered construction is position-independent, so the txpool is
processed in its given order; permuting it changes neither the gain nor
the terminal reserves (this is tested rather than assumed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

from .engine import (
    DEAD_BAND,
    EPS_NUM,
    EPS_RATIO,
    Amm,
    Balance,
    Deposit,
    MintedPair,
    Redeem,
    State,
    StepRecord,
    Swap,
    Transaction,
    apply_sequence,
    close,
    is_atomic,
    step,
    supply,
    swap_output,
)
from .errors import (
    Infeasible,
    InsufficientBalance,
    NoFeasibleBundle,
    PairMissing,
    StepError,
    UnfundedUser,
)
from .pricing import PriceOracle, gain as pricing_gain

LayerKind = Literal["swap_inner", "deposit_inner", "redeem_dropped", "final_swap"]


@dataclass(frozen=True)
class Layer:
    """One sandwich layer: miner front-run first, then the user transaction.

    Inner layers with an empty ``txs`` mean the user transaction was dropped
    (it could not reduce its issuer's net worth).  Final layers hold at most
    one miner swap and no user transaction.
    """

    kind: LayerKind
    txs: tuple[Transaction, ...]
    user_tx: Transaction | None = None
    pair: MintedPair | None = None

    def __post_init__(self):
        if self.kind == "redeem_dropped" and self.txs:
            raise ValueError("a dropped redeem layer carries no transactions")
        if self.kind == "final_swap" and len(self.txs) > 1:
            raise ValueError("a final layer holds at most one miner swap")
        if self.kind in ("swap_inner", "deposit_inner") and self.txs:
            if self.txs[-1] != self.user_tx:
                raise ValueError("inner layers end with the user transaction")


@dataclass(frozen=True)
class GameInput:
    """Initial state of the extraction game.

    The miner's wallet is not part of the state; the solver computes the
    balance the miner must bring.  Every AMM must have positive minted
    supply (held in user wallets) so that minted tokens are priceable.
    """

    state: State
    txpool: tuple[Transaction, ...]
    oracle: PriceOracle
    miner_id: str

    def __post_init__(self):
        if self.miner_id in self.state.wallets:
            raise ValueError(f"miner {self.miner_id!r} must not own a wallet in the state")
        for tx in self.txpool:
            if tx.user not in self.state.wallets:
                raise ValueError(f"txpool user {tx.user!r} has no wallet")
        for pair, amm in self.state.amms.items():
            if supply(self.state, pair) <= 0:
                raise ValueError(f"pair {amm.pair} has zero minted supply")
        for token in self._atomic_tokens():
            self.oracle.price(token)

    def _atomic_tokens(self):
        seen = set()
        for bal in self.state.wallets.values():
            for token in bal.tokens():
                if is_atomic(token):
                    seen.add(token)
        for amm in self.state.amms.values():
            seen.add(amm.pair.t0)
            seen.add(amm.pair.t1)
        return seen


@dataclass(frozen=True)
class DagwoodSolution:
    """The assembled sandwich plus everything needed to audit it.

    ``miner_balance_naive`` sums the deposited side of every miner swap
    (the reporting convention of the construction); ``miner_balance_minimal``
    is the per-token maximum running deficit, which nets inflows against
    later outflows.  ``trace`` starts at the initial state augmented with
    the naive balance and has one state per transaction.
    """

    layers: tuple[Layer, ...]
    txs: tuple[Transaction, ...]
    miner_balance_naive: Balance
    miner_balance_minimal: Balance
    predicted_gain: float
    trace: tuple[State, ...] = field(repr=False)


def canonical_swap_values(
    state: State, pair: MintedPair, oracle: PriceOracle, d: int
) -> tuple[float, float]:
    """Swap amounts that move the pair to its price-equilibrium ratio.

    Returns ``(deposited, received)`` for direction ``d`` over the stored
    pair orientation.  A non-positive deposited value means no profitable
    swap exists in that direction.
    """
    amm = state.amm(pair)
    if amm is None:
        raise PairMissing(f"no AMM for pair {pair}")
    tokens = (amm.pair.t0, amm.pair.t1)
    reserves = (amm.r0, amm.r1)
    price_in = oracle.price(tokens[d])
    price_out = oracle.price(tokens[1 - d])
    deposited = math.sqrt(price_out / price_in * amm.r0 * amm.r1) - reserves[d]
    received = reserves[1 - d] * deposited / (reserves[d] + deposited)
    return deposited, received


def price_minimization_tx(
    state: State, pair: MintedPair, oracle: PriceOracle, miner: str
) -> Swap | None:
    """The single swap that pushes the minted price to its floor.

    Returns ``None`` when the pair already sits at the equilibrium ratio
    (both canonical deposited values within the dead-band of zero); at most
    one direction can have a positive value.
    """
    amm = state.amm(pair)
    if amm is None:
        raise PairMissing(f"no AMM for pair {pair}")
    for d in (0, 1):
        deposited, _ = canonical_swap_values(state, pair, oracle, d)
        if deposited > DEAD_BAND:
            return _tight_miner_swap(amm, d, deposited, miner)
    return None


def _tight_miner_swap(amm: Amm, d: int, deposited: float, miner: str) -> Swap:
    """Build a miner swap whose minimum equals its engine-exact output."""
    tokens = (amm.pair.t0, amm.pair.t1)
    reserves = (amm.r0, amm.r1)
    out = swap_output(reserves[d], reserves[1 - d], deposited)
    values = [0.0, 0.0]
    values[d] = deposited
    values[1 - d] = out
    return Swap(miner, d, values[0], tokens[0], values[1], tokens[1])


def final_layer(
    state: State, oracle: PriceOracle, miner: str
) -> tuple[Balance, list[Layer]]:
    """Price-minimization layer for every AMM, in sorted pair order.

    Each swap touches a single pair, so the result does not depend on the
    iteration order.  The returned balance sums the deposited sides.
    """
    balance = Balance()
    layers: list[Layer] = []
    for amm in sorted(state.amms.values(), key=lambda a: a.pair.key()):
        tx = price_minimization_tx(state, amm.pair, oracle, miner)
        if tx is None:
            layers.append(Layer("final_swap", (), pair=amm.pair))
        else:
            balance = balance.add(tx.token_in(), tx.value_in())
            layers.append(Layer("final_swap", (tx,), pair=amm.pair))
    return balance, layers


def _aligned_reserves(amm: Amm, t0, t1) -> tuple[float, float]:
    return amm.reserve(t0), amm.reserve(t1)


def swap_front_run_reserves(state: State, user_swap: Swap) -> tuple[float, float]:
    """Reserves at which the user swap pays out exactly its minimum.

    Returned in the order of the transaction's token pair; the reserve
    product is preserved.
    """
    amm = state.amm(MintedPair(user_swap.t0, user_swap.t1))
    if amm is None:
        raise PairMissing(f"no AMM for pair ({user_swap.t0},{user_swap.t1})", user_swap)
    a0, a1 = _aligned_reserves(amm, user_swap.t0, user_swap.t1)
    v0, v1 = user_swap.v0, user_swap.v1
    v_min = user_swap.value_out_min()
    root = math.sqrt(v0 * v0 * v1 * v1 + 4.0 * v0 * v1 * a0 * a1)
    r_in = (root - v0 * v1) / (2.0 * v_min)
    r_out = a0 * a1 / r_in
    if user_swap.d == 0:
        return r_in, r_out
    return r_out, r_in


def _user_swap_enabled_output(state: State, user_swap: Swap) -> float:
    amm = state.amm(MintedPair(user_swap.t0, user_swap.t1))
    r_in = amm.reserve(user_swap.token_in())
    r_out = amm.reserve(user_swap.token_out())
    return swap_output(r_in, r_out, user_swap.value_in())


def swap_front_run_tx(
    state: State, user_swap: Swap, miner: str, eps: float = EPS_NUM
) -> Swap | None:
    """Miner swap moving the pair to the user swap's front-run reserves.

    ``None`` when the current reserves already coincide (within ``eps``)
    and the user swap is enabled as-is.  The deposited amount is nudged by
    a few ulps when the closed form lands on the disabling side of the
    tightness boundary.
    """
    amm = state.amm(MintedPair(user_swap.t0, user_swap.t1))
    if amm is None:
        raise PairMissing(f"no AMM for pair ({user_swap.t0},{user_swap.t1})", user_swap)
    a = _aligned_reserves(amm, user_swap.t0, user_swap.t1)
    target = swap_front_run_reserves(state, user_swap)
    d_a = user_swap.d
    enabled_now = _user_swap_enabled_output(state, user_swap) >= user_swap.value_out_min()

    if close(target[0], a[0], rel=eps) and close(target[1], a[1], rel=eps) and enabled_now:
        return None

    if target[d_a] > a[d_a]:
        d_m = d_a
    elif target[1 - d_a] > a[1 - d_a]:
        d_m = 1 - d_a
    elif not enabled_now:
        # Reserves numerically at the tightness boundary but the user swap
        # is disabled by float dust; push opposite to the user to re-enable.
        d_m = 1 - d_a
    else:
        raise Infeasible(
            f"no front-run direction moves reserves {a} to {target}", user_swap
        )

    deposited = max(target[d_m] - a[d_m], a[d_m] * 1e-16)
    tokens = (user_swap.t0, user_swap.t1)

    # The user swap output is decreasing in the deposit when the miner swaps
    # in the user's direction, increasing otherwise.
    shrink = d_m == d_a
    for attempt in range(14):
        front = _miner_swap_for(amm, tokens, d_m, deposited, miner)
        funded = state.with_wallet(
            miner, state.balance(miner).add(front.token_in(), front.value_in())
        )
        probe = step(funded, front)
        if _user_swap_enabled_output(probe, user_swap) >= user_swap.value_out_min():
            return front
        nudge = a[d_m] * 1e-16 * 4.0**attempt
        deposited = deposited - nudge if shrink else deposited + nudge
        if deposited <= 0:
            raise Infeasible("front-run amount vanished while nudging", user_swap)
    raise Infeasible("could not enable the user swap within tolerance", user_swap)


def _miner_swap_for(amm: Amm, tokens, d_m: int, deposited: float, miner: str) -> Swap:
    """Tight miner swap in the given token orientation."""
    r_in = amm.reserve(tokens[d_m])
    r_out = amm.reserve(tokens[1 - d_m])
    out = swap_output(r_in, r_out, deposited)
    values = [0.0, 0.0]
    values[d_m] = deposited
    values[1 - d_m] = out
    return Swap(miner, d_m, values[0], tokens[0], values[1], tokens[1])


def swap_inner_layer(
    state: State, user_swap: Swap, oracle: PriceOracle, miner: str, eps: float = EPS_NUM
) -> tuple[Balance, Layer]:
    """Front-run-and-include the user swap if it loses money for its issuer.

    Swaps whose atomic net-worth change is zero or positive for the issuer
    are dropped; including them could only subsidize the user.
    """
    delta = (
        user_swap.value_out_min() * oracle.price(user_swap.token_out())
        - user_swap.value_in() * oracle.price(user_swap.token_in())
    )
    if delta >= 0:
        return Balance(), Layer("swap_inner", (), user_tx=user_swap)
    front = swap_front_run_tx(state, user_swap, miner, eps=eps)
    if front is None:
        return Balance(), Layer("swap_inner", (user_swap,), user_tx=user_swap)
    balance = Balance({front.token_in(): front.value_in()})
    return balance, Layer("swap_inner", (front, user_swap), user_tx=user_swap)


def deposit_front_run_reserves(state: State, user_deposit: Deposit) -> tuple[float, float]:
    """Reserves matching the deposit's ratio, preserving the product.

    Returned in the order of the transaction's token pair.
    """
    amm = state.amm(MintedPair(user_deposit.t0, user_deposit.t1))
    if amm is None:
        raise PairMissing(
            f"no AMM for pair ({user_deposit.t0},{user_deposit.t1})", user_deposit
        )
    a0, a1 = _aligned_reserves(amm, user_deposit.t0, user_deposit.t1)
    v0, v1 = user_deposit.v0, user_deposit.v1
    r0 = math.sqrt(v0 / v1 * a0 * a1)
    r1 = math.sqrt(v1 / v0 * a0 * a1)
    return r0, r1


def deposit_inner_layer(
    state: State, user_deposit: Deposit, oracle: PriceOracle, miner: str
) -> tuple[Balance, Layer]:
    """Front-run-and-include the user deposit unless it is price-neutral.

    A deposit whose value ratio equals the token price ratio contributes
    nothing to the miner's gain and is dropped for minimality.  Otherwise
    the miner swap that aligns the reserve ratio with the deposit ratio is
    prepended when needed.
    """
    v0, v1 = user_deposit.v0, user_deposit.v1
    p0 = oracle.price(user_deposit.t0)
    p1 = oracle.price(user_deposit.t1)
    if close(v0 * p0, v1 * p1, rel=EPS_RATIO):
        return Balance(), Layer("deposit_inner", (), user_tx=user_deposit)

    amm = state.amm(MintedPair(user_deposit.t0, user_deposit.t1))
    if amm is None:
        raise PairMissing(
            f"no AMM for pair ({user_deposit.t0},{user_deposit.t1})", user_deposit
        )
    a = _aligned_reserves(amm, user_deposit.t0, user_deposit.t1)
    if close(a[1] * v0, a[0] * v1, rel=EPS_RATIO):
        # Reserve ratio already matches the deposit; no front-run needed.
        return Balance(), Layer("deposit_inner", (user_deposit,), user_tx=user_deposit)

    target = deposit_front_run_reserves(state, user_deposit)
    tokens = (user_deposit.t0, user_deposit.t1)
    for d_m in (0, 1):
        deposited = target[d_m] - a[d_m]
        received = a[1 - d_m] - target[1 - d_m]
        if deposited > 0 and received > 0:
            front = _miner_swap_for(amm, tokens, d_m, deposited, miner)
            balance = Balance({front.token_in(): front.value_in()})
            return balance, Layer(
                "deposit_inner", (front, user_deposit), user_tx=user_deposit
            )
    raise Infeasible(
        f"no front-run direction moves reserves {a} to {target}", user_deposit
    )


def redeem_inner_layer(user_redeem: Redeem) -> tuple[Balance, Layer]:
    """Redeems always increase their issuer's gain in a solution: drop them."""
    return Balance(), Layer("redeem_dropped", (), user_tx=user_redeem)


def _apply_layer(state: State, txs: Sequence[Transaction], miner: str) -> State:
    for tx in txs:
        try:
            state = step(state, tx)
        except InsufficientBalance as err:
            if tx.user != miner:
                raise UnfundedUser(
                    f"user {tx.user!r} cannot afford {tx} even after front-running"
                ) from err
            raise
    return state


def _inner_layer(
    state: State, tx: Transaction, oracle: PriceOracle, miner: str, eps: float
) -> tuple[Balance, Layer]:
    if isinstance(tx, Swap):
        return swap_inner_layer(state, tx, oracle, miner, eps=eps)
    if isinstance(tx, Deposit):
        return deposit_inner_layer(state, tx, oracle, miner)
    if isinstance(tx, Redeem):
        return redeem_inner_layer(tx)
    raise TypeError(f"not a transaction: {tx!r}")


def solve(game: GameInput, eps: float = EPS_NUM) -> DagwoodSolution:
    """Construct the optimal sandwich for the given game.

    Txpool transactions are processed in their given order, each inner
    layer being built against the state left by the previous one; the final
    price-minimization layer is appended last.  The result is independent
    of the processing order.
    """
    miner = game.miner_id
    working = game.state.with_wallet(miner, Balance())
    layers: list[Layer] = []
    balances: list[Balance] = []

    for tx in game.txpool:
        balance, layer = _inner_layer(working, tx, game.oracle, miner, eps)
        layers.append(layer)
        balances.append(balance)
        if layer.txs:
            working = working.with_wallet(miner, working.balance(miner).plus(balance))
            working = _apply_layer(working, layer.txs, miner)

    final_balance, final_layers = final_layer(working, game.oracle, miner)
    layers.extend(final_layers)
    balances.append(final_balance)

    return _assemble(game, layers, balances)


def _assemble(
    game: GameInput, layers: Sequence[Layer], balances: Sequence[Balance]
) -> DagwoodSolution:
    """Replay the flattened sandwich and derive balances, gain and trace."""
    miner = game.miner_id
    txs = tuple(tx for layer in layers for tx in layer.txs)
    naive = Balance()
    for balance in balances:
        naive = naive.plus(balance)

    # Summing per-layer deposits is not float-associative with spending them
    # one by one; bump a token by ulps when the replay falls short of it.
    trace: list[State] | None = None
    for attempt in range(10):
        start = game.state.with_wallet(miner, naive)
        candidate: list[State] = [start]
        current = start
        try:
            for tx in txs:
                current = step(current, tx)
                candidate.append(current)
        except InsufficientBalance as err:
            if tx.user != miner:
                raise UnfundedUser(
                    f"user {tx.user!r} cannot afford {tx} even after front-running"
                ) from err
            token = tx.token_in()
            bump = naive.get(token) * 1e-15 * 4.0**attempt
            naive = naive.add(token, bump)
            continue
        trace = candidate
        break
    if trace is None:
        raise Infeasible("sandwich replay kept failing on the miner's own balance")

    minimal = _minimal_balance(trace, txs, miner, naive)
    predicted = pricing_gain(start, miner, txs, game.oracle)
    return DagwoodSolution(
        layers=tuple(layers),
        txs=txs,
        miner_balance_naive=naive,
        miner_balance_minimal=minimal,
        predicted_gain=predicted,
        trace=tuple(trace),
    )


def _minimal_balance(
    trace: Sequence[State], txs: Sequence[Transaction], miner: str, naive: Balance
) -> Balance:
    """Per-token maximum running deficit of the miner along the trace.

    Padded by a hair so a replay funded with it cannot fail on rounding,
    and capped at the naive balance which is known to replay.
    """
    position: dict = {}
    deficit: dict = {}
    for i, tx in enumerate(txs):
        if tx.user != miner:
            continue
        before = trace[i].balance(miner)
        after = trace[i + 1].balance(miner)
        for token in set(before.tokens()) | set(after.tokens()):
            diff = after.get(token) - before.get(token)
            if diff == 0.0:
                continue
            position[token] = position.get(token, 0.0) + diff
            deficit[token] = max(deficit.get(token, 0.0), -position[token])
    amounts = {}
    for token, worst in deficit.items():
        if worst <= 0.0:
            continue
        padded = worst * (1.0 + 1e-12) + 1e-12
        amounts[token] = min(padded, naive.get(token)) if naive.get(token) else padded
    return Balance(amounts)


def classic_sandwich(
    game: GameInput,
    grid_points: int = 200,
    refinement_rounds: int = 4,
    eps: float = EPS_NUM,
) -> DagwoodSolution:
    """Baseline same-direction sandwich around a single user swap.

    Sweeps the miner's front-run amount (same direction as the user swap)
    over a refined grid, back-running with the price-minimization swap, and
    keeps the best-gaining bundle.  Raises :class:`NoFeasibleBundle` when no
    front-run amount enables the user swap.
    """
    if len(game.txpool) != 1 or not isinstance(game.txpool[0], Swap):
        raise ValueError("classic_sandwich expects a txpool with exactly one swap")
    user_swap = game.txpool[0]
    miner = game.miner_id
    pair = MintedPair(user_swap.t0, user_swap.t1)
    amm = game.state.amm(pair)
    if amm is None:
        raise PairMissing(f"no AMM for pair {pair}", user_swap)

    tokens = (user_swap.t0, user_swap.t1)
    d_a = user_swap.d
    bound = 3.0 * max(amm.r0, amm.r1)
    p0, p1 = game.oracle.price(tokens[0]), game.oracle.price(tokens[1])
    # Headroom for the back-run, whose size grows with the price imbalance.
    headroom = bound + math.sqrt(max(p0 / p1, p1 / p0) * amm.r0 * amm.r1)
    funded = game.state.with_wallet(
        miner, Balance({tokens[0]: headroom, tokens[1]: headroom})
    )

    def evaluate(z: float):
        state = funded
        txs: list[Transaction] = []
        if z > DEAD_BAND:
            front = _miner_swap_for(state.amm(pair), tokens, d_a, z, miner)
            state = step(state, front)
            txs.append(front)
        try:
            state = step(state, user_swap)
        except StepError:
            return None
        txs.append(user_swap)
        back = price_minimization_tx(state, pair, game.oracle, miner)
        if back is not None:
            state = step(state, back)
            txs.append(back)
        value = pricing_gain(funded, miner, txs, game.oracle)
        return value, txs

    best = None
    lo, hi = 0.0, bound
    for _ in range(refinement_rounds):
        width = (hi - lo) / grid_points
        for i in range(grid_points + 1):
            z = lo + i * width
            result = evaluate(z)
            if result is None:
                continue
            if best is None or result[0] > best[0]:
                best = (result[0], result[1], z)
        if best is None:
            break
        center = best[2]
        window = (hi - lo) / 10.0
        lo = max(0.0, center - window / 2.0)
        hi = min(bound, center + window / 2.0)

    if best is None:
        raise NoFeasibleBundle(
            "no same-direction front-run amount enables the user swap"
        )

    _, txs, _ = best
    layers: list[Layer] = []
    balances: list[Balance] = []
    # txs is [front?, user swap, back-run?].
    has_front = txs[0].user == miner
    inner_txs = (txs[0], user_swap) if has_front else (user_swap,)
    layers.append(Layer("swap_inner", tuple(inner_txs), user_tx=user_swap))
    balances.append(
        Balance({txs[0].token_in(): txs[0].value_in()}) if has_front else Balance()
    )
    back = txs[-1] if txs[-1].user == miner else None
    if back is not None:
        layers.append(Layer("final_swap", (back,), pair=pair))
        balances.append(Balance({back.token_in(): back.value_in()}))
    else:
        layers.append(Layer("final_swap", (), pair=pair))
        balances.append(Balance())
    return _assemble(game, layers, balances)
