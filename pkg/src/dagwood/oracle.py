"""Brute-force verification of solver optimality on small instances.

The search enumerates every subset and ordering of the txpool, interleaved
with one parametric miner swap per AMM per slot (a slot sits before each
user transaction and after the last one).  Swap amounts are swept over a
signed grid that is re-centered and shrunk each refinement round, plus a
few root-found special amounts that exactly enable the next user
transaction (deposits are only enabled on a measure-zero ratio manifold, so
a plain grid would never include them).

Every candidate is replayed through the engine and scored with the pricing
module; candidates whose user transactions are rejected are discarded, and
the empty move (gain 0) is always available.  The search never evaluates
the solver's closed forms.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Sequence

from scipy.optimize import brentq

from .engine import (
    DEAD_BAND,
    Amm,
    Balance,
    Deposit,
    MintedPair,
    Redeem,
    State,
    Swap,
    TokenId,
    Transaction,
    step,
    swap_output,
)
from .errors import InstanceTooLarge, StepError
from .pricing import PriceOracle, net_worth
from .solver import DagwoodSolution, GameInput, solve

#: Hard caps defining a "small instance" the oracle accepts.
MAX_AMMS = 2
MAX_POOL = 3


@dataclass(frozen=True)
class SearchConfig:
    """Knobs of the discretized search; defaults match desk-scale instances."""

    grid_points_per_dimension: int = 200
    max_miner_swaps: int = 2
    amount_upper_bound: float = 3.0
    refinement_rounds: int = 3

    def __post_init__(self):
        if self.grid_points_per_dimension <= 0 or self.refinement_rounds <= 0:
            raise ValueError("search dimensions must be positive")
        if self.max_miner_swaps <= 0 or self.amount_upper_bound <= 0:
            raise ValueError("search bounds must be positive")


@dataclass(frozen=True)
class OracleReport:
    """Outcome of a verification run.

    ``relative_gap`` is ``(best_gain - solver_gain) / max(1, |best_gain|)``:
    positive values mean the search found a better move than the solver.
    """

    best_gain: float
    best_sequence: tuple[Transaction, ...]
    solver_gain: float
    relative_gap: float
    evaluations: int
    round_bests: tuple[float, ...] = ()
    seed: int | None = None


def _relative_gap(best_gain: float, solver_gain: float) -> float:
    return (best_gain - solver_gain) / max(1.0, abs(best_gain))


class _Search:
    """One grid search over a game; mutable only through ``run``."""

    def __init__(self, game: GameInput, cfg: SearchConfig):
        self.game = game
        self.cfg = cfg
        self.miner = game.miner_id
        self.amms = sorted(game.state.amms.values(), key=lambda a: a.pair.key())
        # One parametric swap per AMM per slot; consecutive swaps on the same
        # pair compose into one, so this loses no generality up to the cap.
        self.slot_amms = self.amms[: cfg.max_miner_swaps]
        self.evaluations = 0
        self.start = game.state.with_wallet(self.miner, self._funding())
        self.start_worth = net_worth(self.start, self.miner, game.oracle).total

    def _funding(self) -> Balance:
        """A miner balance large enough for any candidate; excess is inert."""
        slots = len(self.game.txpool) + 1
        amounts: dict = {}
        for amm in self.amms:
            p0 = self.game.oracle.price(amm.pair.t0)
            p1 = self.game.oracle.price(amm.pair.t1)
            headroom = (
                self.cfg.amount_upper_bound * max(amm.r0, amm.r1)
                + (max(p0 / p1, p1 / p0) * amm.r0 * amm.r1) ** 0.5
            ) * slots + 1.0
            for token in (amm.pair.t0, amm.pair.t1):
                amounts[token] = amounts.get(token, 0.0) + headroom
        for tx in self.game.txpool:
            if isinstance(tx, Swap):
                amounts[tx.token_in()] = amounts.get(tx.token_in(), 0.0) + tx.value_in()
            elif isinstance(tx, Deposit):
                amounts[tx.t0] = amounts.get(tx.t0, 0.0) + tx.v0
                amounts[tx.t1] = amounts.get(tx.t1, 0.0) + tx.v1
        return Balance(amounts)

    def _bounds(self, amm: Amm) -> tuple[float, float]:
        """Signed amount range for one coordinate: negative deposits t1."""
        return (
            -self.cfg.amount_upper_bound * amm.r1,
            self.cfg.amount_upper_bound * amm.r0,
        )

    def _miner_swap(self, state: State, amm: Amm, z: float) -> Swap | None:
        """Signed amount to a tight swap on ``amm``: z > 0 deposits t0."""
        if abs(z) <= DEAD_BAND:
            return None
        live = state.amm(amm.pair)
        d = 0 if z > 0 else 1
        deposited = abs(z)
        reserves = (live.reserve(amm.pair.t0), live.reserve(amm.pair.t1))
        out = swap_output(reserves[d], reserves[1 - d], deposited)
        values = [0.0, 0.0]
        values[d] = deposited
        values[1 - d] = out
        return Swap(self.miner, d, values[0], amm.pair.t0, values[1], amm.pair.t1)

    def _replay(self, ordering: Sequence[Transaction], coords: Sequence[float]):
        """Score one candidate; ``None`` if any user transaction is rejected."""
        self.evaluations += 1
        state = self.start
        txs: list[Transaction] = []
        pos = 0
        try:
            for slot in range(len(ordering) + 1):
                for amm in self.slot_amms:
                    tx = self._miner_swap(state, amm, coords[pos])
                    pos += 1
                    if tx is not None:
                        state = step(state, tx)
                        txs.append(tx)
                if slot < len(ordering):
                    state = step(state, ordering[slot])
                    txs.append(ordering[slot])
        except StepError:
            return None
        value = net_worth(state, self.miner, self.game.oracle).total - self.start_worth
        return value, tuple(txs)

    def _state_before(
        self, ordering: Sequence[Transaction], coords: Sequence[float], upto: int
    ) -> State | None:
        """State right before coordinate ``upto`` is applied."""
        state = self.start
        pos = 0
        try:
            for slot in range(len(ordering) + 1):
                for amm in self.slot_amms:
                    if pos == upto:
                        return state
                    tx = self._miner_swap(state, amm, coords[pos])
                    pos += 1
                    if tx is not None:
                        state = step(state, tx)
                if slot < len(ordering):
                    state = step(state, ordering[slot])
        except StepError:
            return None
        return state

    def _special_points(
        self,
        ordering: Sequence[Transaction],
        coords: Sequence[float],
        index: int,
        amm: Amm,
        lo: float,
        hi: float,
    ) -> list[float]:
        """Amounts that exactly enable the next user transaction, if any.

        Found by sign-bracketed root finding on engine replays, so the
        search stays independent of the solver's closed forms.
        """
        slot = index // len(self.slot_amms)
        if slot >= len(ordering):
            return []
        user_tx = ordering[slot]
        if isinstance(user_tx, Redeem):
            return []
        if MintedPair(user_tx.t0, user_tx.t1) != amm.pair:
            return []
        state = self._state_before(ordering, coords, index)
        if state is None:
            return []

        def margin(z: float) -> float:
            probe = state
            tx = self._miner_swap(probe, amm, z)
            if tx is not None:
                try:
                    probe = step(probe, tx)
                except StepError:
                    return float("nan")
            live = probe.amm(amm.pair)
            if isinstance(user_tx, Swap):
                r_in = live.reserve(user_tx.token_in())
                r_out = live.reserve(user_tx.token_out())
                out = swap_output(r_in, r_out, user_tx.value_in())
                return out - user_tx.value_out_min()
            a0 = live.reserve(user_tx.t0)
            a1 = live.reserve(user_tx.t1)
            return a1 * user_tx.v0 - a0 * user_tx.v1

        a, b = lo * (1 - 1e-12), hi * (1 - 1e-12)
        fa, fb = margin(a), margin(b)
        if not (fa == fa and fb == fb) or fa * fb > 0:
            return []
        try:
            root = brentq(margin, a, b, xtol=1e-13, rtol=1e-15)
        except ValueError:
            return []
        wiggle = max(abs(root) * 1e-11, 1e-11)
        return [root - wiggle, root, root + wiggle]

    def run(self) -> tuple[float, tuple[Transaction, ...], tuple[float, ...]]:
        best_gain = 0.0
        best_txs: tuple[Transaction, ...] = ()
        round_bests: list[float] = []
        pool = list(self.game.txpool)
        orderings: list[tuple[Transaction, ...]] = []
        for size in range(len(pool) + 1):
            for combo in itertools.combinations(range(len(pool)), size):
                for perm in itertools.permutations(combo):
                    orderings.append(tuple(pool[i] for i in perm))

        for ordering in orderings:
            n_coords = (len(ordering) + 1) * len(self.slot_amms)
            coords = [0.0] * n_coords
            incumbent = self._replay(ordering, coords)
            value = incumbent[0] if incumbent else None

            for round_idx in range(self.cfg.refinement_rounds):
                for index in range(n_coords):
                    amm = self.slot_amms[index % len(self.slot_amms)]
                    full_lo, full_hi = self._bounds(amm)
                    width = (full_hi - full_lo) / 10.0**round_idx
                    center = coords[index]
                    lo = max(full_lo, center - width / 2.0)
                    hi = min(full_hi, center + width / 2.0)
                    candidates = {0.0}
                    steps = self.cfg.grid_points_per_dimension
                    for i in range(steps + 1):
                        candidates.add(lo + (hi - lo) * i / steps)
                    candidates.update(
                        self._special_points(ordering, coords, index, amm, full_lo, full_hi)
                    )
                    for z in sorted(candidates):
                        trial = list(coords)
                        trial[index] = z
                        result = self._replay(ordering, trial)
                        if result is None:
                            continue
                        if value is None or result[0] > value:
                            value = result[0]
                            coords = trial
                if value is not None and value > best_gain:
                    final = self._replay(ordering, coords)
                    best_gain, best_txs = final[0], final[1]
                round_bests.append(best_gain)
        return best_gain, best_txs, tuple(round_bests)


def _check_size(game: GameInput) -> None:
    if len(game.state.amms) > MAX_AMMS or len(game.txpool) > MAX_POOL:
        raise InstanceTooLarge(
            f"oracle accepts at most {MAX_AMMS} AMMs and {MAX_POOL} pool entries"
        )


def grid_search_mev(
    game: GameInput, cfg: SearchConfig = SearchConfig(), seed: int | None = None
) -> OracleReport:
    """Search for the best move and compare it against the solver's gain."""
    _check_size(game)
    solver_gain = solve(game).predicted_gain
    search = _Search(game, cfg)
    best_gain, best_txs, round_bests = search.run()
    return OracleReport(
        best_gain=best_gain,
        best_sequence=best_txs,
        solver_gain=solver_gain,
        relative_gap=_relative_gap(best_gain, solver_gain),
        evaluations=search.evaluations,
        round_bests=round_bests,
        seed=seed,
    )


def _replay_gain(game: GameInput, sol: DagwoodSolution) -> float:
    """Gain of a given solution when replayed from scratch; 0 if disabled."""
    start = game.state.with_wallet(game.miner_id, sol.miner_balance_naive)
    worth = net_worth(start, game.miner_id, game.oracle).total
    state = start
    try:
        for tx in sol.txs:
            state = step(state, tx)
    except StepError:
        return 0.0
    return net_worth(state, game.miner_id, game.oracle).total - worth


def verify_solution(
    game: GameInput,
    sol: DagwoodSolution,
    cfg: SearchConfig = SearchConfig(),
    seed: int | None = None,
) -> OracleReport:
    """Grid search plus a local perturbation probe around the solution.

    Each miner swap amount in ``sol`` is perturbed over a small grid
    (relative steps of 1e-3); an improving perturbation or grid candidate
    shows up as a positive ``relative_gap``.
    """
    _check_size(game)
    solver_gain = _replay_gain(game, sol)
    search = _Search(game, cfg)
    best_gain, best_txs, round_bests = search.run()

    miner_indices = [i for i, tx in enumerate(sol.txs) if tx.user == game.miner_id]
    for index in miner_indices:
        for k in (-3, -2, -1, 1, 2, 3):
            result = _perturbed_gain(game, sol, index, 1.0 + k * 1e-3)
            search.evaluations += 1
            if result is not None and result[0] > best_gain:
                best_gain, best_txs = result

    return OracleReport(
        best_gain=best_gain,
        best_sequence=best_txs,
        solver_gain=solver_gain,
        relative_gap=_relative_gap(best_gain, solver_gain),
        evaluations=search.evaluations,
        round_bests=round_bests,
        seed=seed,
    )


def _perturbed_gain(game: GameInput, sol: DagwoodSolution, index: int, factor: float):
    """Replay ``sol`` with one miner deposit scaled by ``factor``.

    Miner minimums are re-derived from the perturbed states (they are the
    miner's own choice); user transactions must stay enabled as written.
    """
    miner = game.miner_id
    padded = Balance({t: v * 2 + 1 for t, v in sol.miner_balance_naive.amounts.items()})
    start = game.state.with_wallet(miner, padded)
    worth = net_worth(start, miner, game.oracle).total
    state = start
    txs: list[Transaction] = []
    try:
        for i, tx in enumerate(sol.txs):
            if tx.user == miner and isinstance(tx, Swap):
                deposited = tx.value_in() * (factor if i == index else 1.0)
                live = state.amm(MintedPair(tx.t0, tx.t1))
                r_in = live.reserve(tx.token_in())
                r_out = live.reserve(tx.token_out())
                out = swap_output(r_in, r_out, deposited)
                values = [0.0, 0.0]
                values[tx.d] = deposited
                values[1 - tx.d] = out
                tx = Swap(miner, tx.d, values[0], tx.t0, values[1], tx.t1)
            state = step(state, tx)
            txs.append(tx)
    except StepError:
        return None
    return net_worth(state, miner, game.oracle).total - worth, tuple(txs)


def random_game(seed: int, max_user_txs: int = 2) -> GameInput:
    """Deterministic small game: one AMM, a couple of user transactions.

    Reserves are drawn from [50, 500], prices from [1, 2000]; users are
    funded generously enough to enable their transactions in any order.
    """
    rng = random.Random(seed)
    t0, t1 = TokenId("T0"), TokenId("T1")
    pair = MintedPair(t0, t1)
    oracle = PriceOracle({t0: rng.uniform(1.0, 2000.0), t1: rng.uniform(1.0, 2000.0)})
    r0, r1 = rng.uniform(50.0, 500.0), rng.uniform(50.0, 500.0)

    txs: list[Transaction] = []
    need = {t0: 0.0, t1: 0.0}
    lp_held = 0.0
    for _ in range(rng.randint(1, max_user_txs)):
        kind = rng.choice(["swap", "swap", "dep", "rdm"])
        if kind == "swap":
            d = rng.choice([0, 1])
            r_in, r_out = (r0, r1) if d == 0 else (r1, r0)
            v_in = rng.uniform(0.05, 0.4) * r_in
            v_min = swap_output(r_in, r_out, v_in) * rng.uniform(0.7, 1.3)
            values = [0.0, 0.0]
            values[d] = v_in
            values[1 - d] = v_min
            txs.append(Swap("A", d, values[0], t0, values[1], t1))
            need[t0 if d == 0 else t1] += v_in
        elif kind == "dep":
            v0 = rng.uniform(0.05, 0.3) * r0
            v1 = v0 * r1 / r0 * rng.uniform(0.8, 1.25)
            txs.append(Deposit("A", v0, t0, v1, t1))
            need[t0] += v0
            need[t1] += v1
        else:
            v = rng.uniform(5.0, 40.0)
            txs.append(Redeem("A", v, pair))
            lp_held += v

    wallets = {
        "A": {t0: 2.0 * need[t0] + 1.0, t1: 2.0 * need[t1] + 1.0, pair: lp_held},
        "L": {pair: 100.0},
    }
    if lp_held == 0.0:
        del wallets["A"][pair]
    state = State.make(wallets, [Amm(pair, r0, r1)])
    return GameInput(state=state, txpool=tuple(txs), oracle=oracle, miner_id="M")
