"""Transition-rule semantics: rule outcomes, rejections, and folds."""

import pytest

from dagwood import (
    Amm,
    Balance,
    Deposit,
    InsufficientBalance,
    MintedPair,
    MintedTokenInDeposit,
    NonPositiveAmount,
    PairAlreadyExists,
    PairMissing,
    RatioMismatch,
    Redeem,
    ReserveDrained,
    SameToken,
    SlippageExceeded,
    State,
    Swap,
    TokenId,
    apply_sequence,
    deposit,
    redeem,
    states_close,
    step,
    supply,
    swap,
)

T0 = TokenId("T0")
T1 = TokenId("T1")
T2 = TokenId("T2")
PAIR = MintedPair(T0, T1)


def pool_state(r0=100.0, r1=100.0, lp=100.0, wallets=None):
    base = {"L": {PAIR: lp}}
    base.update(wallets or {})
    return State.make(base, [Amm(PAIR, r0, r1)])


class TestTokens:
    def test_pair_identity_is_unordered(self):
        assert MintedPair(T0, T1) == MintedPair(T1, T0)
        assert hash(MintedPair(T0, T1)) == hash(MintedPair(T1, T0))

    def test_pair_display_keeps_creation_order(self):
        assert str(MintedPair(T1, T0)) == "(T1,T0)"

    def test_pair_rejects_equal_tokens(self):
        with pytest.raises(ValueError):
            MintedPair(T0, T0)

    def test_empty_symbol_rejected(self):
        with pytest.raises(ValueError):
            TokenId("")

    def test_duplicate_pair_in_state(self):
        with pytest.raises(PairAlreadyExists):
            State.make({}, [Amm(PAIR, 1.0, 1.0), Amm(MintedPair(T1, T0), 2.0, 2.0)])


class TestDeposit:
    def test_pair_creation_mints_first_amount(self):
        state = State.make({"A": {T0: 70.0, T1: 70.0}}, [])
        after = deposit(state, Deposit("A", 70.0, T0, 70.0, T1))
        amm = after.amm(PAIR)
        assert (amm.r0, amm.r1) == (70.0, 70.0)
        assert after.balance("A").get(PAIR) == 70.0
        assert after.balance("A").get(T0) == 0.0
        assert supply(after, PAIR) == 70.0

    def test_ratio_mismatch_rejected(self):
        state = pool_state(wallets={"A": {T0: 30.0, T1: 40.0}})
        with pytest.raises(RatioMismatch):
            deposit(state, Deposit("A", 30.0, T0, 40.0, T1))

    def test_existing_pair_mints_proportionally(self):
        # v = v0 / r0 * supply evaluated directly: 30 / 86.6 * 100
        r0 = 86.6
        r1 = 86.6 * 40.0 / 30.0
        state = State.make(
            {"A": {T0: 30.0, T1: 40.0}, "L": {PAIR: 100.0}}, [Amm(PAIR, r0, r1)]
        )
        after = deposit(state, Deposit("A", 30.0, T0, 40.0, T1))
        assert after.balance("A").get(PAIR) == pytest.approx(34.64203233256351, rel=1e-12)
        amm = after.amm(PAIR)
        assert amm.r0 == pytest.approx(116.6)
        assert amm.r1 == pytest.approx(r1 + 40.0)

    def test_reversed_token_order_hits_same_pool(self):
        state = pool_state(wallets={"A": {T0: 10.0, T1: 10.0}})
        after = deposit(state, Deposit("A", 10.0, T1, 10.0, T0))
        amm = after.amm(PAIR)
        assert (amm.r0, amm.r1) == (110.0, 110.0)
        assert after.balance("A").get(PAIR) == pytest.approx(10.0)

    def test_minted_token_not_depositable(self):
        state = pool_state(wallets={"A": {PAIR: 5.0, T0: 5.0}})
        with pytest.raises(MintedTokenInDeposit):
            deposit(state, Deposit("A", 5.0, PAIR, 5.0, T0))

    def test_same_token_rejected(self):
        state = pool_state(wallets={"A": {T0: 10.0}})
        with pytest.raises(SameToken):
            deposit(state, Deposit("A", 5.0, T0, 5.0, T0))

    def test_nonpositive_amount_rejected(self):
        state = pool_state(wallets={"A": {T0: 10.0, T1: 10.0}})
        with pytest.raises(NonPositiveAmount):
            deposit(state, Deposit("A", 0.0, T0, 10.0, T1))

    def test_unfunded_rejected(self):
        state = pool_state(wallets={"A": {T0: 1.0, T1: 1.0}})
        with pytest.raises(InsufficientBalance):
            deposit(state, Deposit("A", 2.0, T0, 2.0, T1))


class TestSwap:
    def test_slippage_guard(self):
        # 40:T0 into (100, 100) pays exactly 28.571..., below the 35 minimum.
        state = pool_state(wallets={"A": {T0: 40.0}})
        with pytest.raises(SlippageExceeded):
            swap(state, Swap("A", 0, 40.0, T0, 35.0, T1))

    def test_enabled_swap_pays_actual_output(self):
        # Constant-product algebra: (100+20) * (100-v) = 10000 => v = 16.66...
        state = pool_state(wallets={"A": {T0: 20.0}})
        after = swap(state, Swap("A", 0, 20.0, T0, 15.0, T1))
        assert after.balance("A").get(T1) == pytest.approx(16.666666666666668, rel=1e-12)
        amm = after.amm(PAIR)
        assert amm.r0 == pytest.approx(120.0)
        assert amm.r1 == pytest.approx(83.33333333333333, rel=1e-12)
        assert amm.r0 * amm.r1 == pytest.approx(10_000.0, rel=1e-9)

    def test_front_run_reserves_pay_the_minimum(self):
        state = State.make(
            {"A": {T0: 40.0}, "L": {PAIR: 100.0}},
            [Amm(PAIR, 88.75923606099589, 112.6643315533714)],
        )
        after = swap(state, Swap("A", 0, 40.0, T0, 35.0, T1))
        assert after.balance("A").get(T1) == pytest.approx(35.0, rel=1e-9)
        amm = after.amm(PAIR)
        assert amm.r0 == pytest.approx(128.8, abs=0.1)
        assert amm.r1 == pytest.approx(77.7, abs=0.1)

    def test_direction_one_deposits_second_token(self):
        state = pool_state(wallets={"A": {T1: 25.0}})
        after = swap(state, Swap("A", 1, 15.0, T0, 25.0, T1))
        assert after.balance("A").get(T0) == pytest.approx(20.0)
        amm = after.amm(PAIR)
        assert (amm.r0, amm.r1) == (80.0, 125.0)

    def test_missing_pair(self):
        state = State.make({"A": {T0: 10.0}}, [])
        with pytest.raises(PairMissing):
            swap(state, Swap("A", 0, 10.0, T0, 1.0, T1))

    def test_unfunded(self):
        state = pool_state(wallets={"A": {T0: 1.0}})
        with pytest.raises(InsufficientBalance):
            swap(state, Swap("A", 0, 10.0, T0, 1.0, T1))

    def test_zero_minimum_rejected(self):
        state = pool_state(wallets={"A": {T0: 10.0}})
        with pytest.raises(NonPositiveAmount):
            swap(state, Swap("A", 0, 10.0, T0, 0.0, T1))


class TestRedeem:
    def test_proportional_redemption(self):
        state = pool_state(wallets={"A": {PAIR: 10.0}}, lp=90.0)
        after = redeem(state, Redeem("A", 10.0, PAIR))
        assert after.balance("A").get(T0) == pytest.approx(10.0)
        assert after.balance("A").get(T1) == pytest.approx(10.0)
        amm = after.amm(PAIR)
        assert (amm.r0, amm.r1) == (90.0, 90.0)

    def test_uneven_reserves(self):
        # v_i = v * r_i / supply: 30 * 40 / 70
        state = State.make(
            {"A": {PAIR: 30.0}, "L": {PAIR: 40.0}}, [Amm(PAIR, 40.0, 40.0)]
        )
        after = redeem(state, Redeem("A", 30.0, PAIR))
        assert after.balance("A").get(T0) == pytest.approx(17.142857142857142, rel=1e-12)
        assert after.balance("A").get(T1) == pytest.approx(17.142857142857142, rel=1e-12)

    def test_overdrawn_redeem(self):
        state = pool_state(wallets={"A": {PAIR: 5.0}})
        with pytest.raises(InsufficientBalance):
            redeem(state, Redeem("A", 10.0, PAIR))

    def test_redeeming_everything_drains(self):
        state = State.make({"A": {PAIR: 70.0}}, [Amm(PAIR, 70.0, 70.0)])
        with pytest.raises(ReserveDrained):
            redeem(state, Redeem("A", 70.0, PAIR))


class TestSupply:
    def test_atomic_counts_wallets_and_reserves(self):
        state = pool_state(wallets={"A": {T0: 40.0}})
        assert supply(state, T0) == pytest.approx(140.0)

    def test_absent_token_is_zero(self):
        state = pool_state()
        assert supply(state, MintedPair(T0, T2)) == 0.0
        assert supply(state, T2) == 0.0

    def test_creation_supply_equals_first_deposit(self):
        state = State.make({"A": {T0: 70.0, T1: 70.0}}, [])
        after = deposit(state, Deposit("A", 70.0, T0, 70.0, T1))
        assert supply(after, PAIR) == 70.0


class TestApplySequence:
    def test_empty_fold(self):
        state = pool_state()
        after, records = apply_sequence(state, [])
        assert after == state
        assert records == []

    def test_strict_mode_raises(self):
        state = pool_state(wallets={"A": {T0: 40.0}})
        bad = Swap("A", 0, 40.0, T0, 35.0, T1)
        with pytest.raises(SlippageExceeded):
            apply_sequence(state, [bad])

    def test_audit_mode_freezes_state_and_continues(self):
        state = pool_state(wallets={"A": {T0: 60.0}})
        txs = [
            Swap("A", 0, 40.0, T0, 35.0, T1),  # rejected
            Swap("A", 0, 20.0, T0, 15.0, T1),  # applies against the frozen state
        ]
        after, records = apply_sequence(state, txs, strict=False)
        assert records[0].error is not None
        assert records[0].state == state
        assert records[1].error is None
        assert after.amm(PAIR).r0 == pytest.approx(120.0)

    def test_fig2_three_transaction_sandwich(self):
        state = State.make(
            {"A": {T0: 40.0}, "L": {PAIR: 100.0}, "M": {T1: 35.0}},
            [Amm(PAIR, 100.0, 100.0)],
        )
        txs = [
            Swap("M", 1, 11.240763939004108, T0, 12.664331553371397, T1),
            Swap("A", 0, 40.0, T0, 35.0, T1),
            Swap("M", 1, 28.759236060995878, T0, 22.33566844662859, T1),
        ]
        after, _ = apply_sequence(state, txs)
        amm = after.amm(PAIR)
        assert amm.r0 == pytest.approx(100.0, rel=1e-9)
        assert amm.r1 == pytest.approx(100.0, rel=1e-9)
        miner = after.balance("M")
        assert miner.get(T0) == pytest.approx(40.0, rel=1e-9)
        assert miner.get(T1) == pytest.approx(0.0, abs=1e-9)

    def test_fig3_five_transaction_sandwich(self):
        state = State.make(
            {
                "A": {T0: 70.0, T1: 40.0, PAIR: 10.0},
                "L": {PAIR: 90.0},
                "M": {T0: 18.1, T1: 50.5},
            },
            [Amm(PAIR, 100.0, 100.0)],
        )
        txs = [
            Swap("M", 1, 11.240763939004108, T0, 12.664331553371397, T1),
            Swap("A", 0, 40.0, T0, 35.0, T1),
            Swap("M", 1, 42.15669568255201, T0, 37.80572228455374, T1),
            Deposit("A", 30.0, T0, 40.0, T1),
            Swap("M", 0, 18.038475772933666, T0, 20.82903768654759, T1),
        ]
        after, _ = apply_sequence(state, txs)
        amm = after.amm(PAIR)
        assert amm.r0 == pytest.approx(134.6, abs=0.1)
        assert amm.r1 == pytest.approx(134.6, abs=0.1)
        miner = after.balance("M")
        assert miner.get(T0) == pytest.approx(53.4, abs=0.2)
        assert miner.get(T1) == pytest.approx(20.8, abs=0.2)


class TestStateComparison:
    def test_close_states(self):
        a = pool_state(wallets={"A": {T0: 1.0}})
        b = State.make(
            {"A": {T0: 1.0 + 1e-13, T1: 0.0}, "L": {PAIR: 100.0}},
            [Amm(PAIR, 100.0, 100.0 + 1e-8)],
        )
        assert states_close(a, b)

    def test_distinct_reserves_differ(self):
        assert not states_close(pool_state(r0=100.0), pool_state(r0=101.0))

    def test_determinism_is_exact(self):
        state = pool_state(wallets={"A": {T0: 20.0}})
        tx = Swap("A", 0, 20.0, T0, 15.0, T1)
        assert step(state, tx) == step(state, tx)
