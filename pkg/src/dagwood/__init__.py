"""Constant-product AMM semantics and optimal MEV sandwich construction."""

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
    TokenId,
    Transaction,
    apply_sequence,
    deposit,
    redeem,
    states_close,
    step,
    supply,
    swap,
    swap_output,
)
from .errors import (
    AmmError,
    Infeasible,
    InstanceTooLarge,
    InsufficientBalance,
    MintedTokenInDeposit,
    NoFeasibleBundle,
    NonPositiveAmount,
    NonPositiveRatio,
    PairAlreadyExists,
    PairMissing,
    ParseError,
    RatioMismatch,
    ReserveDrained,
    SameToken,
    SlippageExceeded,
    StepError,
    UnfundedUser,
    UnknownUser,
    ValidationError,
    ZeroSupply,
)
from .oracle import (
    OracleReport,
    SearchConfig,
    grid_search_mev,
    random_game,
    verify_solution,
)
from .pricing import (
    GainReport,
    PriceOracle,
    WealthBreakdown,
    gain,
    gain_report,
    min_minted_price,
    minted_price,
    net_worth,
    projected_minted_price,
    total_wealth,
)
from .solver import (
    DagwoodSolution,
    GameInput,
    Layer,
    canonical_swap_values,
    classic_sandwich,
    deposit_front_run_reserves,
    deposit_inner_layer,
    final_layer,
    price_minimization_tx,
    redeem_inner_layer,
    solve,
    swap_front_run_reserves,
    swap_front_run_tx,
    swap_inner_layer,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
