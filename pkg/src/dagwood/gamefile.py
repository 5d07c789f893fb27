"""File format for games and solution reports.

A game file is a single JSON document holding prices, wallets, AMMs, the
txpool and the miner id.  Minted tokens are written ``"LP(T0,T1)"`` and the
two symbols are normalized lexicographically on parse, honoring unordered
pair identity.  Floats survive a serialize/parse round trip bit-faithfully
(shortest round-trip repr), so emitted reports replay exactly.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any, Mapping

from .engine import (
    Amm,
    Balance,
    Deposit,
    MintedPair,
    Redeem,
    State,
    Swap,
    Token,
    TokenId,
    Transaction,
    is_atomic,
    supply,
)
from .errors import ParseError, ValidationError
from .oracle import OracleReport
from .pricing import PriceOracle
from .solver import DagwoodSolution, GameInput

_LP_KEY = re.compile(r"^LP\(([^,()\s]+),([^,()\s]+)\)$")


def token_key(token: Token) -> str:
    """Serialized form of a token; minted pairs are order-normalized."""
    if is_atomic(token):
        return token.symbol
    a, b = sorted((token.t0.symbol, token.t1.symbol))
    return f"LP({a},{b})"


def parse_token_key(key: str) -> Token:
    match = _LP_KEY.match(key)
    if match is None:
        return TokenId(key)
    a, b = sorted((match.group(1), match.group(2)))
    if a == b:
        raise ValidationError(f"minted token key {key!r} repeats a symbol")
    return MintedPair(TokenId(a), TokenId(b))


@dataclass(frozen=True)
class GameFile:
    """A parsed game description."""

    oracle: PriceOracle
    state: State
    txpool: tuple[Transaction, ...]
    miner: str

    def to_game_input(self) -> GameInput:
        try:
            return GameInput(
                state=self.state, txpool=self.txpool, oracle=self.oracle, miner_id=self.miner
            )
        except ValueError as err:
            raise ValidationError(str(err)) from err


def _require(record: Mapping[str, Any], field: str, path: str):
    if field not in record:
        raise ParseError(f"{path}: missing field {field!r}")
    return record[field]


def _number(record: Mapping[str, Any], field: str, path: str) -> float:
    value = _require(record, field, path)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{path}.{field}: expected a number, got {value!r}")
    return float(value)


def _positive(record: Mapping[str, Any], field: str, path: str) -> float:
    value = _number(record, field, path)
    if value <= 0:
        raise ValidationError(f"{path}.{field}: must be positive, got {value}")
    return value


def parse_tx(record: Mapping[str, Any], path: str = "tx") -> Transaction:
    user = _require(record, "user", path)
    kind = _require(record, "type", path)
    if kind == "dep":
        return Deposit(
            user,
            _positive(record, "v0", path),
            TokenId(_require(record, "t0", path)),
            _positive(record, "v1", path),
            TokenId(_require(record, "t1", path)),
        )
    if kind == "swap":
        direction = _require(record, "dir", path)
        if direction not in (0, 1):
            raise ValidationError(f"{path}.dir: must be 0 or 1, got {direction!r}")
        return Swap(
            user,
            direction,
            _positive(record, "v0", path),
            TokenId(_require(record, "t0", path)),
            _positive(record, "v1", path),
            TokenId(_require(record, "t1", path)),
        )
    if kind == "rdm":
        pair = MintedPair(
            TokenId(_require(record, "t0", path)), TokenId(_require(record, "t1", path))
        )
        return Redeem(user, _positive(record, "v", path), pair)
    raise ParseError(f"{path}.type: unknown transaction type {kind!r}")


def tx_record(tx: Transaction) -> dict[str, Any]:
    if isinstance(tx, Deposit):
        return {
            "user": tx.user, "type": "dep",
            "v0": tx.v0, "t0": tx.t0.symbol, "v1": tx.v1, "t1": tx.t1.symbol,
        }
    if isinstance(tx, Swap):
        return {
            "user": tx.user, "type": "swap", "dir": tx.d,
            "v0": tx.v0, "t0": tx.t0.symbol, "v1": tx.v1, "t1": tx.t1.symbol,
        }
    if isinstance(tx, Redeem):
        return {
            "user": tx.user, "type": "rdm",
            "v": tx.v, "t0": tx.pair.t0.symbol, "t1": tx.pair.t1.symbol,
        }
    raise TypeError(f"not a transaction: {tx!r}")


def loads(text: str) -> GameFile:
    """Parse and validate a game file from its JSON text."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(f"line {err.lineno}, column {err.colno}: {err.msg}") from err
    if not isinstance(doc, dict):
        raise ParseError("top level must be a JSON object")

    prices_doc = _require(doc, "prices", "game")
    if not isinstance(prices_doc, dict) or not prices_doc:
        raise ParseError("prices: expected a non-empty object")
    prices: dict[TokenId, float] = {}
    for symbol, price in prices_doc.items():
        if isinstance(price, bool) or not isinstance(price, (int, float)):
            raise ParseError(f"prices.{symbol}: expected a number")
        if price <= 0:
            raise ValidationError(f"prices.{symbol}: must be positive, got {price}")
        prices[TokenId(symbol)] = float(price)
    oracle = PriceOracle(prices)

    amms: list[Amm] = []
    pairs: set[MintedPair] = set()
    for i, record in enumerate(doc.get("amms", [])):
        path = f"amms[{i}]"
        t0 = TokenId(_require(record, "t0", path))
        t1 = TokenId(_require(record, "t1", path))
        if t0 == t1:
            raise ValidationError(f"{path}: pair repeats token {t0}")
        for token in (t0, t1):
            if token not in prices:
                raise ValidationError(f"{path}: token {token} has no price")
        pair = MintedPair(t0, t1)
        if pair in pairs:
            raise ValidationError(f"{path}: duplicate AMM for pair {pair}")
        pairs.add(pair)
        amms.append(Amm(pair, _positive(record, "r0", path), _positive(record, "r1", path)))

    wallets_doc = doc.get("wallets", {})
    if not isinstance(wallets_doc, dict):
        raise ParseError("wallets: expected an object")
    wallets: dict[str, dict[Token, float]] = {}
    for user, holdings in wallets_doc.items():
        if not isinstance(holdings, dict):
            raise ParseError(f"wallets.{user}: expected an object")
        parsed: dict[Token, float] = {}
        for key, amount in holdings.items():
            token = parse_token_key(key)
            if isinstance(amount, bool) or not isinstance(amount, (int, float)):
                raise ParseError(f"wallets.{user}.{key}: expected a number")
            if amount < 0:
                raise ValidationError(f"wallets.{user}.{key}: negative amount {amount}")
            if is_atomic(token):
                if token not in prices:
                    raise ValidationError(f"wallets.{user}.{key}: token has no price")
            elif token not in pairs:
                raise ValidationError(f"wallets.{user}.{key}: no AMM for this pair")
            parsed[token] = float(amount)
        wallets[user] = parsed

    txpool = tuple(
        parse_tx(record, f"txpool[{i}]") for i, record in enumerate(doc.get("txpool", []))
    )
    for i, tx in enumerate(txpool):
        tokens = (tx.pair.t0, tx.pair.t1) if isinstance(tx, Redeem) else (tx.t0, tx.t1)
        for token in tokens:
            if token not in prices:
                raise ValidationError(f"txpool[{i}]: token {token} has no price")

    miner = _require(doc, "miner", "game")
    if not isinstance(miner, str) or not miner:
        raise ParseError("miner: expected a non-empty string")

    state = State.make(wallets, amms)
    for pair in pairs:
        if supply(state, pair) <= 0:
            raise ValidationError(f"pair {pair} has zero minted supply in the wallets")
    return GameFile(oracle=oracle, state=state, txpool=txpool, miner=miner)


def load(path: str) -> GameFile:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return loads(handle.read())
    except OSError as err:
        raise ParseError(f"cannot read {path}: {err}") from err


def state_record(state: State) -> dict[str, Any]:
    return {
        "wallets": {
            user: {token_key(t): v for t, v in balance.amounts.items()}
            for user, balance in sorted(state.wallets.items())
        },
        "amms": [
            {"t0": amm.pair.t0.symbol, "t1": amm.pair.t1.symbol, "r0": amm.r0, "r1": amm.r1}
            for amm in sorted(state.amms.values(), key=lambda a: a.pair.key())
        ],
    }


def game_record(game: GameFile) -> dict[str, Any]:
    record = state_record(game.state)
    return {
        "prices": {t.symbol: p for t, p in sorted(game.oracle.prices.items(), key=lambda kv: kv[0].symbol)},
        "wallets": record["wallets"],
        "amms": record["amms"],
        "txpool": [tx_record(tx) for tx in game.txpool],
        "miner": game.miner,
    }


def dumps(game: GameFile) -> str:
    return json.dumps(game_record(game), indent=2)


def balance_record(balance: Balance) -> dict[str, float]:
    return {token_key(t): v for t, v in sorted(balance.amounts.items(), key=lambda kv: token_key(kv[0]))}


def solution_report(
    game: GameFile,
    sol: DagwoodSolution,
    user_gains: Mapping[str, float],
    oracle_report: OracleReport | None = None,
) -> dict[str, Any]:
    """Machine-readable report; its tx list replays to its final state."""
    layers = []
    for layer in sol.layers:
        layers.append(
            {
                "kind": layer.kind,
                "included": bool(layer.txs),
                "txs": [tx_record(tx) for tx in layer.txs],
                "user_tx": tx_record(layer.user_tx) if layer.user_tx else None,
                "pair": token_key(layer.pair) if layer.pair else None,
            }
        )
    report: dict[str, Any] = {
        "miner": game.miner,
        "predicted_gain": sol.predicted_gain,
        "miner_balance_naive": balance_record(sol.miner_balance_naive),
        "miner_balance_minimal": balance_record(sol.miner_balance_minimal),
        "layers": layers,
        "txs": [tx_record(tx) for tx in sol.txs],
        "user_gains": dict(sorted(user_gains.items())),
        "trace": [state_record(state) for state in sol.trace],
    }
    if oracle_report is not None:
        report["oracle"] = {
            "best_gain": oracle_report.best_gain,
            "solver_gain": oracle_report.solver_gain,
            "relative_gap": oracle_report.relative_gap,
            "evaluations": oracle_report.evaluations,
            "seed": oracle_report.seed,
            "best_sequence": [tx_record(tx) for tx in oracle_report.best_sequence],
        }
    return report


def min_input_balance(txpool: tuple[Transaction, ...]) -> dict[str, Balance]:
    """Per-user atomic funding needed to enable their pool entries in any
    order: swap and deposit inputs summed, redeems contributing nothing."""
    needs: dict[str, Balance] = {}
    for tx in txpool:
        current = needs.get(tx.user, Balance())
        if isinstance(tx, Swap):
            current = current.add(tx.token_in(), tx.value_in())
        elif isinstance(tx, Deposit):
            current = current.add(tx.t0, tx.v0).add(tx.t1, tx.v1)
        needs[tx.user] = current
    return needs


def auto_fund(game: GameFile) -> GameFile:
    """Top user wallets up to their minimum input balance."""
    state = game.state
    for user, need in min_input_balance(game.txpool).items():
        balance = state.balance(user)
        for token, amount in need.amounts.items():
            held = balance.get(token)
            if held < amount:
                balance = balance.add(token, amount - held)
        state = state.with_wallet(user, balance)
    return GameFile(oracle=game.oracle, state=state, txpool=game.txpool, miner=game.miner)
