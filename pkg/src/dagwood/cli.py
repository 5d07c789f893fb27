"""Command-line front end.

``dagwood solve game.json`` constructs the optimal sandwich for the game
described in the file and reports it; ``dagwood trace game.json`` replays
the file's txpool step by step, printing reserves, minted prices and
per-user gains.  Exit codes: 0 success, 1 parse/validation error, 2
solver or replay error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from .engine import EPS_NUM, Deposit, Redeem, State, StepError, Swap, Transaction, step
from .errors import AmmError, ParseError, ValidationError
from .gamefile import (
    GameFile,
    auto_fund,
    balance_record,
    load,
    solution_report,
    token_key,
)
from .oracle import SearchConfig, verify_solution
from .pricing import PriceOracle, minted_price, net_worth
from .solver import solve


def format_tx(tx: Transaction) -> str:
    if isinstance(tx, Deposit):
        return f"{tx.user} dep {tx.v0:.6g}:{tx.t0} + {tx.v1:.6g}:{tx.t1}"
    if isinstance(tx, Swap):
        return f"{tx.user} swap^{tx.d} {tx.v0:.6g}:{tx.t0} / {tx.v1:.6g}:{tx.t1}"
    if isinstance(tx, Redeem):
        return f"{tx.user} rdm {tx.v:.6g}:{token_key(tx.pair)}"
    raise TypeError(f"not a transaction: {tx!r}")


def _format_balance(record: dict[str, float]) -> str:
    if not record:
        return "{}"
    return "{" + ", ".join(f"{v:.6g}:{k}" for k, v in record.items()) + "}"


def _cmd_solve(args) -> int:
    game_file = load(args.game)
    if args.auto_fund_users:
        game_file = auto_fund(game_file)
    game = game_file.to_game_input()
    sol = solve(game, eps=args.eps)

    start = sol.trace[0]
    gains = {}
    for user in start.users():
        after = net_worth(sol.trace[-1], user, game.oracle).total
        before = net_worth(start, user, game.oracle).total
        gains[user] = after - before

    report_oracle = None
    if args.verify:
        report_oracle = verify_solution(game, sol, SearchConfig(), seed=args.seed)

    report = solution_report(game_file, sol, gains, report_oracle)

    print(f"game: {args.game}")
    print("layers:")
    for i, layer in enumerate(sol.layers, start=1):
        if layer.txs:
            body = " | ".join(format_tx(tx) for tx in layer.txs)
        else:
            body = "(empty)" if layer.kind == "final_swap" else "(dropped)"
        print(f"  {i}. {layer.kind:<14} {body}")
    print(f"miner balance (naive):   {_format_balance(report['miner_balance_naive'])}")
    print(f"miner balance (minimal): {_format_balance(report['miner_balance_minimal'])}")
    print(f"predicted gain: {sol.predicted_gain:.6g}")
    print("user gains: " + "  ".join(f"{u}: {g:+.6g}" for u, g in sorted(gains.items())))
    if report_oracle is not None:
        print(
            f"oracle: best {report_oracle.best_gain:.6g}, "
            f"relative gap {report_oracle.relative_gap:.3e} "
            f"({report_oracle.evaluations} evaluations)"
        )

    if args.output:
        if args.output == "-":
            json.dump(report, sys.stdout, indent=2)
            print()
        else:
            with open(args.output, "w", encoding="utf-8") as handle:
                json.dump(report, handle, indent=2)
            print(f"report written to {args.output}")
    return 0


def _trace_rows(game_file: GameFile):
    """Replay the txpool, yielding one row per state; raises on rejection."""
    state = game_file.state
    oracle = game_file.oracle
    pairs = sorted(state.amms.keys(), key=lambda p: p.key())
    users = sorted(state.users())

    def row(index: int, tx: Transaction | None, current: State, previous: State | None):
        amms = []
        for pair in pairs:
            amm = current.amm(pair)
            amms.append((pair, amm.r0, amm.r1, minted_price(current, pair, oracle)))
        gains = {}
        if previous is not None:
            for user in users:
                gains[user] = (
                    net_worth(current, user, oracle).total
                    - net_worth(previous, user, oracle).total
                )
        return index, tx, current, amms, gains

    yield row(0, None, state, None)
    for index, tx in enumerate(game_file.txpool, start=1):
        previous = state
        state = step(state, tx)
        yield row(index, tx, state, previous)


def _cmd_trace(args) -> int:
    game_file = load(args.game)
    pairs = sorted(game_file.state.amms.keys(), key=lambda p: p.key())

    if args.csv:
        out = csv.writer(sys.stdout)
        header = ["step", "user", "type"]
        for pair in pairs:
            key = token_key(pair)
            header += [f"r0[{key}]", f"r1[{key}]", f"price[{key}]"]
        out.writerow(header)
    rows = _trace_rows(game_file)
    while True:
        try:
            index, tx, state, amms, gains = next(rows)
        except StopIteration:
            return 0
        except StepError as err:
            print(f"step rejected: {err.code}: {err}", file=sys.stderr)
            return 2
        if args.csv:
            record = [index]
            if tx is None:
                record += ["", ""]
            else:
                record += [tx.user, type(tx).__name__.lower()]
            for _, r0, r1, price in amms:
                record += [repr(r0), repr(r1), repr(price)]
            csv.writer(sys.stdout).writerow(record)
        else:
            label = "initial" if tx is None else format_tx(tx)
            reserves = "  ".join(
                f"({r0:.6g}:{pair.t0}, {r1:.6g}:{pair.t1}) price={price:.6g}"
                for pair, r0, r1, price in amms
            )
            wallets = "  ".join(
                f"{user}{state.balance(user)}" for user in sorted(state.users())
            )
            line = f"step {index}: {label:<44} {reserves}"
            if gains:
                deltas = "  ".join(f"d{user}={value:+.6g}" for user, value in gains.items())
                line += f"  {deltas}"
            print(line)
            print(f"         wallets: {wallets}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dagwood",
        description="Constant-product AMM sandwich solver and replay tool.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve_p = sub.add_parser("solve", help="construct the optimal sandwich for a game file")
    solve_p.add_argument("game", help="path to the game JSON file")
    solve_p.add_argument("--verify", action="store_true", help="run the brute-force oracle")
    solve_p.add_argument(
        "--auto-fund-users",
        action="store_true",
        help="top user wallets up to their minimum input balance first",
    )
    solve_p.add_argument("--seed", type=int, default=None, help="seed recorded in the oracle report")
    solve_p.add_argument("--eps", type=float, default=EPS_NUM, help="override the numeric tolerance")
    solve_p.add_argument("--output", "-o", default=None, help="write the JSON report here ('-' for stdout)")

    trace_p = sub.add_parser("trace", help="replay a game file's txpool step by step")
    trace_p.add_argument("game", help="path to the game JSON file")
    trace_p.add_argument("--csv", action="store_true", help="emit a plottable CSV table")
    trace_p.add_argument("--eps", type=float, default=EPS_NUM, help="override the numeric tolerance")

    args = parser.parse_args(argv)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        return _cmd_trace(args)
    except (ParseError, ValidationError) as err:
        print(f"error: {err.code}: {err}", file=sys.stderr)
        return 1
    except AmmError as err:
        print(f"solver error: {err.code}: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
