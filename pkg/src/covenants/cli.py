"""Command-line entry point.

Exit codes: 0 success, 1 domain rejection (invalid transaction, failed
scenario, script not true, unsound chain), 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import encoding, formats, ledger as lg
from . import model as m
from .crypto import SCHEMES, Keyring
from .errors import ContextError, ScriptSyntaxError, ScriptTypeError, UnresolvedNameError
from .interp import EvalContext, evaluate, format_result
from .parser import Renderer, parse_script, render_script, sat_to_btc
from .scenario import run_scenario

OK, REJECTED, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _color(stream) -> bool:
    return "NO_COLOR" not in os.environ and hasattr(stream, "isatty") and stream.isatty()


def _paint(text: str, code: str, stream) -> str:
    return f"\033[{code}m{text}\033[0m" if _color(stream) else text


def _read(path: str) -> str:
    try:
        return sys.stdin.read() if path == "-" else Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}") from None


def _keyring(args) -> Keyring:
    keyring = Keyring.from_toml(_read(args.keys)) if getattr(args, "keys", None) else Keyring()
    if getattr(args, "scheme", None):
        keyring = Keyring(SCHEMES[args.scheme], keyring.seeds)
    return keyring


def _names(keyring: Keyring, env: Optional[formats.KeyringEnv] = None) -> dict:
    names = {keyring.pk(name): name for name in keyring.seeds}
    if env is not None:
        names.update(env.used)
    return names


def _load_script(path: str, keyring: Keyring, env: Optional[formats.KeyringEnv] = None) -> m.Script:
    return parse_script(_read(path), env if env is not None else formats.KeyringEnv(keyring))


def _load_tx(path: str, keyring: Keyring) -> m.Transaction:
    """A transaction from a .txn text file or a binary canonical encoding."""
    if path != "-":
        try:
            data = Path(path).read_bytes()
        except OSError as exc:
            raise UsageError(f"{path}: {exc.strerror}") from None
        if data.startswith(encoding.TX_MAGIC):
            try:
                return encoding.decode_tx(data)
            except encoding.DecodeError as exc:
                raise UsageError(f"{path}: {exc}") from None
    return formats.parse_tx(_read(path), keyring)


def _load_ledger(directory: Optional[str], keyring: Keyring, faucet: Optional[bool] = None) -> lg.Ledger:
    if directory is None:
        return lg.Ledger(faucet=bool(faucet), scheme=keyring.scheme)
    if not (Path(directory) / lg.INDEX_FILE).exists():
        return lg.Ledger(faucet=bool(faucet), scheme=keyring.scheme)
    try:
        return lg.load_chain(directory, faucet=faucet)
    except (lg.ChainError, lg.TxRejected, encoding.DecodeError, OSError) as exc:
        raise UsageError(f"{directory}: cannot load chain ({exc}); run validate") from None


# -- subcommands ---------------------------------------------------------------


def cmd_parse(args, out) -> int:
    keyring = _keyring(args)
    env = formats.KeyringEnv(keyring)
    script = _load_script(args.file, keyring, env)
    if args.format == "hex":
        print(encoding.encode_script(script).hex(), file=out)
    else:
        print(render_script(script, _names(keyring, env)), file=out)
    return OK


def cmd_render(args, out) -> int:
    keyring = _keyring(args)
    text = _read(args.file).strip()
    try:
        script = encoding.decode_script(bytes.fromhex(text))
    except ValueError as exc:
        raise UsageError(f"{args.file}: not a hex script encoding ({exc})") from None
    print(render_script(script, _names(keyring)), file=out)
    return OK


def cmd_eval(args, out) -> int:
    keyring = _keyring(args)
    script = _load_script(args.script, keyring)
    rtx = _load_tx(args.rtx, keyring)
    ledger = _load_ledger(args.chain, keyring)
    if not 1 <= args.input <= len(rtx.inputs):
        raise UsageError(f"--input must be between 1 and {len(rtx.inputs)}")
    ctx = EvalContext(rtx, args.input, ledger.resolver(), ledger.scheme, ledger.position_of)
    result = evaluate(script, ctx)
    print(format_result(result), file=out)
    return REJECTED if result is False or format_result(result) == "bot" else OK


def cmd_keygen(args, out) -> int:
    keyring = _keyring(args)
    for name in args.name:
        print(f"{name} {keyring.pk(name).hex()}", file=out)
    return OK


def cmd_tx_build(args, out) -> int:
    keyring = _keyring(args)
    tx = formats.parse_tx(_read(args.file), keyring)
    data = encoding.encode_tx(tx)
    if args.out:
        Path(args.out).write_bytes(data)
    else:
        print(data.hex(), file=out)
    print(f"txid {tx.txid.hex()}", file=sys.stderr if not args.out else out)
    return OK


def cmd_append(args, out) -> int:
    keyring = _keyring(args)
    ledger = _load_ledger(args.chain, keyring, faucet=True if args.faucet else None)
    tx = _load_tx(args.file, keyring)
    rejection = ledger.check(tx)
    if rejection is not None:
        print(f"REJECT {rejection.reason}", file=out)
        if rejection.input is not None:
            print(f"rejected at input {rejection.input}", file=sys.stderr)
        return REJECTED
    ledger = ledger.append(tx)
    lg.save_chain(ledger, args.chain)
    print(tx.txid.hex(), file=out)
    return OK


def cmd_validate(args, out) -> int:
    if not (Path(args.chain) / lg.INDEX_FILE).exists():
        raise UsageError(f"{args.chain}: not a chain directory")
    problems = lg.validate_chain(args.chain)
    for p in problems:
        print(f"PROBLEM {p}", file=out)
    if problems:
        return REJECTED
    print(f"OK {len(lg.load_chain(args.chain))}", file=out)
    return OK


def cmd_utxos(args, out) -> int:
    keyring = _keyring(args)
    ledger = _load_ledger(args.chain, keyring)
    utxos = ledger.utxos()
    if not args.pretty:
        out.write(lg.utxo_text(ledger))
        return OK
    renderer = Renderer(_names(keyring))
    rows = [(str(ref), sat_to_btc(o.val), renderer.render(o.scr)) for ref, o in utxos.items()]
    _table(["output", "BTC", "script"], rows, out)
    print(f"{len(rows)} outputs, {sat_to_btc(ledger.utxo_value())} BTC", file=out)
    return OK


def cmd_scenario(args, out) -> int:
    sc = formats.parse_scenario(_read(args.file), _keyring(args))
    report = run_scenario(sc, faucet=args.faucet)
    if args.save_chain:
        lg.save_chain(report.ledger, args.save_chain)
    if not args.pretty:
        for line in report.lines():
            print(line, file=out)
    else:
        rows = [(r.name, r.expected, r.got, _paint("PASS", "32", out) if r.passed else _paint("FAIL", "31", out))
                for r in report.results]
        _table(["step", "expected", "got", ""], rows, out)
        verdict = "passed" if report.passed else "FAILED"
        print(f"scenario {report.scenario}: {verdict}", file=out)
    return OK if report.passed else REJECTED


def _table(header, rows, out) -> None:
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]
    for row in [header, ["-" * w for w in widths], *rows]:
        print("  ".join(str(c).ljust(w) for c, w in zip(row, widths)).rstrip(), file=out)


# -- argument parsing ------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="covenants", description="Bitcoin transactions with covenant scripts.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def keys(sp):
        sp.add_argument("--keys", metavar="TOML", help="participant seeds and signature scheme")
        sp.add_argument("--scheme", choices=sorted(SCHEMES), help="override the signature scheme")

    sp = sub.add_parser("parse", help="check a script file and print it in canonical form")
    sp.add_argument("file")
    sp.add_argument("--format", choices=["text", "hex"], default="text")
    keys(sp)
    sp.set_defaults(run=cmd_parse)

    sp = sub.add_parser("render", help="print a hex-encoded script as text")
    sp.add_argument("file")
    keys(sp)
    sp.set_defaults(run=cmd_render)

    sp = sub.add_parser("eval", help="evaluate a script against a redeeming transaction")
    sp.add_argument("--script", required=True)
    sp.add_argument("--rtx", required=True, help=".txn text or binary transaction")
    sp.add_argument("--input", type=int, default=1, help="1-based input index (default 1)")
    sp.add_argument("--chain", help="chain directory holding the spent transactions")
    keys(sp)
    sp.set_defaults(run=cmd_eval)

    sp = sub.add_parser("keygen", help="print the public key of each named participant")
    sp.add_argument("--name", required=True, action="append")
    keys(sp)
    sp.set_defaults(run=cmd_keygen)

    sp = sub.add_parser("tx-build", help="sign a .txn file and emit its canonical encoding")
    sp.add_argument("file")
    sp.add_argument("--out", help="write binary here instead of hex to stdout")
    keys(sp)
    sp.set_defaults(run=cmd_tx_build)

    sp = sub.add_parser("append", help="validate a transaction and append it to a chain directory")
    sp.add_argument("file")
    sp.add_argument("--chain", required=True)
    sp.add_argument("--faucet", action="store_true", help="accept coinbases after position 0")
    keys(sp)
    sp.set_defaults(run=cmd_append)

    sp = sub.add_parser("validate", help="replay a chain directory and check its files")
    sp.add_argument("chain")
    sp.set_defaults(run=cmd_validate)

    sp = sub.add_parser("utxos", help="list unspent outputs of a chain directory")
    sp.add_argument("chain")
    sp.add_argument("--pretty", action="store_true")
    keys(sp)
    sp.set_defaults(run=cmd_utxos)

    sp = sub.add_parser("scenario", help="scenario files")
    ssub = sp.add_subparsers(dest="action", required=True, parser_class=_Parser)
    run = ssub.add_parser("run", help="run a scenario and report each step")
    run.add_argument("file")
    run.add_argument("--faucet", action="store_true", help="force faucet mode")
    run.add_argument("--pretty", action="store_true")
    run.add_argument("--save-chain", metavar="DIR", help="store the resulting ledger")
    keys(run)
    run.set_defaults(run=cmd_scenario)
    return p


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        return args.run(args, out)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    except ScriptSyntaxError as exc:
        print(f"syntax error: {exc}", file=sys.stderr)
        return USAGE
    except (ScriptTypeError, UnresolvedNameError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    except ContextError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return REJECTED


if __name__ == "__main__":
    sys.exit(main())
