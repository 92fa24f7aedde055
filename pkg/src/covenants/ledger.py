"""Append-only ledger. A transaction's position is its timestamp."""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, FrozenSet, Iterator, Mapping, Optional, Tuple

from . import crypto, encoding
from . import model as m
from .interp import BOT, EvalContext, evaluate


class RejectReason(enum.Enum):
    UNKNOWN_INPUT = "UnknownInput"
    DOUBLE_SPEND = "DoubleSpend"
    SCRIPT_FALSE = "ScriptFalse"
    SCRIPT_BOT = "ScriptBot"
    REL_LOCK_NOT_MET = "RelLockNotMet"
    ABS_LOCK_NOT_MET = "AbsLockNotMet"
    VALUE_CREATED = "ValueCreated"
    COINBASE_NOT_ALLOWED = "CoinbaseNotAllowed"
    DUPLICATE_TX = "DuplicateTx"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Rejection:
    reason: RejectReason
    input: Optional[int] = None  # 1-based input the failure is attributed to

    @property
    def token(self) -> str:
        return str(self.reason) if self.input is None else f"{self.reason}@{self.input}"

    def __str__(self) -> str:
        return self.token


class TxRejected(Exception):
    def __init__(self, rejection: Rejection):
        super().__init__(rejection.token)
        self.rejection = rejection

    @property
    def reason(self) -> RejectReason:
        return self.rejection.reason


class UnknownRef(KeyError):
    pass


@dataclass(frozen=True, eq=False)
class Ledger:
    """Immutable ledger state. :meth:`append` returns a new ledger.

    ``faucet`` lets coinbase transactions appear after position 0, so that
    scenarios can fund participants and advance time.
    """

    transactions: Tuple[m.Transaction, ...] = ()
    positions: Mapping[bytes, int] = field(default_factory=dict)
    spent: Mapping[m.OutputRef, Tuple[int, int]] = field(default_factory=dict)
    utxo: FrozenSet[m.OutputRef] = frozenset()
    faucet: bool = False
    scheme: crypto.SignatureScheme = crypto.DEFAULT_SCHEME
    minted: int = 0
    fees: int = 0

    def __len__(self) -> int:
        return len(self.transactions)

    @property
    def height(self) -> int:
        """Position the next appended transaction would get."""
        return len(self.transactions)

    def position_of(self, txid: bytes) -> int:
        try:
            return self.positions[txid]
        except KeyError:
            raise UnknownRef(txid.hex()) from None

    def tx(self, txid: bytes) -> m.Transaction:
        return self.transactions[self.position_of(txid)]

    def output(self, ref: m.OutputRef) -> m.Output:
        outs = self.tx(ref.txid).outputs
        if not 1 <= ref.index <= len(outs):
            raise UnknownRef(str(ref))
        return outs[ref.index - 1]

    def is_spent(self, ref: m.OutputRef) -> bool:
        self.output(ref)
        return ref in self.spent

    def utxos(self) -> Dict[m.OutputRef, m.Output]:
        return {ref: self.output(ref) for ref in sorted(self.utxo, key=self._order)}

    def _order(self, ref: m.OutputRef):
        return (self.positions[ref.txid], ref.index)

    def resolver(self) -> Mapping[bytes, m.Transaction]:
        return _Resolver(self)

    # -- validity ------------------------------------------------------------

    def check(self, tx: m.Transaction) -> Optional[Rejection]:
        """Return the first violated validity condition, or None if ``tx`` may be appended."""
        n = self.height
        if tx.is_coinbase:
            if n > 0 and not self.faucet:
                return Rejection(RejectReason.COINBASE_NOT_ALLOWED)
            if n < tx.abs_lock:
                return Rejection(RejectReason.ABS_LOCK_NOT_MET)
            # a non-coinbase duplicate always double-spends, so only coinbases can collide
            if tx.txid in self.positions:
                return Rejection(RejectReason.DUPLICATE_TX)
            return None

        resolver = self.resolver()
        seen = set()
        total_in = 0
        for i, ref in enumerate(tx.inputs, start=1):
            h = self.positions.get(ref.txid)
            if h is None or not 1 <= ref.index <= len(self.transactions[h].outputs):
                return Rejection(RejectReason.UNKNOWN_INPUT, i)
            if ref in self.spent or ref in seen:
                return Rejection(RejectReason.DOUBLE_SPEND, i)
            seen.add(ref)
            out = self.transactions[h].outputs[ref.index - 1]
            result = evaluate(out.scr, EvalContext(tx, i, resolver, self.scheme, self.position_of))
            if result is BOT:
                return Rejection(RejectReason.SCRIPT_BOT, i)
            if result is not True:
                return Rejection(RejectReason.SCRIPT_FALSE, i)
            if n - h < tx.rel_locks[i - 1]:
                return Rejection(RejectReason.REL_LOCK_NOT_MET, i)
            total_in += out.val
        if n < tx.abs_lock:
            return Rejection(RejectReason.ABS_LOCK_NOT_MET)
        if total_in < tx.total_out():
            return Rejection(RejectReason.VALUE_CREATED)
        return None

    def append(self, tx: m.Transaction) -> Ledger:
        """Return the ledger extended with ``tx``; raise :class:`TxRejected` if invalid."""
        rejection = self.check(tx)
        if rejection is not None:
            raise TxRejected(rejection)
        return self._extend(tx)

    def _extend(self, tx: m.Transaction) -> Ledger:
        n = self.height
        spent = dict(self.spent)
        utxo = set(self.utxo)
        total_in = 0
        for i, ref in enumerate(tx.inputs, start=1):
            spent[ref] = (n, i)
            utxo.discard(ref)
            total_in += self.output(ref).val
        utxo.update(m.OutputRef(tx.txid, k) for k in range(1, len(tx.outputs) + 1))
        positions = dict(self.positions)
        positions[tx.txid] = n
        if tx.is_coinbase:
            minted, fees = self.minted + tx.total_out(), self.fees
        else:
            minted, fees = self.minted, self.fees + total_in - tx.total_out()
        return replace(self, transactions=self.transactions + (tx,), positions=positions,
                       spent=spent, utxo=frozenset(utxo), minted=minted, fees=fees)

    def utxo_value(self) -> int:
        return sum(o.val for o in self.utxos().values())


class _Resolver(Mapping):
    def __init__(self, ledger: Ledger):
        self._ledger = ledger

    def __getitem__(self, txid: bytes) -> m.Transaction:
        pos = self._ledger.positions[txid]
        return self._ledger.transactions[pos]

    def __iter__(self) -> Iterator[bytes]:
        return iter(self._ledger.positions)

    def __len__(self) -> int:
        return len(self._ledger.positions)


def replay(transactions, faucet: bool = False, scheme: crypto.SignatureScheme = crypto.DEFAULT_SCHEME) -> Ledger:
    ledger = Ledger(faucet=faucet, scheme=scheme)
    for tx in transactions:
        ledger = ledger.append(tx)
    return ledger


# -- chain directory ----------------------------------------------------------

INDEX_FILE = "index"
UTXO_FILE = "utxo"


class ChainError(Exception):
    pass


def _tx_file(pos: int) -> str:
    return f"{pos:06d}.tx"


def index_text(ledger: Ledger) -> str:
    lines = [f"faucet {'yes' if ledger.faucet else 'no'}", f"scheme {ledger.scheme.name}"]
    lines += [f"{pos} {tx.txid.hex()}" for pos, tx in enumerate(ledger.transactions)]
    return "\n".join(lines) + "\n"


def utxo_text(ledger: Ledger) -> str:
    return "".join(f"{ref} {out.val}\n" for ref, out in ledger.utxos().items())


def _write_atomic(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def save_chain(ledger: Ledger, directory) -> None:
    """Write every transaction plus the index and utxo files. Existing tx files are kept."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for pos, tx in enumerate(ledger.transactions):
        p = d / _tx_file(pos)
        data = encoding.encode_tx(tx)
        if not p.exists() or p.read_bytes() != data:
            _write_atomic(p, data)
    _write_atomic(d / INDEX_FILE, index_text(ledger).encode())
    _write_atomic(d / UTXO_FILE, utxo_text(ledger).encode())


def _read_header(d: Path) -> tuple[bool, crypto.SignatureScheme, list[str]]:
    lines = (d / INDEX_FILE).read_text().splitlines()
    if len(lines) < 2 or not lines[0].startswith("faucet ") or not lines[1].startswith("scheme "):
        raise ChainError("malformed index header")
    faucet = lines[0].split()[1] == "yes"
    scheme = crypto.SCHEMES.get(lines[1].split()[1])
    if scheme is None:
        raise ChainError(f"unknown signature scheme {lines[1].split()[1]!r}")
    return faucet, scheme, lines[2:]


def load_chain(directory, faucet: Optional[bool] = None) -> Ledger:
    """Replay a chain directory from scratch. A missing directory is an empty ledger."""
    d = Path(directory)
    if not (d / INDEX_FILE).exists():
        return Ledger(faucet=bool(faucet))
    stored_faucet, scheme, entries = _read_header(d)
    ledger = Ledger(faucet=stored_faucet if faucet is None else faucet, scheme=scheme)
    for pos in range(len(entries)):
        ledger = ledger.append(encoding.decode_tx((d / _tx_file(pos)).read_bytes()))
    return ledger


def validate_chain(directory) -> list[str]:
    """Recompute the chain from its tx files; return a list of problems (empty if sound)."""
    d = Path(directory)
    problems = []
    try:
        faucet, scheme, entries = _read_header(d)
    except (OSError, ChainError) as exc:
        return [f"index: {exc}"]
    ledger = Ledger(faucet=faucet, scheme=scheme)
    for pos, line in enumerate(entries):
        parts = line.split()
        if len(parts) != 2 or parts[0] != str(pos):
            problems.append(f"index line {pos}: malformed")
            break
        try:
            tx = encoding.decode_tx((d / _tx_file(pos)).read_bytes())
        except (OSError, encoding.DecodeError) as exc:
            problems.append(f"position {pos}: {exc}")
            break
        if tx.txid.hex() != parts[1]:
            problems.append(f"position {pos}: txid mismatch")
        try:
            ledger = ledger.append(tx)
        except TxRejected as exc:
            problems.append(f"position {pos}: rejected {exc.rejection.token}")
            break
    if problems:
        return problems
    if (d / INDEX_FILE).read_text() != index_text(ledger):
        problems.append("index file differs from recomputed index")
    try:
        if (d / UTXO_FILE).read_text() != utxo_text(ledger):
            problems.append("utxo file differs from recomputed utxo set")
    except OSError:
        problems.append("utxo file missing")
    return problems
