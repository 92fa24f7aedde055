"""Scenarios: named transaction templates appended in order, each with an expected outcome."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

from . import model as m
from .crypto import Keyring
from .errors import UnresolvedNameError
from .ledger import Ledger, RejectReason, Rejection
from .parser import SigRef


@dataclass(frozen=True)
class Expectation:
    accept: bool = True
    reason: Optional[RejectReason] = None
    input: Optional[int] = None

    @property
    def token(self) -> str:
        if self.accept:
            return "accept"
        return Rejection(self.reason, self.input).token

    def matches(self, got: Optional[Rejection]) -> bool:
        if got is None:
            return self.accept
        if self.accept or got.reason is not self.reason:
            return False
        return self.input is None or self.input == got.input


@dataclass(frozen=True)
class InputSpec:
    ref: str  # step name, or 0x-prefixed txid hex
    index: int
    witness: Tuple[Union[m.Value, SigRef], ...] = ()
    rel_lock: int = 0


@dataclass(frozen=True)
class OutputSpec:
    scr: m.Script
    val: int
    arg: m.ValueSeq = ()


@dataclass(frozen=True)
class TxStep:
    name: str
    inputs: Tuple[InputSpec, ...]
    outputs: Tuple[OutputSpec, ...]
    abs_lock: int = 0
    expect: Expectation = Expectation()


@dataclass(frozen=True)
class Advance:
    """Append ``count`` empty coinbase ticks (faucet mode) to move time forward."""

    count: int


Step = Union[TxStep, Advance]


@dataclass
class Scenario:
    name: str
    keys: List[str] = field(default_factory=list)
    scripts: Dict[str, m.Script] = field(default_factory=dict)
    steps: List[Step] = field(default_factory=list)
    faucet: bool = False
    keyring: Keyring = field(default_factory=Keyring)
    description: List[str] = field(default_factory=list)  # leading comment lines

    def env(self) -> dict:
        env: dict = {k: self.keyring.pk(k) for k in self.keys}
        env.update(self.scripts)
        return env

    def names(self) -> dict:
        """Reverse of :meth:`env`, for rendering. First binding wins."""
        out: dict = {}
        for name, value in self.env().items():
            out.setdefault(value, name)
        return out

    def step(self, name: str) -> TxStep:
        for s in self.steps:
            if isinstance(s, TxStep) and s.name == name:
                return s
        raise KeyError(name)


def _ref_txid(ref: str, txids: Dict[str, bytes]) -> bytes:
    if ref.startswith("0x"):
        return bytes.fromhex(ref[2:])
    try:
        return txids[ref]
    except KeyError:
        raise UnresolvedNameError(f"unknown transaction {ref!r}") from None


def build_tx(step: TxStep, txids: Dict[str, bytes], keyring: Keyring) -> m.Transaction:
    """Instantiate a template: resolve input names, then fill in signatures."""
    unsigned = m.Transaction(
        inputs=[m.OutputRef(_ref_txid(i.ref, txids), i.index) for i in step.inputs],
        outputs=[m.Output(o.scr, o.val, o.arg) for o in step.outputs],
        abs_lock=step.abs_lock,
        rel_locks=[i.rel_lock for i in step.inputs],
    )
    sigs: Dict[str, bytes] = {}

    def fill(v):
        if isinstance(v, SigRef):
            if v.name not in sigs:
                sigs[v.name] = keyring.sign(v.name, unsigned)
            return sigs[v.name]
        return v

    return unsigned.with_witnesses([tuple(fill(v) for v in i.witness) for i in step.inputs])


def tick(position: int) -> m.Transaction:
    """An unspendable zero-value coinbase, made unique by its position."""
    return m.Transaction([], [m.Output(m.FALSE, 0, (position,))])


@dataclass(frozen=True)
class StepResult:
    name: str
    expected: str
    got: str
    passed: bool

    def line(self) -> str:
        return f"STEP {self.name} EXPECT {self.expected} GOT {self.got} {'PASS' if self.passed else 'FAIL'}"


@dataclass
class Report:
    scenario: str
    results: List[StepResult]
    ledger: Ledger
    txids: Dict[str, bytes]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def lines(self) -> List[str]:
        return [r.line() for r in self.results]

    def tx(self, name: str) -> m.Transaction:
        return self.ledger.tx(self.txids[name])


def run_scenario(scenario: Scenario, ledger: Optional[Ledger] = None, faucet: bool = False) -> Report:
    """Execute the steps in order against ``ledger`` (a fresh one by default).

    Mismatches between expected and actual outcomes are recorded in the
    report, never raised.
    """
    if ledger is None:
        ledger = Ledger(faucet=faucet or scenario.faucet, scheme=scenario.keyring.scheme)
    results: List[StepResult] = []
    txids: Dict[str, bytes] = {}
    for step in scenario.steps:
        if isinstance(step, Advance):
            for _ in range(step.count):
                got = ledger.check(tick(ledger.height))
                if got is not None:
                    results.append(StepResult(f"advance@{ledger.height}", "accept", got.token, False))
                    break
                ledger = ledger.append(tick(ledger.height))
            continue
        tx = build_tx(step, txids, scenario.keyring)
        txids[step.name] = tx.txid
        got = ledger.check(tx)
        if got is None:
            ledger = ledger.append(tx)
        results.append(StepResult(step.name, step.expect.token, "accept" if got is None else got.token,
                                  step.expect.matches(got)))
    return Report(scenario.name, results, ledger, txids)
