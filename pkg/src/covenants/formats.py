"""Text formats for transactions (.txn) and scenarios (.scn). Grammar in docs/formats.md."""

from __future__ import annotations

from typing import Iterator, Mapping, Optional

from . import model as m
from .crypto import Keyring
from .errors import ScriptSyntaxError, UnresolvedNameError
from .ledger import RejectReason
from .parser import Parser, Renderer, SigRef, btc_to_sat, sat_to_btc
from .scenario import Advance, Expectation, InputSpec, OutputSpec, Scenario, TxStep, build_tx

LAYOUT_WORDS = {
    "scenario", "faucet", "keys", "script", "advance", "tx", "expect", "accept", "reject",
    "input", "wit", "rel", "output", "val", "arg", "scr", "abslock", "end",
}
REASONS = {r.value: r for r in RejectReason}


class KeyringEnv(Mapping):
    """Name environment where every unbound name is a participant of ``keyring``."""

    def __init__(self, keyring: Keyring, extra: Optional[Mapping[str, object]] = None):
        self.keyring = keyring
        self.extra = dict(extra or {})
        self.used: dict = {}  # public key -> participant name, for rendering

    def __getitem__(self, name: str):
        if name in self.extra:
            return self.extra[name]
        if name in LAYOUT_WORDS:
            raise KeyError(name)
        pk = self.keyring.pk(name)
        self.used.setdefault(pk, name)
        return pk

    def __iter__(self) -> Iterator[str]:
        return iter(self.extra)

    def __len__(self) -> int:
        return len(self.extra)


class _FileParser(Parser):
    def __init__(self, text: str, env: dict):
        super().__init__(text, env, newlines=True)

    def skip_blank(self) -> None:
        while self.peek().kind == "nl":
            self.i += 1

    def end_line(self) -> None:
        tok = self.peek()
        if tok.kind == "eof":
            return
        if tok.kind != "nl":
            raise self.error(f"unexpected {tok.text!r} at end of line")
        self.skip_blank()

    def fresh_name(self, what: str) -> str:
        tok = self.expect_kind("name", what)
        if tok.text in LAYOUT_WORDS or "." in tok.text:
            raise self.error(f"{tok.text!r} is reserved", tok)
        return tok.text

    def amount(self) -> int:
        tok = self.peek()
        if tok.kind != "dec":
            raise self.error("expected an amount in BTC with a decimal point, e.g. 1.0")
        self.i += 1
        return btc_to_sat(tok.text, tok)

    def output_script(self) -> m.Script:
        e = self.expr()
        # a bare script name or <quote> means that script itself
        if isinstance(e, m.Const) and isinstance(e.value, m.Expr):
            e = e.value
        return m.checked(e)

    def tx_body(self, known: Optional[set]) -> tuple:
        """Input/output/abslock lines up to ``end``. ``known`` restricts step names in refs."""
        inputs, outputs, abs_lock = [], [], 0
        while not self.accept("end"):
            tok = self.peek()
            if self.accept("input"):
                ref_tok = self.peek()
                if ref_tok.kind == "hex":
                    self.i += 1
                    ref = ref_tok.text.lower()
                    if len(ref) != 66:
                        raise self.error("a txid is 32 bytes of hex", ref_tok)
                else:
                    ref = self.expect_kind("name", "a transaction name or 0x txid").text
                    if known is None or ref not in known:
                        raise UnresolvedNameError(
                            f"unknown transaction {ref!r} (line {ref_tok.line}, column {ref_tok.col})")
                self.expect(":")
                index = self.expect_int()
                self.expect("wit")
                witness = self.value_list(allow_sig=True)
                rel = self.expect_int() if self.accept("rel") else 0
                inputs.append(InputSpec(ref, index, witness, rel))
            elif self.accept("output"):
                self.expect("val")
                val = self.amount()
                arg = self.value_list() if self.accept("arg") else ()
                self.expect("scr")
                outputs.append(OutputSpec(self.output_script(), val, arg))
            elif self.accept("abslock"):
                abs_lock = self.expect_int()
            else:
                raise self.error("expected 'input', 'output', 'abslock' or 'end'", tok)
            self.end_line()
        if not outputs:
            raise self.error("a transaction needs at least one output")
        return tuple(inputs), tuple(outputs), abs_lock

    def expectation(self) -> Expectation:
        if self.accept("accept"):
            return Expectation()
        self.expect("reject")
        tok = self.expect_kind("name", "a rejection reason")
        if tok.text not in REASONS:
            raise self.error(f"unknown rejection reason {tok.text!r}", tok)
        index = self.expect_int() if self.accept("input") else None
        return Expectation(False, REASONS[tok.text], index)


def _leading_comments(text: str) -> list[str]:
    out = []
    for line in text.splitlines():
        if not line.startswith("#"):
            break
        out.append(line)
    return out


def parse_scenario(text: str, keyring: Optional[Keyring] = None) -> Scenario:
    """Parse a .scn file. Raises ScriptSyntaxError / UnresolvedNameError / ScriptTypeError."""
    sc = Scenario(name="", keyring=keyring or Keyring())
    sc.description = _leading_comments(text)
    env: dict = {}
    p = _FileParser(text, env)
    p.skip_blank()
    p.expect("scenario")
    sc.name = p.fresh_name("a scenario name")
    p.end_line()
    steps: set = set()
    while p.peek().kind != "eof":
        tok = p.peek()
        if p.accept("faucet"):
            sc.faucet = True
        elif p.accept("keys"):
            while p.peek().kind == "name":
                name = p.fresh_name("a participant name")
                if name in env:
                    raise p.error(f"{name!r} is already bound")
                sc.keys.append(name)
                env[name] = sc.keyring.pk(name)
        elif p.accept("script"):
            name = p.fresh_name("a script name")
            if name in env:
                raise p.error(f"{name!r} is already bound")
            p.expect("=")
            sc.scripts[name] = m.checked(p.expr())
            env[name] = sc.scripts[name]
        elif p.accept("advance"):
            sc.steps.append(Advance(p.expect_int()))
        elif p.accept("tx"):
            name = p.fresh_name("a transaction name")
            if name in steps:
                raise p.error(f"transaction {name!r} defined twice")
            p.expect("expect")
            expect = p.expectation()
            p.end_line()
            inputs, outputs, abs_lock = p.tx_body(steps)
            steps.add(name)
            sc.steps.append(TxStep(name, inputs, outputs, abs_lock, expect))
        else:
            raise p.error("expected 'faucet', 'keys', 'script', 'advance' or 'tx'", tok)
        p.end_line()
    return sc


def _render_tx_lines(step: TxStep, r: Renderer) -> list[str]:
    lines = []
    for i in step.inputs:
        line = f"  input {i.ref}:{i.index} wit {r.value_list(i.witness)}"
        if i.rel_lock:
            line += f" rel {i.rel_lock}"
        lines.append(line)
    for o in step.outputs:
        line = f"  output val {sat_to_btc(o.val)}"
        if o.arg:
            line += f" arg {r.value_list(o.arg)}"
        lines.append(f"{line} scr {r.name_of(o.scr) or r.render(o.scr)}")
    if step.abs_lock:
        lines.append(f"  abslock {step.abs_lock}")
    lines.append("end")
    return lines


def render_scenario(sc: Scenario) -> str:
    r = Renderer(sc.names())
    out = list(sc.description)
    out.append(f"scenario {sc.name}")
    if sc.faucet:
        out.append("faucet")
    if sc.keys:
        out.append("keys " + " ".join(sc.keys))
    if sc.scripts:
        out.append("")
        for name, script in sc.scripts.items():
            out.append(f"script {name} = {r.render(script)}")
    for step in sc.steps:
        out.append("")
        if isinstance(step, Advance):
            out.append(f"advance {step.count}")
            continue
        exp = step.expect
        head = "accept" if exp.accept else f"reject {exp.reason.value}" + (
            f" input {exp.input}" if exp.input is not None else "")
        out.append(f"tx {step.name} expect {head}")
        out.extend(_render_tx_lines(step, r))
    return "\n".join(out) + "\n"


# -- single transactions ---------------------------------------------------------


def parse_tx_template(text: str, env: Mapping[str, object]) -> TxStep:
    p = _FileParser(text, env)
    p.skip_blank()
    p.expect("tx")
    p.end_line()
    inputs, outputs, abs_lock = p.tx_body(None)
    p.skip_blank()
    p.expect_eof()
    return TxStep("tx", inputs, outputs, abs_lock)


def parse_tx(text: str, keyring: Optional[Keyring] = None,
             scripts: Optional[Mapping[str, m.Script]] = None) -> m.Transaction:
    """Parse a .txn file into a transaction. Inputs reference txids as 0x hex;
    names in scripts are participants of ``keyring``; ``sig(A)`` witnesses are
    signed with A's key."""
    keyring = keyring or Keyring()
    step = parse_tx_template(text, KeyringEnv(keyring, scripts))
    return build_tx(step, {}, keyring)


def render_tx(tx: m.Transaction, names: Optional[Mapping[object, str]] = None) -> str:
    r = Renderer(names)
    step = TxStep(
        "tx",
        tuple(InputSpec("0x" + ref.txid.hex(), ref.index, w, rl)
              for ref, w, rl in zip(tx.inputs, tx.witnesses, tx.rel_locks)),
        tuple(OutputSpec(o.scr, o.val, o.arg) for o in tx.outputs),
        tx.abs_lock,
    )
    return "\n".join(["tx"] + _render_tx_lines(step, r)) + "\n"
