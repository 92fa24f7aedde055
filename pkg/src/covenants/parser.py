"""Concrete syntax for scripts: lexer, parser and canonical renderer.

Operator precedence, loosest first::

    if/then/else, after t : e, afterRel t : e     (prefix, extend to the right)
    or
    and
    =  <  >=  >  <=                               (non-associative)
    +  -
    e.k  e.(e)                                    (postfix indexing)

``true``, ``false``, ``and``, ``or``, ``>=``, ``>`` and ``<=`` are sugar and
never reach the AST. The renderer puts most of it back (``true``,
``false``, ``and``, ``or``, ``>=``) since parse(render(s)) == s either way.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import Mapping, Optional

from . import model as m
from .errors import ScriptSyntaxError, UnresolvedNameError

KEYWORDS = {
    "if", "then", "else", "and", "or", "after", "afterRel", "versig", "verscr", "verrec",
    "size", "hash", "outidx", "inidx", "true", "false", "sig",
}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<name>(?:rtxo|ctxo)\.(?:arg|scr|val)\b|rtx\.wit\b|[A-Za-z_][A-Za-z0-9_']*)
  | (?P<hex>0x[0-9a-fA-F]*)
  | (?P<dec>\d+\.\d+)
  | (?P<int>\d+)
  | (?P<op>>=|<=|[-+=<>()\[\];,:.])
""", re.VERBOSE)
_INT_RE = re.compile(r"\d+")


@dataclass(frozen=True)
class Token:
    kind: str  # name, hex, dec, int, op, nl, eof
    text: str
    line: int
    col: int


def tokenize(text: str, newlines: bool = False) -> list[Token]:
    """Split ``text`` into tokens. With ``newlines``, line breaks outside
    ``(`` / ``[`` nesting become ``nl`` tokens (consecutive ones collapse)."""
    tokens: list[Token] = []
    pos, line, line_start, depth = 0, 1, 0, 0
    while pos < len(text):
        mt = _TOKEN_RE.match(text, pos)
        if mt is None:
            raise ScriptSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = mt.lastgroup
        # after '.', digits are an index, never a decimal amount: x.1.2
        if kind == "dec" and tokens and tokens[-1].text == ".":
            mt = _INT_RE.match(text, pos)
            kind = "int"
        col = pos - line_start + 1
        tok_text = mt.group()
        pos = mt.end()
        if kind == "nl":
            if newlines and depth == 0 and tokens and tokens[-1].kind != "nl":
                tokens.append(Token("nl", "\n", line, col))
            line += 1
            line_start = pos
            continue
        if kind in ("ws", "comment"):
            continue
        if tok_text in "([":
            depth += 1
        elif tok_text in ")]":
            depth = max(0, depth - 1)
        tokens.append(Token(kind, tok_text, line, col))
    if newlines and tokens and tokens[-1].kind != "nl":
        tokens.append(Token("nl", "\n", line, pos - line_start + 1))
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


def btc_to_sat(text: str, tok: Optional[Token] = None) -> int:
    try:
        sat = Decimal(text) * m.SATOSHI_PER_BTC
    except InvalidOperation:
        sat = None
    if sat is None or sat != sat.to_integral_value():
        line, col = (tok.line, tok.col) if tok else (0, 0)
        raise ScriptSyntaxError(f"amount {text} is not a whole number of satoshi", line, col)
    return int(sat)


def sat_to_btc(sat: int) -> str:
    whole, frac = divmod(sat, m.SATOSHI_PER_BTC)
    digits = f"{frac:08d}".rstrip("0") or "0"
    return f"{whole}.{digits}"


@dataclass(frozen=True)
class SigRef:
    """Witness placeholder: the named participant's signature on the transaction."""

    name: str


class Parser:
    """Recursive-descent parser over a token list. Also used by the file formats."""

    def __init__(self, text: str, env: Optional[Mapping[str, object]] = None, newlines: bool = False):
        self.tokens = tokenize(text, newlines)
        self.i = 0
        self.env = env if env is not None else {}
        self.gt_closes_quote = False

    # -- token helpers -----------------------------------------------------

    def peek(self, k: int = 0) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        self.i += 1
        return tok

    def at(self, *texts: str) -> bool:
        tok = self.peek()
        return tok.kind in ("op", "name") and tok.text in texts

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def error(self, message: str, tok: Optional[Token] = None) -> ScriptSyntaxError:
        tok = tok or self.peek()
        return ScriptSyntaxError(message, tok.line, tok.col)

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if tok.kind in ("op", "name") and tok.text == text:
            self.i += 1
            return tok
        found = "end of input" if tok.kind == "eof" else "end of line" if tok.kind == "nl" else repr(tok.text)
        raise self.error(f"expected {text!r}, found {found}")

    def expect_kind(self, kind: str, what: str) -> Token:
        tok = self.peek()
        if tok.kind != kind or (kind == "name" and tok.text in KEYWORDS):
            raise self.error(f"expected {what}")
        self.i += 1
        return tok

    def expect_int(self) -> int:
        return int(self.expect_kind("int", "an integer").text)

    def expect_eof(self) -> None:
        if self.peek().kind != "eof":
            raise self.error(f"unexpected {self.peek().text!r}")

    def lookup(self, tok: Token):
        try:
            return self.env[tok.text]
        except KeyError:
            raise UnresolvedNameError(f"unknown name {tok.text!r} (line {tok.line}, column {tok.col})") from None

    # -- scripts -----------------------------------------------------------

    def expr(self) -> m.Expr:
        if self.at("if", "after", "afterRel"):
            return self.prefix()
        return self.or_expr()

    def prefix(self) -> m.Expr:
        tok = self.next()
        if tok.text == "if":
            cond = self.expr()
            self.expect("then")
            then = self.expr()
            self.expect("else")
            return m.If(cond, then, self.expr())
        time = self.additive()
        self.expect(":")
        body = self.expr()
        return m.After(time, body) if tok.text == "after" else m.AfterRel(time, body)

    def _operand(self, level):
        return self.prefix() if self.at("if", "after", "afterRel") else level()

    def or_expr(self) -> m.Expr:
        e = self.and_expr()
        while self.accept("or"):
            e = m.If(e, m.TRUE, self._operand(self.and_expr))
        return e

    def and_expr(self) -> m.Expr:
        e = self.comparison()
        while self.accept("and"):
            e = m.If(e, self._operand(self.comparison), m.FALSE)
        return e

    def comparison(self) -> m.Expr:
        left = self.additive()
        ops = ("=", "<", ">=", "<=") if self.gt_closes_quote else ("=", "<", ">=", "<=", ">")
        if not self.at(*ops):
            return left
        op = self.next().text
        right = self._operand(self.additive)
        if op in ("=", "<"):
            return m.BinOp(op, left, right)
        if op == ">":
            return m.BinOp("<", right, left)
        if op == ">=":
            return m.ge(left, right)
        return m.ge(right, left)

    def additive(self) -> m.Expr:
        e = self.postfix()
        while self.at("+", "-"):
            op = self.next().text
            e = m.BinOp(op, e, self._operand(self.postfix))
        return e

    def postfix(self) -> m.Expr:
        e = self.primary()
        while self.accept("."):
            if self.peek().kind == "int":
                e = m.SeqAt(e, m.Const(self.expect_int()))
            else:
                self.expect("(")
                e = m.SeqAt(e, self.nested(self.expr))
                self.expect(")")
        return e

    def nested(self, fn):
        """Run ``fn`` inside brackets, where '>' is an operator again."""
        saved, self.gt_closes_quote = self.gt_closes_quote, False
        try:
            return fn()
        finally:
            self.gt_closes_quote = saved

    def quoted(self) -> m.Expr:
        self.expect("<")
        saved, self.gt_closes_quote = self.gt_closes_quote, True
        try:
            e = self.expr()
        finally:
            self.gt_closes_quote = saved
        self.expect(">")
        return e

    def call1(self) -> m.Expr:
        self.expect("(")
        e = self.nested(self.expr)
        self.expect(")")
        return e

    def items(self, *stops: str) -> tuple:
        out = []
        while not self.at(*stops):
            if self.peek().kind in ("eof", "nl"):
                raise self.error(f"expected {' or '.join(map(repr, stops))}")
            out.append(self.expr())
        return tuple(out)

    def primary(self) -> m.Expr:
        tok = self.peek()
        if tok.kind == "int":
            self.i += 1
            return m.Const(int(tok.text))
        if tok.kind == "dec":
            self.i += 1
            return m.Const(btc_to_sat(tok.text, tok))
        if tok.kind == "hex":
            self.i += 1
            return m.Const(self._hex(tok))
        if tok.kind == "op":
            if tok.text == "-" and self.peek(1).kind == "int":
                self.i += 2
                return m.Const(-int(self.tokens[self.i - 1].text))
            if tok.text == "(":
                return self.call1()
            if tok.text == "[":
                self.i += 1
                items = self.nested(lambda: self.items("]"))
                self.expect("]")
                return m.Vec(items)
            if tok.text == "<":
                return m.Const(self.quoted())
            raise self.error(f"unexpected {tok.text!r}")
        if tok.kind != "name":
            raise self.error("unexpected end of input" if tok.kind == "eof" else "unexpected end of line")
        self.i += 1
        word = tok.text
        if word == "true":
            return m.TRUE
        if word == "false":
            return m.FALSE
        if word == "rtx.wit":
            return m.Wit()
        if word == "outidx":
            return m.OutIdx()
        if word == "inidx":
            return m.InIdx()
        if word.startswith(("rtxo.", "ctxo.")):
            node = m.Rtxo if word.startswith("rtxo") else m.Ctxo
            return node(word.split(".")[1], self.call1())
        if word in ("size", "hash"):
            return (m.Size if word == "size" else m.Hash)(self.call1())
        if word == "verrec":
            return m.Verrec(self.call1())
        if word == "versig":
            self.expect("(")
            keys = self.nested(lambda: self.items(";"))
            self.expect(";")
            sigs = self.nested(lambda: self.items(")"))
            self.expect(")")
            return m.Versig(keys, sigs)
        if word == "verscr":
            self.expect("(")
            index = self.nested(self.expr)
            self.expect(",")
            script = self.nested(self.script_ref)
            self.expect(")")
            return m.Verscr(index, script)
        if word in KEYWORDS:
            raise self.error(f"unexpected keyword {word!r}", tok)
        return self._const(tok, self.lookup(tok))

    def script_ref(self) -> m.Expr:
        """``<script>`` or the name of a script."""
        if self.at("<"):
            return self.quoted()
        tok = self.expect_kind("name", "a quoted script <...> or a script name")
        value = self.lookup(tok)
        if not isinstance(value, m.Expr):
            raise self.error(f"{tok.text!r} is not a script", tok)
        return value

    def _const(self, tok: Token, value) -> m.Const:
        if type(value) not in (int, bytes) and not isinstance(value, m.Expr):
            raise self.error(f"{tok.text!r} cannot be used inside a script", tok)
        return m.Const(value)

    def _hex(self, tok: Token) -> bytes:
        digits = tok.text[2:]
        if len(digits) % 2:
            raise self.error("odd number of hex digits", tok)
        return bytes.fromhex(digits)

    # -- value lists (arg / witness fields) ----------------------------------

    def value_list(self, allow_sig: bool = False) -> tuple:
        self.expect("[")
        out = []
        while not self.accept("]"):
            out.append(self.value(allow_sig))
        return tuple(out)

    def value(self, allow_sig: bool = False):
        tok = self.peek()
        if tok.kind == "int":
            self.i += 1
            return int(tok.text)
        if tok.kind == "hex":
            self.i += 1
            return self._hex(tok)
        if tok.kind == "op" and tok.text == "-" and self.peek(1).kind == "int":
            self.i += 2
            return -int(self.tokens[self.i - 1].text)
        if tok.kind == "op" and tok.text == "<":
            return self.quoted()
        if tok.kind == "name":
            if tok.text in ("true", "false"):
                self.i += 1
                return tok.text == "true"
            if tok.text == "sig" and allow_sig:
                self.i += 1
                self.expect("(")
                name = self.expect_kind("name", "a participant name")
                self.expect(")")
                self.lookup(name)
                return SigRef(name.text)
            if tok.text not in KEYWORDS:
                self.i += 1
                return self.lookup(tok)
        raise self.error("expected a value")


def parse_script(text: str, env: Optional[Mapping[str, object]] = None) -> m.Script:
    """Parse and type check a script. Names are resolved through ``env``."""
    p = Parser(text, env)
    e = p.expr()
    p.expect_eof()
    return m.checked(e)


# -- rendering --------------------------------------------------------------

PREFIX, OR, AND, CMP, ADD, POSTFIX, ATOM = range(7)


def _sugar(e: m.If) -> str:
    if e.orelse == m.FALSE:
        return "and"
    if e.then == m.TRUE:
        return "or"
    if e.then == m.FALSE and e.orelse == m.TRUE and isinstance(e.cond, m.BinOp) and e.cond.op == "<":
        return ">="
    return "if"


def _level(e: m.Expr) -> int:
    if e == m.TRUE or e == m.FALSE:
        return ATOM
    if isinstance(e, m.If):
        return {"and": AND, "or": OR, ">=": CMP, "if": PREFIX}[_sugar(e)]
    if isinstance(e, (m.After, m.AfterRel)):
        return PREFIX
    if isinstance(e, m.BinOp):
        return CMP if e.op in ("=", "<") else ADD
    if isinstance(e, m.SeqAt):
        return POSTFIX
    return ATOM


class Renderer:
    def __init__(self, names: Optional[Mapping[object, str]] = None):
        self.names = names or {}

    def name_of(self, v) -> Optional[str]:
        try:
            return self.names.get(v)
        except TypeError:
            return None

    def render(self, e: m.Expr, need: int = PREFIX) -> str:
        s = self._render(e)
        return f"({s})" if _level(e) < need else s

    def _item(self, e: m.Expr) -> str:
        s = self.render(e, OR)
        return f"({s})" if s.startswith(("<", "-")) else s

    def _items(self, items) -> str:
        return " ".join(self._item(x) for x in items)

    def quote(self, e: m.Expr) -> str:
        return self.name_of(e) or f"<{self.render(e)}>"

    def _render(self, e: m.Expr) -> str:
        r = self.render
        if e == m.TRUE or e == m.FALSE:
            return "true" if e == m.TRUE else "false"
        if isinstance(e, m.Const):
            v = e.value
            if isinstance(v, m.Expr):
                return self.quote(v)
            if isinstance(v, bytes):
                return self.name_of(v) or "0x" + v.hex()
            return str(v) if v >= 0 else f"(-{-v})"
        if isinstance(e, m.BinOp):
            if e.op in ("=", "<"):
                return f"{r(e.left, ADD)} {e.op} {r(e.right, ADD)}"
            return f"{r(e.left, ADD)} {e.op} {r(e.right, POSTFIX)}"
        if isinstance(e, m.If):
            kind = _sugar(e)
            if kind == "and":
                return f"{r(e.cond, AND)} and {r(e.then, CMP)}"
            if kind == "or":
                return f"{r(e.cond, OR)} or {r(e.orelse, AND)}"
            if kind == ">=":
                return f"{r(e.cond.left, ADD)} >= {r(e.cond.right, ADD)}"
            return f"if {r(e.cond, OR)} then {r(e.then)} else {r(e.orelse)}"
        if isinstance(e, m.After):
            return f"after {r(e.time, ADD)} : {r(e.body)}"
        if isinstance(e, m.AfterRel):
            return f"afterRel {r(e.time, ADD)} : {r(e.body)}"
        if isinstance(e, m.SeqAt):
            idx = e.index
            suffix = (str(idx.value) if isinstance(idx, m.Const) and m.is_int(idx.value) and idx.value >= 0
                      else f"({r(idx)})")
            return f"{r(e.seq, POSTFIX)}.{suffix}"
        if isinstance(e, m.Vec):
            return f"[{self._items(e.items)}]"
        if isinstance(e, m.Wit):
            return "rtx.wit"
        if isinstance(e, m.Size):
            return f"size({r(e.arg)})"
        if isinstance(e, m.Hash):
            return f"hash({r(e.arg)})"
        if isinstance(e, m.Versig):
            keys, sigs = self._items(e.keys), self._items(e.sigs)
            return f"versig({keys}; {sigs})" if keys else f"versig(; {sigs})"
        if isinstance(e, (m.Ctxo, m.Rtxo)):
            base = "ctxo" if isinstance(e, m.Ctxo) else "rtxo"
            return f"{base}.{e.field}({r(e.index)})"
        if isinstance(e, m.OutIdx):
            return "outidx"
        if isinstance(e, m.InIdx):
            return "inidx"
        if isinstance(e, m.Verscr):
            return f"verscr({r(e.index)}, {self.quote(e.script)})"
        if isinstance(e, m.Verrec):
            return f"verrec({r(e.index)})"
        raise TypeError(f"not a script node: {e!r}")

    def value(self, v) -> str:
        if isinstance(v, SigRef):
            return f"sig({v.name})"
        kind = m.value_kind(v)
        if kind == "bool":
            return "true" if v else "false"
        if kind == "int":
            return str(v)
        if kind == "bytes":
            return self.name_of(v) or "0x" + v.hex()
        if kind == "script":
            return self.quote(v)
        raise TypeError("nested sequences cannot be written in a value list")

    def value_list(self, vs) -> str:
        return "[" + " ".join(self.value(v) for v in vs) + "]"


def render_script(e: m.Script, names: Optional[Mapping[object, str]] = None) -> str:
    """Canonical text of ``e``. ``names`` maps key bytes / scripts back to names."""
    return Renderer(names).render(e)
