"""Values, scripts, outputs and transactions.

Runtime values are plain Python objects:

* ``int`` (never ``bool``) for integers,
* ``bytes`` for byte strings (keys, signatures, digests),
* ``bool`` for booleans,
* a script node (:class:`Expr`) for script-valued data,
* ``tuple`` of the above for value sequences.

Because ``True == 1`` in Python, comparisons between values must go through
:func:`value_eq`, which keeps the kinds apart.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Tuple, Union

from .errors import ScriptTypeError

SATOSHI_PER_BTC = 100_000_000

FIELDS = ("arg", "scr", "val")
BINOPS = ("+", "-", "=", "<")


class Expr:
    """Base class of script AST nodes. Nodes are immutable and compare structurally."""

    __slots__ = ()


Value = Union[int, bytes, bool, Expr]
ValueSeq = Tuple[Value, ...]


def value_kind(v: object) -> str:
    # bool before int: bool is an int subclass
    if type(v) is bool:
        return "bool"
    if type(v) is int:
        return "int"
    if isinstance(v, bytes):
        return "bytes"
    if isinstance(v, Expr):
        return "script"
    if isinstance(v, tuple):
        return "seq"
    raise TypeError(f"not a script value: {v!r}")


def value_eq(a: object, b: object) -> bool:
    """Kind-respecting equality. Different kinds are never equal."""
    ka, kb = value_kind(a), value_kind(b)
    if ka != kb:
        return False
    if ka == "seq":
        return len(a) == len(b) and all(value_eq(x, y) for x, y in zip(a, b))
    return a == b


def is_int(v: object) -> bool:
    return type(v) is int


# -- script AST -------------------------------------------------------------


@dataclass(frozen=True)
class Const(Expr):
    value: Union[int, bytes, Expr]

    def __post_init__(self):
        if type(self.value) not in (int, bytes) and not isinstance(self.value, Expr):
            raise TypeError(f"unsupported constant {self.value!r}")


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def __post_init__(self):
        if self.op not in BINOPS:
            raise ValueError(f"unknown operator {self.op!r}")


@dataclass(frozen=True)
class Vec(Expr):
    """A literal vector of scripts; only valid as the sequence of a :class:`SeqAt`."""

    items: Tuple[Expr, ...]


@dataclass(frozen=True)
class SeqAt(Expr):
    seq: Expr
    index: Expr


@dataclass(frozen=True)
class If(Expr):
    cond: Expr
    then: Expr
    orelse: Expr


@dataclass(frozen=True)
class Wit(Expr):
    pass


@dataclass(frozen=True)
class Size(Expr):
    arg: Expr


@dataclass(frozen=True)
class Hash(Expr):
    arg: Expr


@dataclass(frozen=True)
class Versig(Expr):
    keys: Tuple[Expr, ...]
    sigs: Tuple[Expr, ...]


@dataclass(frozen=True)
class After(Expr):
    time: Expr
    body: Expr


@dataclass(frozen=True)
class AfterRel(Expr):
    time: Expr
    body: Expr


@dataclass(frozen=True)
class Ctxo(Expr):
    field: str
    index: Expr

    def __post_init__(self):
        if self.field not in FIELDS:
            raise ValueError(f"unknown output field {self.field!r}")


@dataclass(frozen=True)
class Rtxo(Expr):
    field: str
    index: Expr

    def __post_init__(self):
        if self.field not in FIELDS:
            raise ValueError(f"unknown output field {self.field!r}")


@dataclass(frozen=True)
class OutIdx(Expr):
    pass


@dataclass(frozen=True)
class InIdx(Expr):
    pass


@dataclass(frozen=True)
class Verscr(Expr):
    index: Expr
    script: Expr  # quoted, never evaluated


@dataclass(frozen=True)
class Verrec(Expr):
    index: Expr


Script = Expr


def script_eq(a: Script, b: Script) -> bool:
    """Syntactic equality of (already desugared) scripts."""
    return a == b


# -- sugar ------------------------------------------------------------------

TRUE = BinOp("=", Const(1), Const(1))
FALSE = BinOp("=", Const(1), Const(0))


def and_(*terms: Expr) -> Expr:
    """Left-associated ``a and b and ...``."""
    out = terms[0]
    for t in terms[1:]:
        out = If(out, t, FALSE)
    return out


def or_(*terms: Expr) -> Expr:
    out = terms[0]
    for t in terms[1:]:
        out = If(out, TRUE, t)
    return out


def not_(e: Expr) -> Expr:
    return If(e, FALSE, TRUE)


def ge(a: Expr, b: Expr) -> Expr:
    return not_(BinOp("<", a, b))


def eq(a: Expr, b: Expr) -> Expr:
    return BinOp("=", a, b)


def lit(v: Union[int, bytes, Expr]) -> Const:
    return Const(v)


def as_expr(v: Union[Expr, int, bytes]) -> Expr:
    return v if isinstance(v, Expr) and not isinstance(v, Vec) else Const(v)


def versig(keys: Union[Expr, bytes, Iterable], sigs: Union[Expr, Iterable, None] = None) -> Versig:
    """``versig(keys; sigs)``. A single key/expr is promoted to a one-element vector;
    ``sigs`` defaults to ``rtx.wit``."""
    if isinstance(keys, (bytes, Expr)):
        keys = [keys]
    if sigs is None:
        sigs = [Wit()]
    elif isinstance(sigs, Expr):
        sigs = [sigs]
    return Versig(tuple(as_expr(k) for k in keys), tuple(as_expr(s) for s in sigs))


def seqat(seq: Expr, index: Union[Expr, int]) -> SeqAt:
    return SeqAt(seq, as_expr(index))


# -- structural type check ----------------------------------------------------

INT, BYTES, BOOL, SCRIPT, SEQ, ANY = "int", "bytes", "bool", "script", "seq", "any"


def _expect(t: str, allowed: tuple, what: str) -> None:
    if t != ANY and t not in allowed:
        raise ScriptTypeError(f"{what}: expected {'/'.join(allowed)}, got {t}")


def _unify(a: str, b: str, what: str) -> str:
    if a == b:
        return a
    if ANY in (a, b):
        return ANY
    raise ScriptTypeError(f"{what}: branches have types {a} and {b}")


def type_of(e: Expr) -> str:
    """Infer the static type of ``e``, raising :class:`ScriptTypeError` if ill-formed.

    Sequence elements are dynamically typed (``any``); the check only rejects
    combinations that can never evaluate to a non-bottom value.
    """
    if isinstance(e, Const):
        k = value_kind(e.value)
        if isinstance(e.value, Expr):
            type_of(e.value)
        return k
    if isinstance(e, BinOp):
        lt, rt = type_of(e.left), type_of(e.right)
        if e.op == "=":
            return BOOL
        _expect(lt, (INT,), f"left operand of {e.op}")
        _expect(rt, (INT,), f"right operand of {e.op}")
        return BOOL if e.op == "<" else INT
    if isinstance(e, SeqAt):
        _expect(type_of(e.index), (INT,), "sequence index")
        if isinstance(e.seq, Vec):
            if not e.seq.items:
                return ANY
            t = type_of(e.seq.items[0])
            for item in e.seq.items[1:]:
                t2 = type_of(item)
                t = t if t == t2 else ANY
            return t
        _expect(type_of(e.seq), (SEQ,), "indexed expression")
        return ANY
    if isinstance(e, Vec):
        raise ScriptTypeError("a vector literal may only be indexed")
    if isinstance(e, If):
        _expect(type_of(e.cond), (BOOL,), "if condition")
        return _unify(type_of(e.then), type_of(e.orelse), "if")
    if isinstance(e, Wit):
        return SEQ
    if isinstance(e, Size):
        _expect(type_of(e.arg), (INT, BYTES), "size argument")
        return INT
    if isinstance(e, Hash):
        type_of(e.arg)
        return BYTES
    if isinstance(e, Versig):
        for part in e.keys + e.sigs:
            _expect(type_of(part), (BYTES, SEQ), "versig operand")
        return BOOL
    if isinstance(e, (After, AfterRel)):
        _expect(type_of(e.time), (INT,), "time lock")
        return type_of(e.body)
    if isinstance(e, (Ctxo, Rtxo)):
        _expect(type_of(e.index), (INT,), "output index")
        return {"arg": SEQ, "scr": SCRIPT, "val": INT}[e.field]
    if isinstance(e, (OutIdx, InIdx)):
        return INT
    if isinstance(e, Verscr):
        _expect(type_of(e.index), (INT,), "output index")
        type_of(e.script)
        return BOOL
    if isinstance(e, Verrec):
        _expect(type_of(e.index), (INT,), "output index")
        return BOOL
    raise ScriptTypeError(f"not a script node: {e!r}")


def checked(e: Expr) -> Expr:
    """Return ``e`` after type checking it."""
    type_of(e)
    return e


# -- transactions -----------------------------------------------------------


@dataclass(frozen=True)
class OutputRef:
    txid: bytes
    index: int  # 1-based

    def __str__(self) -> str:
        return f"{self.txid.hex()}:{self.index}"


@dataclass(frozen=True)
class Output:
    scr: Script
    val: int
    arg: ValueSeq = ()

    def __post_init__(self):
        object.__setattr__(self, "arg", tuple(self.arg))
        if not is_int(self.val) or self.val < 0:
            raise ValueError(f"output value must be a non-negative integer, got {self.val!r}")
        if not isinstance(self.scr, Expr):
            raise TypeError("output script must be a script node")
        for v in self.arg:
            value_kind(v)


@dataclass(frozen=True)
class Transaction:
    """A transaction record. Coinbase transactions have no inputs."""

    inputs: Tuple[OutputRef, ...]
    outputs: Tuple[Output, ...]
    witnesses: Tuple[ValueSeq, ...] = None
    abs_lock: int = 0
    rel_locks: Tuple[int, ...] = None

    def __post_init__(self):
        inputs = tuple(self.inputs)
        witnesses = tuple(tuple(w) for w in self.witnesses) if self.witnesses is not None \
            else tuple(() for _ in inputs)
        rel_locks = tuple(self.rel_locks) if self.rel_locks is not None else (0,) * len(inputs)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "witnesses", witnesses)
        object.__setattr__(self, "rel_locks", rel_locks)
        if not self.outputs:
            raise ValueError("a transaction needs at least one output")
        if len(witnesses) != len(inputs) or len(rel_locks) != len(inputs):
            raise ValueError("witnesses and relative locks must match the inputs one to one")
        for n in (self.abs_lock, *rel_locks):
            if not is_int(n) or n < 0:
                raise ValueError(f"time locks must be non-negative integers, got {n!r}")
        for w in witnesses:
            for v in w:
                value_kind(v)

    @property
    def is_coinbase(self) -> bool:
        return not self.inputs

    @cached_property
    def txid(self) -> bytes:
        from .encoding import tx_id

        return tx_id(self)

    def with_witnesses(self, witnesses) -> Transaction:
        return Transaction(self.inputs, self.outputs, witnesses, self.abs_lock, self.rel_locks)

    def without_witnesses(self) -> Transaction:
        return self.with_witnesses(tuple(() for _ in self.inputs))

    def total_out(self) -> int:
        return sum(o.val for o in self.outputs)


def tx_id(tx: Transaction) -> bytes:
    return tx.txid
