"""Evaluation of extended scripts against a redeeming transaction and input index."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional

from . import crypto, encoding
from . import model as m
from .errors import ContextError


class _Bottom:
    """The failure value. Not a script value; every operator is strict in it."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "BOT"

    def __bool__(self) -> bool:
        raise TypeError("bottom has no truth value")


BOT = _Bottom()


@dataclass(frozen=True)
class EvalContext:
    rtx: m.Transaction
    input_index: int  # 1-based
    resolver: Mapping[bytes, m.Transaction]
    scheme: crypto.SignatureScheme = crypto.DEFAULT_SCHEME
    chain_time_of: Optional[Callable[[bytes], int]] = None

    def __post_init__(self):
        if not 1 <= self.input_index <= len(self.rtx.inputs):
            raise ContextError(f"input index {self.input_index} out of range")

    @property
    def spent_ref(self) -> m.OutputRef:
        return self.rtx.inputs[self.input_index - 1]

    def current_tx(self) -> m.Transaction:
        """The transaction holding the output being redeemed."""
        txid = self.spent_ref.txid
        try:
            return self.resolver[txid]
        except KeyError:
            raise ContextError(f"transaction {txid.hex()} not available to the evaluator") from None

    def redeemed_output(self) -> m.Output:
        ref = self.spent_ref
        outs = self.current_tx().outputs
        if not 1 <= ref.index <= len(outs):
            raise ContextError(f"output {ref} does not exist")
        return outs[ref.index - 1]


def size_of(v) -> object:
    if m.is_int(v):
        return len(encoding.int_bytes(v))
    if isinstance(v, bytes):
        return len(v)
    return BOT


def _int(v) -> bool:
    return m.is_int(v)


def _output(outputs, k):
    if not _int(k) or not 1 <= k <= len(outputs):
        return None
    return outputs[k - 1]


def _field(out: m.Output, f: str):
    return out.arg if f == "arg" else out.scr if f == "scr" else out.val


def _flatten(ctx: EvalContext, exprs) -> object:
    out = []
    for e in exprs:
        v = evaluate(e, ctx)
        if v is BOT:
            return BOT
        if isinstance(v, tuple):
            out.extend(v)
        else:
            out.append(v)
    return out


def evaluate(e: m.Expr, ctx: EvalContext):
    """Evaluate ``e`` in ``ctx``; returns a value, a value sequence, or :data:`BOT`.

    ``if`` evaluates only the taken branch, and the quoted script of
    ``verscr`` is compared, never evaluated. A missing referenced transaction
    raises :class:`ContextError` instead of yielding bottom.
    """
    t = type(e)
    if t is m.Const:
        return e.value

    if t is m.BinOp:
        a = evaluate(e.left, ctx)
        if a is BOT:
            return BOT
        b = evaluate(e.right, ctx)
        if b is BOT:
            return BOT
        if e.op == "=":
            return m.value_eq(a, b)
        if not (_int(a) and _int(b)):
            return BOT
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        return a < b

    if t is m.If:
        c = evaluate(e.cond, ctx)
        if type(c) is not bool:
            return BOT
        return evaluate(e.then if c else e.orelse, ctx)

    if t is m.SeqAt:
        j = evaluate(e.index, ctx)
        if not _int(j):
            return BOT
        if type(e.seq) is m.Vec:
            items = e.seq.items
            return evaluate(items[j - 1], ctx) if 1 <= j <= len(items) else BOT
        seq = evaluate(e.seq, ctx)
        if not isinstance(seq, tuple) or not 1 <= j <= len(seq):
            return BOT
        return seq[j - 1]

    if t is m.Wit:
        return ctx.rtx.witnesses[ctx.input_index - 1]

    if t is m.Size:
        v = evaluate(e.arg, ctx)
        return BOT if v is BOT else size_of(v)

    if t is m.Hash:
        v = evaluate(e.arg, ctx)
        return BOT if v is BOT else crypto.hash_bytes(encoding.encode_value(v))

    if t is m.Versig:
        keys = _flatten(ctx, e.keys)
        if keys is BOT:
            return BOT
        sigs = _flatten(ctx, e.sigs)
        if sigs is BOT:
            return BOT
        return crypto.ver_multisig(keys, sigs, ctx.rtx, ctx.input_index, ctx.scheme)

    if t is m.After or t is m.AfterRel:
        lock = evaluate(e.time, ctx)
        if not _int(lock):
            return BOT
        have = ctx.rtx.abs_lock if t is m.After else ctx.rtx.rel_locks[ctx.input_index - 1]
        return evaluate(e.body, ctx) if have >= lock else BOT

    if t is m.Rtxo or t is m.Ctxo:
        k = evaluate(e.index, ctx)
        outputs = ctx.rtx.outputs if t is m.Rtxo else ctx.current_tx().outputs
        out = _output(outputs, k)
        return BOT if out is None else _field(out, e.field)

    if t is m.OutIdx:
        return ctx.spent_ref.index

    if t is m.InIdx:
        return ctx.input_index

    if t is m.Verscr:
        out = _output(ctx.rtx.outputs, evaluate(e.index, ctx))
        return BOT if out is None else m.script_eq(out.scr, e.script)

    if t is m.Verrec:
        out = _output(ctx.rtx.outputs, evaluate(e.index, ctx))
        return BOT if out is None else m.script_eq(out.scr, ctx.redeemed_output().scr)

    if t is m.Vec:
        return BOT
    raise TypeError(f"not a script node: {e!r}")


def format_result(v) -> str:
    """Token form used by the command line: ``true|false|int:<n>|bytes:<hex>|bot``."""
    if v is BOT:
        return "bot"
    kind = m.value_kind(v)
    if kind == "bool":
        return "true" if v else "false"
    if kind == "int":
        return f"int:{v}"
    if kind == "bytes":
        return f"bytes:{v.hex()}"
    if kind == "script":
        return f"script:{encoding.encode_script(v).hex()}"
    return "seq:[" + " ".join(format_result(x) for x in v) + "]"
