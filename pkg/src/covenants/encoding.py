"""Canonical binary serialization of values, scripts and transactions.

The layout is normative for transaction ids; see docs/serialization.md.
"""

from __future__ import annotations

import hashlib

from . import model as m

TX_MAGIC = b"CVT1"

# value tags
T_INT, T_BYTES, T_BOOL, T_SCRIPT, T_SEQ = 0x01, 0x02, 0x03, 0x04, 0x05

# script node tags
N_CONST, N_BINOP, N_VEC, N_SEQAT, N_IF, N_WIT = 0x10, 0x11, 0x12, 0x13, 0x14, 0x15
N_SIZE, N_HASH, N_VERSIG, N_AFTER, N_AFTERREL = 0x16, 0x17, 0x18, 0x19, 0x1A
N_CTXO, N_RTXO, N_OUTIDX, N_INIDX, N_VERSCR, N_VERREC = 0x1B, 0x1C, 0x1D, 0x1E, 0x1F, 0x20

FIELD_CODES = {"arg": 0, "scr": 1, "val": 2}
FIELD_NAMES = {v: k for k, v in FIELD_CODES.items()}


class DecodeError(ValueError):
    pass


def u32(n: int) -> bytes:
    return n.to_bytes(4, "big")


def int_bytes(n: int) -> bytes:
    """Minimal-length big-endian two's complement; zero is a single 0x00 byte."""
    width = ((n if n >= 0 else ~n).bit_length() + 8) // 8
    return n.to_bytes(width, "big", signed=True)


def int_from_bytes(b: bytes) -> int:
    if not b:
        raise DecodeError("empty integer encoding")
    n = int.from_bytes(b, "big", signed=True)
    if int_bytes(n) != b:
        raise DecodeError("non-minimal integer encoding")
    return n


def encode_value(v) -> bytes:
    kind = m.value_kind(v)
    if kind == "int":
        body = int_bytes(v)
        return bytes([T_INT]) + u32(len(body)) + body
    if kind == "bytes":
        return bytes([T_BYTES]) + u32(len(v)) + bytes(v)
    if kind == "bool":
        return bytes([T_BOOL, 1 if v else 0])
    if kind == "script":
        body = encode_script(v)
        return bytes([T_SCRIPT]) + u32(len(body)) + body
    return bytes([T_SEQ]) + encode_seq(v)


def encode_seq(seq) -> bytes:
    return u32(len(seq)) + b"".join(encode_value(v) for v in seq)


def _exprs(items) -> bytes:
    return u32(len(items)) + b"".join(encode_script(e) for e in items)


def encode_script(e: m.Expr) -> bytes:
    t = type(e)
    if t is m.Const:
        return bytes([N_CONST]) + encode_value(e.value)
    if t is m.BinOp:
        return bytes([N_BINOP]) + e.op.encode() + encode_script(e.left) + encode_script(e.right)
    if t is m.Vec:
        return bytes([N_VEC]) + _exprs(e.items)
    if t is m.SeqAt:
        return bytes([N_SEQAT]) + encode_script(e.seq) + encode_script(e.index)
    if t is m.If:
        return bytes([N_IF]) + encode_script(e.cond) + encode_script(e.then) + encode_script(e.orelse)
    if t is m.Wit:
        return bytes([N_WIT])
    if t is m.Size:
        return bytes([N_SIZE]) + encode_script(e.arg)
    if t is m.Hash:
        return bytes([N_HASH]) + encode_script(e.arg)
    if t is m.Versig:
        return bytes([N_VERSIG]) + _exprs(e.keys) + _exprs(e.sigs)
    if t is m.After:
        return bytes([N_AFTER]) + encode_script(e.time) + encode_script(e.body)
    if t is m.AfterRel:
        return bytes([N_AFTERREL]) + encode_script(e.time) + encode_script(e.body)
    if t is m.Ctxo:
        return bytes([N_CTXO, FIELD_CODES[e.field]]) + encode_script(e.index)
    if t is m.Rtxo:
        return bytes([N_RTXO, FIELD_CODES[e.field]]) + encode_script(e.index)
    if t is m.OutIdx:
        return bytes([N_OUTIDX])
    if t is m.InIdx:
        return bytes([N_INIDX])
    if t is m.Verscr:
        body = encode_script(e.script)
        return bytes([N_VERSCR]) + encode_script(e.index) + u32(len(body)) + body
    if t is m.Verrec:
        return bytes([N_VERREC]) + encode_script(e.index)
    raise TypeError(f"not a script node: {e!r}")


def encode_output(o: m.Output) -> bytes:
    scr = encode_script(o.scr)
    return encode_seq(o.arg) + u32(len(scr)) + scr + encode_value(o.val)


def encode_tx(tx: m.Transaction) -> bytes:
    """Fields in record order: in, wit, out, absLock, relLock."""
    parts = [TX_MAGIC, u32(len(tx.inputs))]
    for ref in tx.inputs:
        parts.append(ref.txid + u32(ref.index))
    parts.append(u32(len(tx.witnesses)))
    parts.extend(encode_seq(w) for w in tx.witnesses)
    parts.append(u32(len(tx.outputs)))
    parts.extend(encode_output(o) for o in tx.outputs)
    parts.append(encode_value(tx.abs_lock))
    parts.append(u32(len(tx.rel_locks)))
    parts.extend(encode_value(n) for n in tx.rel_locks)
    return b"".join(parts)


def digest(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def tx_id(tx: m.Transaction) -> bytes:
    return digest(encode_tx(tx))


# -- decoding ---------------------------------------------------------------


class Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise DecodeError("truncated input")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def byte(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return int.from_bytes(self.take(4), "big")

    def done(self) -> None:
        if self.pos != len(self.data):
            raise DecodeError(f"{len(self.data) - self.pos} trailing bytes")


def read_value(r: Reader):
    tag = r.byte()
    if tag == T_INT:
        return int_from_bytes(r.take(r.u32()))
    if tag == T_BYTES:
        return r.take(r.u32())
    if tag == T_BOOL:
        b = r.byte()
        if b > 1:
            raise DecodeError("bad boolean")
        return bool(b)
    if tag == T_SCRIPT:
        return _sub(r, read_script)
    if tag == T_SEQ:
        return read_seq(r)
    raise DecodeError(f"unknown value tag {tag:#x}")


def _sub(r: Reader, fn):
    inner = Reader(r.take(r.u32()))
    out = fn(inner)
    inner.done()
    return out


def read_seq(r: Reader) -> tuple:
    return tuple(read_value(r) for _ in range(r.u32()))


def _read_exprs(r: Reader) -> tuple:
    return tuple(read_script(r) for _ in range(r.u32()))


def _field(r: Reader) -> str:
    code = r.byte()
    if code not in FIELD_NAMES:
        raise DecodeError(f"unknown field code {code}")
    return FIELD_NAMES[code]


def read_script(r: Reader) -> m.Expr:
    tag = r.byte()
    if tag == N_CONST:
        v = read_value(r)
        if type(v) not in (int, bytes) and not isinstance(v, m.Expr):
            raise DecodeError("bad constant")
        return m.Const(v)
    if tag == N_BINOP:
        op = chr(r.byte())
        if op not in m.BINOPS:
            raise DecodeError(f"unknown operator {op!r}")
        return m.BinOp(op, read_script(r), read_script(r))
    if tag == N_VEC:
        return m.Vec(_read_exprs(r))
    if tag == N_SEQAT:
        return m.SeqAt(read_script(r), read_script(r))
    if tag == N_IF:
        return m.If(read_script(r), read_script(r), read_script(r))
    if tag == N_WIT:
        return m.Wit()
    if tag == N_SIZE:
        return m.Size(read_script(r))
    if tag == N_HASH:
        return m.Hash(read_script(r))
    if tag == N_VERSIG:
        return m.Versig(_read_exprs(r), _read_exprs(r))
    if tag == N_AFTER:
        return m.After(read_script(r), read_script(r))
    if tag == N_AFTERREL:
        return m.AfterRel(read_script(r), read_script(r))
    if tag == N_CTXO:
        return m.Ctxo(_field(r), read_script(r))
    if tag == N_RTXO:
        return m.Rtxo(_field(r), read_script(r))
    if tag == N_OUTIDX:
        return m.OutIdx()
    if tag == N_INIDX:
        return m.InIdx()
    if tag == N_VERSCR:
        index = read_script(r)
        return m.Verscr(index, _sub(r, read_script))
    if tag == N_VERREC:
        return m.Verrec(read_script(r))
    raise DecodeError(f"unknown script tag {tag:#x}")


def decode_script(data: bytes) -> m.Expr:
    r = Reader(data)
    e = read_script(r)
    r.done()
    return e


def decode_tx(data: bytes) -> m.Transaction:
    r = Reader(data)
    if r.take(4) != TX_MAGIC:
        raise DecodeError("not a transaction")
    inputs = [m.OutputRef(r.take(32), r.u32()) for _ in range(r.u32())]
    witnesses = [read_seq(r) for _ in range(r.u32())]
    outputs = [(read_seq(r), _sub(r, read_script), read_value(r)) for _ in range(r.u32())]
    abs_lock = read_value(r)
    rel_locks = [read_value(r) for _ in range(r.u32())]
    r.done()
    try:
        return m.Transaction(inputs, [m.Output(scr, val, arg) for arg, scr, val in outputs],
                             witnesses, abs_lock, rel_locks)
    except (ValueError, TypeError) as exc:
        raise DecodeError(str(exc)) from exc
