"""Acceptance suite. Each criterion prints one PASS/FAIL line in the terminal summary."""

from __future__ import annotations

import random
from dataclasses import replace

import pytest

from covenants import contracts as c
from covenants import crypto, encoding
from covenants import ledger as lg
from covenants import model as m
from covenants.interp import BOT, EvalContext, evaluate
from covenants.parser import parse_script, render_script
from covenants.scenario import build_tx, tick

import corpus
from oracle import brute_multisig

RING = crypto.Keyring(crypto.TransparentScheme())
R = lg.RejectReason
CASES = 1000


def criterion(number: int, title: str):
    return pytest.mark.criterion(number, title)


def prefix(report, step: str) -> lg.Ledger:
    """The ledger as it was just before ``step`` was attempted."""
    ledger = lg.Ledger(faucet=report.ledger.faucet, scheme=report.ledger.scheme)
    target = report.txids[step]
    for tx in report.ledger.transactions:
        if tx.txid == target:
            break
        ledger = ledger.append(tx)
    return ledger


def outcome(report, step: str) -> str:
    return next(r.got for r in report.results if r.name == step)


# -- 1 ---------------------------------------------------------------------------------


@criterion(1, "pure Bitcoin transfer and forged witness")
def test_pure_bitcoin():
    report = c.run_scenario(c.pure_bitcoin(RING))
    assert report.passed
    t0, t1 = report.tx("T0"), report.tx("T1")
    assert report.ledger.is_spent(m.OutputRef(t0.txid, 1))
    before = prefix(report, "T1")
    assert before.check(t1) is None
    forged = t1.with_witnesses([(RING.sign("B", t1),)])
    assert before.check(forged) == lg.Rejection(R.SCRIPT_FALSE, 1)
    garbled = t1.with_witnesses([(t1.witnesses[0][0][:-1] + b"\x00",)])
    assert before.check(garbled) == lg.Rejection(R.SCRIPT_FALSE, 1)


# -- 2 ---------------------------------------------------------------------------------


@criterion(2, "crowdfunding collect, refunds and short payment")
def test_crowdfunding():
    sc = c.crowdfunding(RING)
    report = c.run_scenario(sc)
    assert report.passed
    assert outcome(report, "collect") == "accept"
    assert outcome(report, "collectShort") == "ScriptBot@1"
    assert outcome(report, "refund") == "accept"
    # A3's refund is rejected at every position before the deadline, accepted at it
    ledger = prefix(report, "collect")
    refund = sc.step("refund")
    while ledger.height < c.CF_DEADLINE:
        attempt = build_tx(replace(refund, abs_lock=ledger.height), report.txids, sc.keyring)
        assert ledger.check(attempt) is not None
        ledger = ledger.append(tick(ledger.height))
    assert ledger.check(build_tx(refund, report.txids, sc.keyring)) is None


# -- 3 ---------------------------------------------------------------------------------


@criterion(3, "token merge accepted by the flawed script, rejected by the fixed and id scripts")
def test_nft():
    attack = c.run_scenario(c.nft_attack(RING))
    assert attack.passed
    assert outcome(attack, "T2") == "accept"
    assert outcome(attack, "F2") == "ScriptFalse@2"
    tagged = c.run_scenario(c.nft_id(RING))
    assert tagged.passed
    assert outcome(tagged, "T2") == "ScriptFalse@2"
    assert outcome(tagged, "T2other") == "ScriptFalse@1"


# -- 4 ---------------------------------------------------------------------------------


@criterion(4, "vault delay, cancellation and recursive vault cycles")
def test_vaults():
    basic = c.run_scenario(c.vault(RING))
    assert basic.passed
    assert outcome(basic, "TVdirect") == "ScriptFalse@1"
    assert outcome(basic, "Tearly") == "ScriptBot@1"
    assert outcome(basic, "Tsoon") == "RelLockNotMet@1"
    assert outcome(basic, "T") == "accept"
    assert outcome(basic, "Tcancel") == "accept"
    assert basic.tx("Tcancel").rel_locks == (0,)

    rec = c.run_scenario(c.recursive_vault(RING, cycles=3))
    assert rec.passed
    r = rec.ledger.transactions[rec.ledger.position_of(rec.txids["TV"])].outputs[0].scr
    hops = ["TV"] + [f"{p}{k}" for k in range(1, 4) for p in ("TS", "TR")]
    for prev, nxt in zip(hops, hops[1:]):
        a, b = rec.tx(prev).outputs[0], rec.tx(nxt).outputs[0]
        assert m.script_eq(a.scr, r) and m.script_eq(b.scr, r)
        assert a.val == b.val == c.BTC
    assert c.conservation_holds(rec.ledger)


# -- 5 ---------------------------------------------------------------------------------


@criterion(5, "pyramid join, single-clause mutations, +1 BTC per recruiter")
def test_pyramid():
    report = c.run_scenario(c.pyramid(RING))
    assert report.passed
    assert outcome(report, "T1") == "accept"
    for bad in ("T1lowval", "T1wrongscr", "T1noverrec"):
        assert outcome(report, bad) == "ScriptFalse@1"
    for u in ("A0", "A1", "A2"):
        held = sum(o.val for o in report.ledger.utxos().values() if m.script_eq(o.scr, c.std(RING.pk(u))))
        assert held - c.BTC == c.BTC


# -- 6 ---------------------------------------------------------------------------------


@criterion(6, "throne usurpation at twice the stake, old-king payout")
def test_kotet():
    report = c.run_scenario(c.kotet(RING))
    assert report.passed
    t0, t1 = report.tx("T0"), report.tx("T1")
    assert t1.outputs[1].val == 2 * t0.outputs[1].val
    assert outcome(report, "T1short") == "ScriptFalse@1"
    assert outcome(report, "T1selfpay") == "ScriptFalse@1"
    assert outcome(report, "withdrawByA1") == "ScriptFalse@1"
    assert outcome(report, "withdraw") == "accept"


# -- 7 ---------------------------------------------------------------------------------

PARENT = m.Transaction([], [m.Output(m.TRUE, 5, (7, b"k")), m.Output(m.FALSE, 3, ())])
CTX_TX = m.Transaction([m.OutputRef(PARENT.txid, 1), m.OutputRef(PARENT.txid, 2)],
                       [m.Output(m.TRUE, 1, (1,)), m.Output(m.FALSE, 2)],
                       [(1, b"s"), ()], 4, [2, 0])
RESOLVER = {PARENT.txid: PARENT}

BOTTOMS = [m.Rtxo("val", m.Const(9)), m.SeqAt(m.Wit(), m.Const(0)), m.After(m.Const(99), m.TRUE),
           m.AfterRel(m.Const(99), m.Const(1)), m.If(m.Const(1), m.TRUE, m.TRUE),
           m.BinOp("+", m.Const(b"x"), m.Const(1)), m.Size(m.TRUE)]


def strict_context(rng: random.Random, x: m.Expr) -> m.Expr:
    """Wrap ``x`` in a random operator position that must propagate bottom."""
    o = lambda ty: corpus.script(rng, ty, 2)  # noqa: E731
    return rng.choice([
        lambda: m.BinOp(rng.choice("+-<="), x, o(corpus.INT)),
        lambda: m.BinOp(rng.choice("+-<="), o(corpus.INT), x),
        lambda: m.If(x, o(corpus.BOOL), o(corpus.BOOL)),
        lambda: m.SeqAt(m.Vec((o(corpus.INT), o(corpus.INT))), x),
        lambda: m.SeqAt(x, m.Const(1)),
        lambda: m.Size(x),
        lambda: m.Hash(x),
        lambda: m.Versig((x, o(corpus.BYTES)), (o(corpus.BYTES),)),
        lambda: m.Versig((o(corpus.BYTES),), (x,)),
        lambda: rng.choice([m.After, m.AfterRel])(x, o(corpus.BOOL)),
        lambda: m.After(m.Const(0), x),
        lambda: rng.choice([m.Ctxo, m.Rtxo])(rng.choice(["arg", "scr", "val"]), x),
        lambda: m.Verscr(x, o(corpus.BOOL)),
        lambda: m.Verrec(x),
    ])()


def check_strictness(rng):
    e = rng.choice(BOTTOMS)
    for _ in range(rng.randint(1, 5)):
        e = strict_context(rng, e)
    i = rng.randint(1, 2)
    return evaluate(e, EvalContext(CTX_TX, i, RESOLVER, RING.scheme)) is BOT


class Unevaluable(m.Expr):
    """Evaluating this node raises; comparing it does not."""


def check_verscr(rng):
    quoted = corpus.script(rng, corpus.BOOL, 3)
    if rng.random() < 0.5:
        outputs = [m.Output(quoted, 1), m.Output(m.TRUE, 1)]
        probe, expected = quoted, True
    else:
        outputs = [m.Output(corpus.script(rng, corpus.BOOL, 2), 1), m.Output(m.TRUE, 1)]
        probe = m.and_(quoted, Unevaluable())
        expected = False
    rtx = m.Transaction([m.OutputRef(PARENT.txid, 1)], outputs, [()], 0, [0])
    got = evaluate(m.Verscr(m.Const(1), probe), EvalContext(rtx, 1, RESOLVER, RING.scheme))
    return got is expected


def check_roundtrip(rng):
    e = corpus.script(rng, corpus.BOOL, 4)
    return parse_script(render_script(e)) == e


KEYS = [RING.pk(f"K{j}") for j in range(6)]


def check_multisig(rng):
    n = rng.randint(0, 4)
    keys = rng.sample(range(6), n)
    sigs = []
    for _ in range(rng.randint(0, min(n + 1, 4))):
        pick = rng.random()
        if pick < 0.7 and keys:
            sigs.append(RING.sign(f"K{rng.choice(keys)}", CTX_TX))
        elif pick < 0.85:
            sigs.append(RING.sign(f"K{rng.randrange(6)}", CTX_TX))
        else:
            sigs.append(rng.randbytes(8))
    key_bytes = [KEYS[j] for j in keys]
    payload = crypto.signing_payload(CTX_TX)
    want = brute_multisig(key_bytes, sigs, lambda k, s: RING.scheme.verify(k, s, payload))
    return crypto.ver_multisig(key_bytes, sigs, CTX_TX, 1, RING.scheme) is want, want


@criterion(7, "interpreter properties over 1000 cases each")
def test_interpreter_properties():
    rng = random.Random(2024)
    assert all(check_strictness(rng) for _ in range(CASES))
    assert all(check_verscr(rng) for _ in range(CASES))
    assert all(check_roundtrip(rng) for _ in range(CASES))
    results = [check_multisig(rng) for _ in range(CASES)]
    assert all(ok for ok, _ in results)
    # both outcomes occur often enough to make the comparison meaningful
    accepted = sum(want for _, want in results)
    assert 100 < accepted < CASES - 100


# -- 8 ---------------------------------------------------------------------------------


@criterion(8, "value conservation and deterministic chain replay")
def test_ledger_properties(tmp_path):
    for name in c.SCENARIOS:
        report = c.run_scenario(c.build_scenario(name))
        assert report.passed
        state = lg.Ledger(faucet=report.ledger.faucet, scheme=report.ledger.scheme)
        for tx in report.ledger.transactions:
            state = state.append(tx)
            assert c.conservation_holds(state)
        d = tmp_path / name
        lg.save_chain(report.ledger, d)
        loaded = lg.load_chain(d)
        assert [t.txid for t in loaded.transactions] == [t.txid for t in report.ledger.transactions]
        assert loaded.utxos() == report.ledger.utxos()
        assert lg.validate_chain(d) == []
        again = c.run_scenario(c.build_scenario(name))
        assert [encoding.encode_tx(t) for t in again.ledger.transactions] == \
            [encoding.encode_tx(t) for t in report.ledger.transactions]
