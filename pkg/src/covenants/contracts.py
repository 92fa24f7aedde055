"""Covenant contracts: script builders, ready-made scenarios, and post-hoc ledger checks.

Amounts inside scripts are satoshi. Every builder returns a type-checked AST.
"""

from __future__ import annotations

from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from . import model as m
from .crypto import Keyring
from .ledger import Ledger, RejectReason
from .parser import SigRef
from .scenario import (Advance, Expectation, InputSpec, OutputSpec, Report, Scenario, TxStep,
                       run_scenario)

BTC = m.SATOSHI_PER_BTC

__all__ = [
    "BTC", "std", "cf_script", "nft_flawed", "nft_fixed", "nft_with_id", "vault_scripts",
    "vault_scripts_unordered", "recursive_vault_script", "pyramid_scripts", "kotet_scripts",
    "run_scenario", "Report", "SCENARIOS", "build_scenario", "conservation_holds",
    "propagation_problems", "unspent_value",
]


def _pk(x) -> m.Expr:
    return m.as_expr(x)


def std(pk) -> m.Script:
    """The plain pay-to-key script ``versig(pk; rtx.wit)``."""
    return m.checked(m.versig(_pk(pk)))


# -- builders ------------------------------------------------------------------


def cf_script(z, a_i, v: int, t: int) -> m.Script:
    """Crowdfunding deposit of contributor ``a_i`` towards target ``v`` with deadline ``t``.

    The collector ``z`` may spend it if output 1 pays at least ``v``; after
    ``t`` the contributor may take it back.
    """
    if v <= 0:
        raise ValueError("target must be positive")
    collect = m.and_(m.versig(_pk(z)), m.ge(m.Rtxo("val", m.Const(1)), m.Const(v)))
    refund = m.After(m.Const(t), m.versig(_pk(a_i)))
    return m.checked(m.or_(collect, refund))


def nft_flawed() -> m.Script:
    """Token script that checks only output 1, so two tokens can be merged into one."""
    return m.checked(m.and_(
        m.versig(m.Ctxo("arg", m.Const(1))),
        m.Verrec(m.Const(1)),
        m.eq(m.Rtxo("val", m.Const(1)), m.Const(BTC)),
    ))


def nft_fixed() -> m.Script:
    """Token script that checks the owner at the spent output and the output at the input's index."""
    return m.checked(m.and_(
        m.versig(m.Ctxo("arg", m.OutIdx())),
        m.Verrec(m.InIdx()),
        m.eq(m.Rtxo("val", m.InIdx()), m.Const(BTC)),
    ))


def nft_with_id(token_id: int) -> m.Script:
    """The flawed token script made distinguishable by a trivially true ``id = id`` clause."""
    return m.checked(m.and_(nft_flawed(), m.eq(m.Const(token_id), m.Const(token_id))))


def vault_scripts(a, ar, t: int) -> Tuple[m.Script, m.Script]:
    """Vault ``V`` and de-vaulting script ``S`` with recovery key ``ar`` and delay ``t``.

    The recovery disjunct of ``S`` is tested first: with a strict ``if``
    guard, a failed ``afterRel`` on the left would make the whole
    disjunction fail before the recovery key is ever checked.
    """
    s = m.or_(m.versig(_pk(ar)), m.AfterRel(m.Const(t), m.versig(m.Ctxo("arg", m.OutIdx()))))
    s = m.checked(s)
    v = m.checked(m.and_(m.versig(_pk(a)), m.Verscr(m.Const(1), s)))
    return v, s


def vault_scripts_unordered(a, ar, t: int) -> Tuple[m.Script, m.Script]:
    """Like :func:`vault_scripts` but with the timelocked disjunct first.

    Kept to show that this order blocks early cancellation.
    """
    s = m.or_(m.AfterRel(m.Const(t), m.versig(m.Ctxo("arg", m.OutIdx()))), m.versig(_pk(ar)))
    s = m.checked(s)
    return m.checked(m.and_(m.versig(_pk(a)), m.Verscr(m.Const(1), s))), s


def recursive_vault_script(a, ar, t: int) -> m.Script:
    """One script for both states: arg ``[0]`` is the vault, arg ``[1 B]`` is de-vaulting to B."""
    state = m.seqat(m.Ctxo("arg", m.Const(1)), 1)
    next_state = m.seqat(m.Rtxo("arg", m.Const(1)), 1)
    devault = m.and_(m.versig(_pk(a)), m.Verrec(m.Const(1)), m.eq(next_state, m.Const(1)))
    revault = m.and_(m.versig(_pk(ar)), m.Verrec(m.Const(1)), m.eq(next_state, m.Const(0)))
    withdraw = m.AfterRel(m.Const(t), m.versig(m.seqat(m.Ctxo("arg", m.Const(1)), 2)))
    return m.checked(m.If(m.eq(state, m.Const(0)), devault, m.or_(revault, withdraw)))


def pyramid_scripts() -> Tuple[m.Script, m.Script]:
    """``P`` pays 2 BTC to the owner at output 1 and re-seeds itself at outputs 2 and 3."""
    x = m.checked(m.versig(m.Ctxo("arg", m.OutIdx())))
    p = m.checked(m.and_(
        m.Verscr(m.Const(1), x),
        m.eq(m.Rtxo("arg", m.Const(1)), m.Ctxo("arg", m.OutIdx())),
        m.eq(m.Rtxo("val", m.Const(1)), m.Const(2 * BTC)),
        m.Verrec(m.Const(2)),
        m.Verrec(m.Const(3)),
    ))
    return p, x


def kotet_scripts() -> Tuple[m.Script, m.Script]:
    """Throne ``K`` (king in arg of output 1) and compensation ``X`` for the old king at output 2."""
    x = m.checked(m.versig(m.Ctxo("arg", m.Const(2))))
    old = m.Ctxo("val", m.Const(2))
    k = m.checked(m.and_(
        m.Verrec(m.Const(1)),
        m.eq(m.Rtxo("arg", m.Const(2)), m.Ctxo("arg", m.Const(1))),
        m.ge(m.Rtxo("val", m.Const(2)), m.BinOp("+", old, old)),
        m.Verscr(m.Const(2), x),
    ))
    return k, x


# -- ledger checks -------------------------------------------------------------


def conservation_holds(ledger: Ledger) -> bool:
    """Unspent value plus fees paid equals everything minted."""
    return ledger.utxo_value() + ledger.fees == ledger.minted


def unspent_value(ledger: Ledger, script: m.Script) -> int:
    return sum(o.val for o in ledger.utxos().values() if m.script_eq(o.scr, script))


def propagation_problems(ledger: Ledger, script: m.Script, outputs: Sequence[int]) -> List[str]:
    """Every transaction spending an output locked by ``script`` must carry
    ``script`` again at each of the given output indices."""
    problems = []
    for pos, tx in enumerate(ledger.transactions):
        if not any(m.script_eq(ledger.output(ref).scr, script) for ref in tx.inputs):
            continue
        for k in outputs:
            if k > len(tx.outputs) or not m.script_eq(tx.outputs[k - 1].scr, script):
                problems.append(f"position {pos}: output {k} does not carry the covenant")
    return problems


# -- scenarios -----------------------------------------------------------------

ACCEPT = Expectation()


def reject(reason: RejectReason, input: Optional[int] = None) -> Expectation:
    return Expectation(False, reason, input)


def spend(ref: str, index: int = 1, *signers: str, rel: int = 0) -> InputSpec:
    return InputSpec(ref, index, tuple(SigRef(s) for s in signers), rel)


def pay(scr: m.Script, val: int, *arg) -> OutputSpec:
    return OutputSpec(scr, val, tuple(arg))


def tx(name: str, inputs: Iterable[InputSpec], outputs: Iterable[OutputSpec],
       expect: Expectation = ACCEPT, abs_lock: int = 0) -> TxStep:
    return TxStep(name, tuple(inputs), tuple(outputs), abs_lock, expect)


def _scenario(name: str, keys: Sequence[str], keyring: Optional[Keyring], faucet: bool,
              description: str) -> Tuple[Scenario, Dict[str, bytes]]:
    sc = Scenario(name=name, keys=list(keys), faucet=faucet, keyring=keyring or Keyring(),
                  description=[f"# {line}".rstrip() for line in description.strip().splitlines()])
    return sc, {k: sc.keyring.pk(k) for k in keys}


def pure_bitcoin(keyring: Optional[Keyring] = None) -> Scenario:
    sc, pk = _scenario("pure_bitcoin", ["A", "B"], keyring, False, """
A coinbase pays 1 BTC to A; A transfers it to B.
A witness signed by the wrong key fails, the right one succeeds, a second spend fails.
""")
    sc.steps += [
        tx("T0", [], [pay(std(pk["A"]), BTC)]),
        tx("T1forged", [spend("T0", 1, "B")], [pay(std(pk["B"]), BTC)], reject(RejectReason.SCRIPT_FALSE, 1)),
        tx("T1", [spend("T0", 1, "A")], [pay(std(pk["B"]), BTC)]),
        tx("T1again", [spend("T0", 1, "A")], [pay(std(pk["A"]), BTC)], reject(RejectReason.DOUBLE_SPEND, 1)),
    ]
    return sc


CF_TARGET = BTC
CF_DEADLINE = 10


def crowdfunding(keyring: Optional[Keyring] = None) -> Scenario:
    sc, pk = _scenario("crowdfunding", ["Z", "A1", "A2", "A3"], keyring, True, f"""
Z raises at least 1 BTC by position {CF_DEADLINE}. A1 and A2 reach the target and Z
collects their deposits; A3's deposit is not collected and is refunded after the deadline.
""")
    cf = {a: cf_script(pk["Z"], pk[a], CF_TARGET, CF_DEADLINE) for a in ("A1", "A2", "A3")}
    sc.scripts.update({"CF1": cf["A1"], "CF2": cf["A2"], "CF3": cf["A3"]})
    sc.steps += [
        tx("fund", [], [pay(std(pk["A1"]), 60_000_000), pay(std(pk["A2"]), 50_000_000),
                        pay(std(pk["A3"]), 20_000_000)]),
        tx("T1", [spend("fund", 1, "A1")], [pay(cf["A1"], 60_000_000)]),
        tx("T2", [spend("fund", 2, "A2")], [pay(cf["A2"], 50_000_000)]),
        tx("T3", [spend("fund", 3, "A3")], [pay(cf["A3"], 20_000_000)]),
        tx("refundEarly", [spend("T1", 1, "A1")], [pay(std(pk["A1"]), 60_000_000)],
           reject(RejectReason.SCRIPT_BOT, 1)),
        tx("refundEarlyLocked", [spend("T1", 1, "A1")], [pay(std(pk["A1"]), 60_000_000)],
           reject(RejectReason.ABS_LOCK_NOT_MET), abs_lock=CF_DEADLINE),
        tx("collectShort", [spend("T1", 1, "Z"), spend("T2", 1, "Z")],
           [pay(std(pk["Z"]), CF_TARGET - 1), pay(std(pk["Z"]), 10_000_001)],
           reject(RejectReason.SCRIPT_BOT, 1)),
        tx("collect", [spend("T1", 1, "Z"), spend("T2", 1, "Z")], [pay(std(pk["Z"]), 110_000_000)]),
        Advance(CF_DEADLINE - 5),
        tx("refundByOther", [spend("T3", 1, "A1")], [pay(std(pk["A1"]), 20_000_000)],
           reject(RejectReason.SCRIPT_FALSE, 1), abs_lock=CF_DEADLINE),
        tx("refund", [spend("T3", 1, "A3")], [pay(std(pk["A3"]), 20_000_000)], abs_lock=CF_DEADLINE),
    ]
    return sc


def nft_attack(keyring: Optional[Keyring] = None) -> Scenario:
    sc, pk = _scenario("nft_attack", ["A", "B"], keyring, False, """
Tokens are minted and transferred. A owns two tokens TA and TA2 and merges them into one
token plus a plain output. The flawed script accepts this; the fixed one rejects it.
""")
    nft, fixed = nft_flawed(), nft_fixed()
    sc.scripts.update({"NFT": nft, "NFTfix": fixed})
    a, b = pk["A"], pk["B"]
    sc.steps += [
        tx("fund", [], [pay(std(a), BTC) for _ in range(6)]),
        tx("T0", [spend("fund", 1, "A")], [pay(nft, BTC, a)]),
        tx("T1", [spend("T0", 1, "A")], [pay(nft, BTC, b)]),
        tx("T1steal", [spend("T1", 1, "A")], [pay(nft, BTC, a)], reject(RejectReason.SCRIPT_FALSE, 1)),
        tx("TA", [spend("fund", 2, "A")], [pay(nft, BTC, a)]),
        tx("TA2", [spend("fund", 3, "A")], [pay(nft, BTC, a)]),
        tx("T2", [spend("TA", 1, "A"), spend("TA2", 1, "A")], [pay(nft, BTC, a), pay(std(a), BTC)]),
        tx("FA", [spend("fund", 4, "A")], [pay(fixed, BTC, a)]),
        tx("FA2", [spend("fund", 5, "A")], [pay(fixed, BTC, a)]),
        tx("F2", [spend("FA", 1, "A"), spend("FA2", 1, "A")], [pay(fixed, BTC, a), pay(std(a), BTC)],
           reject(RejectReason.SCRIPT_FALSE, 2)),
        tx("F2swap", [spend("FA", 1, "A"), spend("FA2", 1, "A")], [pay(std(a), BTC), pay(fixed, BTC, a)],
           reject(RejectReason.SCRIPT_FALSE, 1)),
        tx("Fjoint", [spend("FA", 1, "A"), spend("FA2", 1, "A")], [pay(fixed, BTC, b), pay(fixed, BTC, a)]),
        tx("Fnext", [spend("Fjoint", 1, "B")], [pay(fixed, BTC, a)]),
    ]
    return sc


def nft_id(keyring: Optional[Keyring] = None) -> Scenario:
    sc, pk = _scenario("nft_id", ["A", "B"], keyring, False, """
Tokens tagged with distinct ids cannot be redeemed together by one merging transaction.
""")
    n1, n2 = nft_with_id(101), nft_with_id(102)
    sc.scripts.update({"NFT1": n1, "NFT2": n2})
    a, b = pk["A"], pk["B"]
    sc.steps += [
        tx("fund", [], [pay(std(a), BTC), pay(std(a), BTC)]),
        tx("TA", [spend("fund", 1, "A")], [pay(n1, BTC, a)]),
        tx("TA2", [spend("fund", 2, "A")], [pay(n2, BTC, a)]),
        tx("T2", [spend("TA", 1, "A"), spend("TA2", 1, "A")], [pay(n1, BTC, a), pay(std(a), BTC)],
           reject(RejectReason.SCRIPT_FALSE, 2)),
        tx("T2other", [spend("TA", 1, "A"), spend("TA2", 1, "A")], [pay(n2, BTC, a), pay(std(a), BTC)],
           reject(RejectReason.SCRIPT_FALSE, 1)),
        tx("T1", [spend("TA", 1, "A")], [pay(n1, BTC, b)]),
        tx("T1b", [spend("TA2", 1, "A")], [pay(n2, BTC, b)]),
    ]
    return sc


VAULT_DELAY = 3


def vault(keyring: Optional[Keyring] = None) -> Scenario:
    sc, pk = _scenario("vault", ["A", "Ar", "B"], keyring, True, f"""
A keeps 1 BTC in a vault. Leaving the vault goes through a de-vaulting output that B can
spend {VAULT_DELAY} positions later, and that the recovery key Ar can recapture at any time.
""")
    v, s = vault_scripts(pk["A"], pk["Ar"], VAULT_DELAY)
    sc.scripts.update({"S": s, "V": v})
    a, b = pk["A"], pk["B"]
    sc.steps += [
        tx("fund", [], [pay(std(a), BTC), pay(std(a), BTC)]),
        tx("TV", [spend("fund", 1, "A")], [pay(v, BTC)]),
        tx("TVdirect", [spend("TV", 1, "A")], [pay(std(b), BTC)], reject(RejectReason.SCRIPT_FALSE, 1)),
        tx("TS", [spend("TV", 1, "A")], [pay(s, BTC, b)]),
        tx("Tearly", [spend("TS", 1, "B", rel=VAULT_DELAY - 1)], [pay(std(b), BTC)],
           reject(RejectReason.SCRIPT_BOT, 1)),
        tx("Tsoon", [spend("TS", 1, "B", rel=VAULT_DELAY)], [pay(std(b), BTC)],
           reject(RejectReason.REL_LOCK_NOT_MET, 1)),
        Advance(VAULT_DELAY - 1),
        tx("T", [spend("TS", 1, "B", rel=VAULT_DELAY)], [pay(std(b), BTC)]),
        tx("TV2", [spend("fund", 2, "A")], [pay(v, BTC)]),
        tx("TS2", [spend("TV2", 1, "A")], [pay(s, BTC, b)]),
        tx("Tthief", [spend("TS2", 1, "A", rel=VAULT_DELAY)], [pay(std(a), BTC)],
           reject(RejectReason.SCRIPT_FALSE, 1)),
        tx("Tcancel", [spend("TS2", 1, "Ar")], [pay(v, BTC)]),
    ]
    return sc


def recursive_vault(keyring: Optional[Keyring] = None, cycles: int = 3) -> Scenario:
    sc, pk = _scenario("recursive_vault", ["A", "Ar", "B", "M"], keyring, True, f"""
A single script keeps 1 BTC in a vault. A de-vaults towards B and Ar re-vaults it, {cycles}
times over; a thief holding both keys cannot move the coin out of the covenant. Finally B
withdraws after the delay.
""")
    r = recursive_vault_script(pk["A"], pk["Ar"], VAULT_DELAY)
    sc.scripts["R"] = r
    a, b, thief = pk["A"], pk["B"], pk["M"]
    sc.steps += [
        tx("fund", [], [pay(std(a), BTC)]),
        tx("TV", [spend("fund", 1, "A")], [pay(r, BTC, 0)]),
    ]
    prev = "TV"
    for k in range(1, cycles + 1):
        sc.steps += [
            tx(f"TS{k}", [spend(prev, 1, "A")], [pay(r, BTC, 1, b)]),
            tx(f"TR{k}", [spend(f"TS{k}", 1, "Ar")], [pay(r, BTC, 0)]),
        ]
        prev = f"TR{k}"
    sc.steps += [
        tx("stealVault", [spend(prev, 1, "A")], [pay(std(thief), BTC)], reject(RejectReason.SCRIPT_FALSE, 1)),
        tx("badState", [spend(prev, 1, "A")], [pay(r, BTC, 0, thief)], reject(RejectReason.SCRIPT_FALSE, 1)),
        tx("TSthief", [spend(prev, 1, "A")], [pay(r, BTC, 1, thief)]),
        tx("stealDevault", [spend("TSthief", 1, "Ar")], [pay(std(thief), BTC)],
           reject(RejectReason.SCRIPT_BOT, 1)),
        tx("TRrescue", [spend("TSthief", 1, "Ar")], [pay(r, BTC, 0)]),
        tx("TSlast", [spend("TRrescue", 1, "A")], [pay(r, BTC, 1, b)]),
        Advance(VAULT_DELAY - 1),
        tx("withdraw", [spend("TSlast", 1, "B", rel=VAULT_DELAY)], [pay(std(b), BTC)]),
    ]
    return sc


def pyramid(keyring: Optional[Keyring] = None) -> Scenario:
    users = [f"A{i}" for i in range(7)]
    sc, pk = _scenario("pyramid", users, keyring, False, """
A0 starts the scheme by burning 1 BTC; A1 and A2 join under A0, then A3, A4 under A1 and
A5, A6 under A2. Each recruiter collects 2 BTC, netting 1 BTC.
""")
    p, x = pyramid_scripts()
    sc.scripts.update({"X": x, "P": p})
    sc.steps.append(tx("fund", [], [pay(std(pk[u]), BTC) for u in users]))
    sc.steps.append(tx("T0", [spend("fund", 1, "A0")], [pay(p, 0, pk["A0"])]))

    def join(name, parent, out, owner, left, right, **kw):
        outs = kw.pop("outs", None) or [pay(x, 2 * BTC, pk[owner]), pay(p, 0, pk[left]), pay(p, 0, pk[right])]
        i, j = users.index(left) + 1, users.index(right) + 1
        return tx(name, [spend(parent, out), spend("fund", i, left), spend("fund", j, right)], outs, **kw)

    bad = reject(RejectReason.SCRIPT_FALSE, 1)
    a0, a1, a2 = pk["A0"], pk["A1"], pk["A2"]
    sc.steps += [
        join("T1lowval", "T0", 1, "A0", "A1", "A2", expect=bad,
             outs=[pay(x, BTC, a0), pay(p, 0, a1), pay(p, 0, a2)]),
        join("T1wrongscr", "T0", 1, "A0", "A1", "A2", expect=bad,
             outs=[pay(std(a0), 2 * BTC, a0), pay(p, 0, a1), pay(p, 0, a2)]),
        join("T1noverrec", "T0", 1, "A0", "A1", "A2", expect=bad,
             outs=[pay(x, 2 * BTC, a0), pay(p, 0, a1), pay(std(a2), 0, a2)]),
        join("T1", "T0", 1, "A0", "A1", "A2"),
        join("T2", "T1", 2, "A1", "A3", "A4"),
        join("T3", "T1", 3, "A2", "A5", "A6"),
        tx("payA1wrong", [spend("T2", 1, "A0")], [pay(std(a0), 2 * BTC)], bad),
    ]
    for owner, src in (("A0", "T1"), ("A1", "T2"), ("A2", "T3")):
        sc.steps.append(tx(f"pay{owner}", [spend(src, 1, owner)], [pay(std(pk[owner]), 2 * BTC)]))
    return sc


def kotet(keyring: Optional[Keyring] = None) -> Scenario:
    kings = ["A0", "A1", "A2", "A3"]
    sc, pk = _scenario("kotet", kings, keyring, False, """
A0 takes the throne paying 1 BTC. Each usurper must pay the previous king at least twice
what that king paid; the old king alone can withdraw the compensation.
""")
    k, x = kotet_scripts()
    sc.scripts.update({"X": x, "K": k})
    stakes = [BTC * 2 ** i for i in range(len(kings))]
    sc.steps.append(tx("fund", [], [pay(std(pk[a]), v) for a, v in zip(kings, stakes)]
                       + [pay(std(pk["A1"]), 2 * BTC - 1)]))
    a0, a1 = pk["A0"], pk["A1"]
    sc.steps.append(tx("T0", [spend("fund", 1, "A0")], [pay(k, 0, a0), pay(std(a0), stakes[0], a0)]))
    bad = reject(RejectReason.SCRIPT_FALSE, 1)
    sc.steps += [
        tx("T1short", [spend("T0", 1), spend("fund", 5, "A1")], [pay(k, 0, a1), pay(x, 2 * BTC - 1, a0)], bad),
        tx("T1selfpay", [spend("T0", 1), spend("fund", 2, "A1")], [pay(k, 0, a1), pay(x, 2 * BTC, a1)], bad),
        tx("T1plain", [spend("T0", 1), spend("fund", 2, "A1")], [pay(k, 0, a1), pay(std(a0), 2 * BTC, a0)], bad),
        tx("T1norec", [spend("T0", 1), spend("fund", 2, "A1")], [pay(std(a1), 0, a1), pay(x, 2 * BTC, a0)], bad),
    ]
    for i in range(1, len(kings)):
        new, old = kings[i], kings[i - 1]
        sc.steps.append(tx(f"T{i}", [spend(f"T{i - 1}", 1), spend("fund", i + 1, new)],
                           [pay(k, 0, pk[new]), pay(x, stakes[i], pk[old])]))
    sc.steps += [
        tx("withdrawByA1", [spend("T1", 2, "A1")], [pay(std(a1), 2 * BTC)], bad),
        tx("withdraw", [spend("T1", 2, "A0")], [pay(std(a0), 2 * BTC)]),
    ]
    return sc


SCENARIOS = {
    "pure-bitcoin": pure_bitcoin,
    "crowdfunding": crowdfunding,
    "nft-attack": nft_attack,
    "nft-id": nft_id,
    "vault": vault,
    "recursive-vault": recursive_vault,
    "pyramid": pyramid,
    "kotet": kotet,
}


def build_scenario(name: str, keyring: Optional[Keyring] = None) -> Scenario:
    return SCENARIOS[name](keyring)
