from __future__ import annotations

import io
from pathlib import Path

import pytest

from covenants import encoding
from covenants.cli import main
from covenants.crypto import Keyring
from covenants.formats import parse_tx
from covenants.parser import parse_script

ROOT = Path(__file__).resolve().parent.parent / "fixtures"
GENESIS = str(ROOT / "chain" / "genesis.txn")
SPEND = str(ROOT / "chain" / "spend.txn")
GENESIS_TXID = "7ea924000acf7c77540633a03914cb80ab0e9c16937908af729815130898b414"


def run(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out=out)
    return code, out.getvalue()


@pytest.fixture
def chain(tmp_path):
    d = tmp_path / "chain"
    assert run("append", GENESIS, "--chain", d) == (0, GENESIS_TXID + "\n")
    return d


def test_keygen_is_deterministic_and_reads_seeds():
    code, text = run("keygen", "--name", "A", "--name", "B")
    assert code == 0
    default = Keyring()
    assert text == f"A {default.pk('A').hex()}\nB {default.pk('B').hex()}\n"
    _, seeded = run("keygen", "--name", "A", "--keys", ROOT / "keys.toml")
    assert seeded != text.splitlines()[0] + "\n"
    assert run("keygen", "--name", "A")[1] == text.splitlines()[0] + "\n"


def test_parse_prints_canonical_text_and_hex():
    source = (ROOT / "nft.scr").read_text()
    assert run("parse", ROOT / "nft.scr") == (0, source)
    code, hexed = run("parse", ROOT / "nft.scr", "--format", "hex")
    assert code == 0
    assert bytes.fromhex(hexed.strip()) == encoding.encode_script(parse_script(source))


def test_parse_keeps_participant_names(tmp_path):
    f = tmp_path / "k.scr"
    f.write_text("versig(A B; rtx.wit)  or   after 3:true\n")
    assert run("parse", f) == (0, "versig(A B; rtx.wit) or (after 3 : true)\n")


def test_render_inverts_hex(tmp_path):
    _, hexed = run("parse", ROOT / "nft.scr", "--format", "hex")
    f = tmp_path / "s.hex"
    f.write_text(hexed)
    assert run("render", f) == (0, (ROOT / "nft.scr").read_text())
    f.write_text("zz")
    assert run("render", f)[0] == 2


def test_append_validate_and_utxos(chain, capsys):
    code, txid = run("append", SPEND, "--chain", chain)
    assert code == 0
    assert txid.strip() == parse_tx(Path(SPEND).read_text()).txid.hex()
    assert run("append", SPEND, "--chain", chain) == (1, "REJECT DoubleSpend\n")
    assert "rejected at input 1" in capsys.readouterr().err
    assert run("validate", chain) == (0, "OK 2\n")
    assert run("utxos", chain) == (0, f"{txid.strip()}:1 100000000\n")
    code, pretty = run("utxos", chain, "--pretty")
    b = Keyring().pk("B").hex()
    assert code == 0 and f"versig(0x{b}; rtx.wit)" in pretty and "1 outputs, 1.0 BTC" in pretty


def test_append_rejects_unknown_inputs(tmp_path):
    assert run("append", SPEND, "--chain", tmp_path / "c") == (1, "REJECT UnknownInput\n")
    assert not (tmp_path / "c").exists()


def test_second_coinbase_needs_faucet(chain, tmp_path):
    other = tmp_path / "cb.txn"
    other.write_text("tx\n  output val 2.0 scr true\nend\n")
    assert run("append", other, "--chain", chain) == (1, "REJECT CoinbaseNotAllowed\n")
    assert run("append", other, "--chain", chain, "--faucet")[0] == 0


def test_tx_build_binary_round_trip(chain, tmp_path):
    out = tmp_path / "spend.bin"
    code, text = run("tx-build", SPEND, "--out", out)
    assert code == 0 and out.read_bytes().startswith(encoding.TX_MAGIC)
    txid = encoding.decode_tx(out.read_bytes()).txid.hex()
    assert text == f"txid {txid}\n"
    assert run("append", out, "--chain", chain) == (0, txid + "\n")


def test_tx_build_hex_to_stdout(capsys):
    code, text = run("tx-build", GENESIS)
    assert code == 0
    assert encoding.decode_tx(bytes.fromhex(text.strip())).txid.hex() == GENESIS_TXID
    assert f"txid {GENESIS_TXID}" in capsys.readouterr().err


def test_eval_results_and_exit_codes(chain):
    args = ["--rtx", SPEND, "--chain", chain]
    assert run("eval", "--script", ROOT / "true.scr", *args) == (0, "true\n")
    assert run("eval", "--script", ROOT / "nft.scr", *args) == (1, "false\n")
    assert run("eval", "--script", ROOT / "true.scr", *args, "--input", 2)[0] == 2


def test_eval_bot_and_values(chain, tmp_path):
    f = tmp_path / "s.scr"
    f.write_text("after 5 : true\n")
    assert run("eval", "--script", f, "--rtx", SPEND, "--chain", chain) == (1, "bot\n")
    f.write_text("ctxo.val(1) = 100000000\n")
    assert run("eval", "--script", f, "--rtx", SPEND, "--chain", chain) == (0, "true\n")


def test_eval_without_parent_is_a_context_error(tmp_path, capsys):
    f = tmp_path / "s.scr"
    f.write_text("ctxo.val(1) = 1\n")
    assert run("eval", "--script", f, "--rtx", SPEND)[0] == 1
    assert "error" in capsys.readouterr().err


def test_wrong_scheme_fails_signatures(chain):
    code, text = run("eval", "--script", ROOT / "nft.scr", "--rtx", SPEND, "--chain", chain,
                     "--scheme", "transparent")
    assert (code, text) == (1, "false\n")


def test_validate_reports_problems(chain):
    (chain / "utxo").write_text("nonsense\n")
    code, text = run("validate", chain)
    assert code == 1 and text.startswith("PROBLEM ")


@pytest.mark.parametrize("name", ["pure-bitcoin", "nft-attack", "kotet"])
def test_scenario_run(name, tmp_path):
    code, text = run("scenario", "run", ROOT / "paper" / f"{name}.scn", "--save-chain", tmp_path / "c")
    lines = text.splitlines()
    assert code == 0 and lines and all(line.startswith("STEP ") and line.endswith(" PASS") for line in lines)
    assert run("validate", tmp_path / "c")[0] == 0


def test_scenario_failure_exit_code(tmp_path):
    text = (ROOT / "paper" / "pure-bitcoin.scn").read_text()
    f = tmp_path / "bad.scn"
    f.write_text(text.replace("tx T1 expect accept", "tx T1 expect reject ScriptFalse"))
    code, out = run("scenario", "run", f)
    assert code == 1
    assert "STEP T1 EXPECT ScriptFalse GOT accept FAIL" in out


def test_scenario_pretty_has_no_color_when_not_a_tty():
    code, text = run("scenario", "run", ROOT / "paper" / "vault.scn", "--pretty")
    assert code == 0 and "\033[" not in text
    assert text.rstrip().endswith("scenario vault: passed")


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["parse"],
    ["parse", "/no/such/file"],
    ["eval", "--script", "x"],
    ["keygen", "--name", "A", "--scheme", "rot13"],
])
def test_usage_errors(argv):
    assert run(*argv)[0] == 2


def test_syntax_error_reports_position(tmp_path, capsys):
    f = tmp_path / "bad.scr"
    f.write_text("true and\n  (1 = )\n")
    assert run("parse", f)[0] == 2
    assert "line 2" in capsys.readouterr().err


def test_type_and_name_errors(tmp_path):
    f = tmp_path / "bad.scr"
    f.write_text("1 + true\n")
    assert run("parse", f)[0] == 2
    f.write_text("versig(Nobody; rtx.wit) and nope\n")
    assert run("parse", f)[0] == 2


def test_validate_on_plain_directory(tmp_path):
    assert run("validate", tmp_path)[0] == 2
