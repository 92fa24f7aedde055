from __future__ import annotations

import random

import pytest
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
from hypothesis import given, settings
from hypothesis import strategies as st

from covenants import crypto
from covenants import model as m

from oracle import brute_multisig

TX = m.Transaction([m.OutputRef(b"\x07" * 32, 1)], [m.Output(m.TRUE, 5)])


@pytest.mark.parametrize("data, digest", [
    (b"", "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"),
    (b"abc", "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"),
])
def test_sha256_vectors(data, digest):
    assert crypto.hash_bytes(data).hex() == digest


def test_hash_separates_trailing_zero():
    rng = random.Random(3)
    for _ in range(10_000):
        x = rng.randbytes(rng.randint(0, 40))
        assert crypto.hash_bytes(x) != crypto.hash_bytes(x + b"\x00")


def test_ed25519_backend_matches_rfc8032_vector():
    sk = bytes.fromhex("9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60")
    key = Ed25519PrivateKey.from_private_bytes(sk)
    pk = key.public_key().public_bytes(serialization.Encoding.Raw, serialization.PublicFormat.Raw)
    assert pk.hex() == "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a"
    assert key.sign(b"").hex() == (
        "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e065224901555"
        "fb8821590a33bacc61e39701cf9b46bd25bf5f0595bbe24655141438e7a100b")


@pytest.mark.parametrize("scheme", list(crypto.SCHEMES.values()), ids=list(crypto.SCHEMES))
def test_sign_verify(scheme):
    ring = crypto.Keyring(scheme)
    sig = ring.sign("A", TX)
    assert crypto.verify_one(ring.pk("A"), sig, TX, scheme)
    assert not crypto.verify_one(ring.pk("B"), sig, TX, scheme)
    other = m.Transaction(TX.inputs, [m.Output(m.TRUE, 6)])
    assert not crypto.verify_one(ring.pk("A"), sig, other, scheme)


def test_signature_ignores_witnesses():
    ring = crypto.Keyring()
    sig = ring.sign("A", TX)
    assert ring.sign("A", TX.with_witnesses([(sig, 1, b"x")])) == sig


def test_keys_are_deterministic_and_seedable():
    assert crypto.Keyring().pk("A") == crypto.Keyring().pk("A")
    assert crypto.Keyring().pk("A") != crypto.Keyring().pk("B")
    seeded = crypto.Keyring(seeds={"A": "B"})
    assert seeded.pk("A") == crypto.Keyring().pk("B")


def test_keyring_from_toml():
    ring = crypto.Keyring.from_toml('scheme = "transparent"\n[keys]\nA = "seed-a"\n')
    assert ring.scheme.name == "transparent"
    assert ring.pk("A") == crypto.Keyring(crypto.TransparentScheme(), {"A": "seed-a"}).pk("A")


def test_malformed_inputs_never_verify():
    scheme = crypto.DEFAULT_SCHEME
    pk = crypto.Keyring().pk("A")
    assert not scheme.verify(pk, b"short", b"m")
    assert not scheme.verify(b"\x00" * 31, b"\x00" * 64, b"m")
    assert not crypto.ver_multisig([pk], [5], TX, 1)
    assert not crypto.ver_multisig([1], [], TX, 1)


def test_multisig_edge_cases():
    ring = crypto.Keyring()
    a, b, c = (ring.pk(x) for x in "ABC")
    sa, sb, sc = (ring.sign(x, TX) for x in "ABC")
    assert crypto.ver_multisig([a, b], [], TX, 1)
    assert crypto.ver_multisig([a, b, c], [sa, sc], TX, 1)
    assert not crypto.ver_multisig([a, b, c], [sc, sa], TX, 1)
    assert not crypto.ver_multisig([a], [sa, sa], TX, 1)
    assert not crypto.ver_multisig([a, b], [sa, sa], TX, 1)


NAMES = "ABCDEF"


@st.composite
def multisig_cases(draw):
    n = draw(st.integers(0, 4))
    keys = [draw(st.sampled_from(NAMES)) for _ in range(n)]
    m_ = draw(st.integers(0, n + 1))
    sigs = [draw(st.one_of(st.sampled_from(NAMES), st.just(None))) for _ in range(m_)]
    return keys, sigs


def _check_against_oracle(ring, keys, sigs):
    pks = [ring.pk(k) for k in keys]
    raw = [ring.sign(s, TX) if s else b"\x00" * 64 for s in sigs]
    payload = crypto.signing_payload(TX)
    expected = brute_multisig(pks, raw, lambda k, s: ring.scheme.verify(k, s, payload))
    assert crypto.ver_multisig(pks, raw, TX, 1, ring.scheme) == expected


@settings(max_examples=300)
@given(multisig_cases())
def test_multisig_matches_subsequence_oracle(case):
    _check_against_oracle(crypto.Keyring(crypto.TransparentScheme()), *case)


@settings(max_examples=100)
@given(multisig_cases())
def test_multisig_matches_oracle_ed25519(case):
    _check_against_oracle(crypto.Keyring(), *case)
