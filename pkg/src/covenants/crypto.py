"""Hashing, keys, transaction signatures and multi-signature verification.

Signatures cover the transaction with every witness slot cleared, so a
signature never depends on witness content (including other signatures).
The input index is not part of the signed data.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Protocol, Sequence

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey

from . import encoding
from .model import Transaction


def hash_bytes(data: bytes) -> bytes:
    """SHA-256."""
    return hashlib.sha256(data).digest()


def signing_payload(tx: Transaction) -> bytes:
    return encoding.encode_tx(tx.without_witnesses())


@dataclass(frozen=True)
class KeyPair:
    sk: bytes
    pk: bytes


class SignatureScheme(Protocol):
    name: str

    def keypair(self, seed: bytes) -> KeyPair: ...

    def sign(self, sk: bytes, message: bytes) -> bytes: ...

    def verify(self, pk: bytes, sig: bytes, message: bytes) -> bool: ...


class Ed25519Scheme:
    """Ed25519 over the SHA-256 digest of the message (deterministic by construction)."""

    name = "ed25519"

    def keypair(self, seed: bytes) -> KeyPair:
        sk = hash_bytes(seed)
        pk = Ed25519PrivateKey.from_private_bytes(sk).public_key().public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw)
        return KeyPair(sk, pk)

    def sign(self, sk: bytes, message: bytes) -> bytes:
        return Ed25519PrivateKey.from_private_bytes(sk).sign(hash_bytes(message))

    def verify(self, pk: bytes, sig: bytes, message: bytes) -> bool:
        if len(pk) != 32 or len(sig) != 64:
            return False
        try:
            Ed25519PublicKey.from_public_bytes(pk).verify(sig, hash_bytes(message))
        except (InvalidSignature, ValueError):
            return False
        return True


class TransparentScheme:
    """Readable, insecure scheme for fixtures: ``sig = tag || H(sk || msg)``.

    The public key embeds the secret key, so anyone can forge. Never use it
    for anything but tests.
    """

    name = "transparent"
    TAG = b"tsig"

    def keypair(self, seed: bytes) -> KeyPair:
        sk = hash_bytes(seed)[:8]
        return KeyPair(sk, self.TAG + sk)

    def sign(self, sk: bytes, message: bytes) -> bytes:
        return self.TAG + hash_bytes(sk + message)

    def verify(self, pk: bytes, sig: bytes, message: bytes) -> bool:
        if not pk.startswith(self.TAG):
            return False
        return sig == self.sign(pk[len(self.TAG):], message)


DEFAULT_SCHEME = Ed25519Scheme()
SCHEMES = {s.name: s for s in (DEFAULT_SCHEME, TransparentScheme())}


def key_from_name(name: str, scheme: SignatureScheme = DEFAULT_SCHEME, seed: str | None = None) -> KeyPair:
    """Deterministic key pair for a participant name (or an explicit seed)."""
    return scheme.keypair(b"covenants-key:" + (seed if seed is not None else name).encode())


def sign(sk: bytes, tx: Transaction, scheme: SignatureScheme = DEFAULT_SCHEME) -> bytes:
    return scheme.sign(sk, signing_payload(tx))


def verify_one(pk: bytes, sig: bytes, tx: Transaction, scheme: SignatureScheme = DEFAULT_SCHEME) -> bool:
    return scheme.verify(pk, sig, signing_payload(tx))


def ver_multisig(keys: Sequence, sigs: Sequence, tx: Transaction, i: int,
                 scheme: SignatureScheme = DEFAULT_SCHEME) -> bool:
    """True iff the m signatures verify against m of the n keys, in order.

    Matching is greedy left to right, as in CHECKMULTISIG. ``i`` only locates
    the witness and does not enter the signed payload. An empty signature
    list verifies trivially. Non-bytes entries make the check fail.
    """
    if not all(isinstance(x, bytes) for x in (*keys, *sigs)):
        return False
    if len(sigs) > len(keys):
        return False
    payload = signing_payload(tx)
    k = 0
    for sig in sigs:
        while k < len(keys) and not scheme.verify(keys[k], sig, payload):
            k += 1
        if k == len(keys):
            return False
        k += 1
    return True


class Keyring:
    """Named participants with deterministically derived keys."""

    def __init__(self, scheme: SignatureScheme = DEFAULT_SCHEME, seeds: dict[str, str] | None = None):
        self.scheme = scheme
        self.seeds = dict(seeds or {})
        self._keys: dict[str, KeyPair] = {}

    def __getitem__(self, name: str) -> KeyPair:
        if name not in self._keys:
            self._keys[name] = key_from_name(name, self.scheme, self.seeds.get(name))
        return self._keys[name]

    def pk(self, name: str) -> bytes:
        return self[name].pk

    def sign(self, name: str, tx: Transaction) -> bytes:
        return sign(self[name].sk, tx, self.scheme)

    @classmethod
    def from_toml(cls, text: str) -> Keyring:
        """Parse a keys file: ``[keys]`` table of name = seed, optional top-level ``scheme``."""
        try:
            import tomllib
        except ImportError:  # Python < 3.11
            import tomli as tomllib
        data = tomllib.loads(text)
        scheme = SCHEMES[data.get("scheme", DEFAULT_SCHEME.name)]
        return cls(scheme, {str(k): str(v) for k, v in data.get("keys", {}).items()})
