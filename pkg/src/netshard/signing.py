"""Pluggable transaction signatures.

The bundled :class:`TestScheme` is deterministic and keyless from the
outside: a user's secret is derived from its address, and a signature is
``sha256(payload || secret)``.  It authenticates well enough for a simulator
and is trivially forgeable by anyone who reads this file.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import replace
from typing import Protocol

from .codec import signing_payload
from .core import DebitTx


class SignatureScheme(Protocol):
    def sign(self, user: bytes, message: bytes) -> bytes: ...

    def verify(self, user: bytes, message: bytes, signature: bytes) -> bool: ...


class TestScheme:
    __test__ = False  # keep pytest from collecting this class

    def secret(self, user: bytes) -> bytes:
        return hashlib.sha256(b"netshard-test-key" + user).digest()

    def sign(self, user: bytes, message: bytes) -> bytes:
        return hashlib.sha256(message + self.secret(user)).digest()

    def verify(self, user: bytes, message: bytes, signature: bytes) -> bool:
        if not isinstance(signature, (bytes, bytearray)) or len(signature) != 32:
            return False
        return hmac.compare_digest(self.sign(user, message), bytes(signature))


DEFAULT_SCHEME = TestScheme()


def sign_debit(tx: DebitTx, scheme: SignatureScheme = DEFAULT_SCHEME, signer: bytes | None = None) -> DebitTx:
    """Return ``tx`` signed by ``signer`` (the sender by default)."""
    user = tx.sender.user if signer is None else signer
    return replace(tx, signature=scheme.sign(user, signing_payload(tx)))


def verify_signature(tx: DebitTx, scheme: SignatureScheme = DEFAULT_SCHEME) -> bool:
    try:
        payload = signing_payload(tx)
    except Exception:
        return False
    return scheme.verify(tx.sender.user, payload, tx.signature)
