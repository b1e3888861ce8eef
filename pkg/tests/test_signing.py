from dataclasses import replace

from netshard.core import DebitTx, tx_id
from netshard.signing import DEFAULT_SCHEME, sign_debit, verify_signature

from .conftest import ep


def tx(amount=10):
    return DebitTx(tx_id("t"), ep(0, 0, "alice"), ep(1, 0, "bob"), amount)


class TestSignatures:
    def test_sender_key_verifies(self):
        assert verify_signature(sign_debit(tx()))

    def test_mutated_amount_fails(self):
        signed = sign_debit(tx())
        assert not verify_signature(replace(signed, amount=11))

    def test_other_key_fails(self):
        assert not verify_signature(sign_debit(tx(), signer=ep(0, 0, "mallory").user))

    def test_unsigned_and_malformed(self):
        assert not verify_signature(tx())
        assert not verify_signature(replace(sign_debit(tx()), signature=b"\x00" * 31))
        assert not verify_signature(replace(sign_debit(tx()), amount=-1))

    def test_deterministic(self):
        assert DEFAULT_SCHEME.sign(b"u" * 20, b"m") == DEFAULT_SCHEME.sign(b"u" * 20, b"m")
