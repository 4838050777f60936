"""Key and signature tests, cross-checked against the `cryptography`
package as an independent secp256k1/ECDSA implementation."""

import pytest
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.hazmat.primitives.asymmetric.utils import (
    decode_dss_signature, encode_dss_signature)
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat
from hypothesis import given, settings, strategies as st

from ddns.errors import InvalidAddressError, InvalidKeyError, InvalidSeedError
from ddns.keys import (ADDRESS_VERSION, MULTISIG_VERSION, N,
                       Signature, decode_address, decode_point,
                       encode_point, generate_keypair, multisig_address, sign,
                       verify)

SEED = b"\x42" * 32


def _oracle_private(sk: int):
    return ec.derive_private_key(sk, ec.SECP256K1())


def test_public_key_matches_oracle():
    kp = generate_keypair(SEED)
    oracle = _oracle_private(kp.secret_key).public_key()
    compressed = oracle.public_bytes(Encoding.X962, PublicFormat.CompressedPoint)
    assert kp.public_key == compressed


def test_our_signature_verifies_under_oracle():
    kp = generate_keypair(SEED)
    message = b"transfer DDNS/EXAMPLE to PXYZ"
    sig = sign(kp.secret_key, message)
    oracle_pub = _oracle_private(kp.secret_key).public_key()
    oracle_pub.verify(encode_dss_signature(sig.r, sig.s), message,
                      ec.ECDSA(hashes.SHA256()))  # raises on failure


def test_oracle_signature_verifies_under_ours():
    kp = generate_keypair(SEED)
    message = b"register DDNS/ORACLE"
    der = _oracle_private(kp.secret_key).sign(
        message, ec.ECDSA(hashes.SHA256(), deterministic_signing=True))
    r, s = decode_dss_signature(der)
    assert verify(kp.public_key, message, Signature(r, s))


def test_rfc6979_nonce_matches_oracle():
    # Same deterministic nonce scheme: r must agree; s may differ only by
    # our low-s normalization.
    kp = generate_keypair(SEED)
    message = b"deterministic nonce check"
    ours = sign(kp.secret_key, message)
    der = _oracle_private(kp.secret_key).sign(
        message, ec.ECDSA(hashes.SHA256(), deterministic_signing=True))
    r, s = decode_dss_signature(der)
    assert ours.r == r
    assert ours.s in (s, N - s)


def test_signing_is_deterministic_and_low_s():
    kp = generate_keypair(SEED)
    sig1 = sign(kp.secret_key, b"msg")
    sig2 = sign(kp.secret_key, b"msg")
    assert sig1 == sig2
    assert sig1.s <= N // 2


def test_verify_rejects_tampered_message():
    kp = generate_keypair(SEED)
    sig = sign(kp.secret_key, b"original")
    assert verify(kp.public_key, b"original", sig)
    assert not verify(kp.public_key, b"originaj", sig)


def test_verify_rejects_wrong_key():
    a = generate_keypair(b"\x01" * 32)
    b = generate_keypair(b"\x02" * 32)
    sig = sign(a.secret_key, b"msg")
    assert not verify(b.public_key, b"msg", sig)


def test_verify_rejects_out_of_range_signature():
    kp = generate_keypair(SEED)
    assert not verify(kp.public_key, b"msg", Signature(0, 1))
    assert not verify(kp.public_key, b"msg", Signature(1, N))


def test_malformed_public_key_raises():
    with pytest.raises(InvalidKeyError):
        decode_point(b"\x02" + b"\x00" * 31)  # wrong length
    with pytest.raises(InvalidKeyError):
        decode_point(b"\x05" + b"\x11" * 32)  # bad prefix
    with pytest.raises(InvalidKeyError):
        verify(b"\xff" * 33, b"msg", Signature(1, 1))


def test_seed_validation():
    with pytest.raises(InvalidSeedError):
        generate_keypair(b"short")
    with pytest.raises(InvalidSeedError):
        generate_keypair(b"\x00" * 32)  # zero scalar


def test_signature_bytes_round_trip():
    kp = generate_keypair(SEED)
    sig = sign(kp.secret_key, b"payload")
    assert Signature.from_bytes(sig.to_bytes()) == sig
    with pytest.raises(InvalidKeyError):
        Signature.from_bytes(b"\x00" * 63)


def test_point_encoding_round_trip():
    kp = generate_keypair(SEED)
    assert encode_point(decode_point(kp.public_key)) == kp.public_key


def test_address_shape_and_version():
    kp = generate_keypair(SEED)
    version, payload = decode_address(kp.address)
    assert version == ADDRESS_VERSION
    assert len(payload) == 20
    assert kp.address.startswith("P")


def test_decode_address_rejects_garbage():
    with pytest.raises(InvalidAddressError):
        decode_address("not-an-address")
    # valid base58check but wrong version byte
    from ddns.encoding import b58check_encode
    with pytest.raises(InvalidAddressError):
        decode_address(b58check_encode(0x00, b"\x01" * 20))


def test_multisig_address_is_order_independent():
    keys = [generate_keypair(bytes([i]) * 32).public_key for i in (1, 2, 3)]
    addr = multisig_address(keys)
    assert multisig_address(list(reversed(keys))) == addr
    version, _ = decode_address(addr)
    assert version == MULTISIG_VERSION


@settings(max_examples=25, deadline=None)
@given(st.binary(min_size=32, max_size=32).filter(lambda s: any(s)),
       st.binary(max_size=200))
def test_sign_verify_property(seed, message):
    kp = generate_keypair(seed)
    sig = sign(kp.secret_key, message)
    assert verify(kp.public_key, message, sig)
    assert sig.s <= N // 2


@settings(max_examples=15, deadline=None)
@given(st.binary(min_size=32, max_size=32).filter(lambda s: any(s)))
def test_keypair_matches_oracle_property(seed):
    kp = generate_keypair(seed)
    oracle = _oracle_private(kp.secret_key).public_key()
    assert kp.public_key == oracle.public_bytes(
        Encoding.X962, PublicFormat.CompressedPoint)
