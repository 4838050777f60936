"""Domain-asset semantics layered on the ledger.

Each registered domain is a unique asset "ROOT_TLD/NAME" binding the
name to an owner address and a content id. Registration under root
"DDNS" is subsidized (zero fee); every other root pays 0.1 PHI.
Ownership may be a single key or a 2-of-3 multisig policy whose
commitment hash sits in the owner-address slot.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from .chain import (AssetOperation, ChainState, REGISTRATION_FEE, Transaction,
                    TxOutput, ValidationResult, invalid, sign_transaction, valid)
from .errors import DdnsError, InvalidAddressError
from .keys import (KeyPair, Signature, decode_address, derive_address,
                   multisig_address, verify, MULTISIG_VERSION)
from .store import decode_content_id

SUBSIDIZED_ROOT = "DDNS"
RESERVED_ROOTS = frozenset({"DDNS", "PHI"})
MULTISIG_THRESHOLD = 2
MULTISIG_KEYS = 3

_SEGMENT_RE = re.compile(r"^[A-Z0-9_.]{1,30}$")


@dataclass(frozen=True)
class DomainAsset:
    asset_name: str
    owner_address: str
    ipfs_hash: str | None
    quantity: int = 1
    units: int = 1
    reissuable: bool = False

    @property
    def has_ipfs(self) -> bool:
        return self.ipfs_hash is not None

    def to_dict(self) -> dict:
        return {
            "asset_name": self.asset_name,
            "quantity": self.quantity,
            "units": self.units,
            "reissuable": self.reissuable,
            "has_ipfs": self.has_ipfs,
            "ipfs_hash": self.ipfs_hash,
            "owner_address": self.owner_address,
        }


# ---------------------------------------------------------------------------
# Names


def validate_asset_name(name: str) -> ValidationResult:
    parts = name.split("/")
    if len(parts) != 2 or not all(parts):
        return invalid("bad-structure", "expected ROOT_TLD/DOMAIN_NAME")
    for segment in parts:
        if len(segment) > 30:
            return invalid("bad-length", f"segment {segment!r} longer than 30")
        if not _SEGMENT_RE.match(segment):
            return invalid("bad-charset", f"segment {segment!r} has invalid characters")
        if segment[0] in "._" or segment[-1] in "._":
            return invalid("bad-structure", f"segment {segment!r} starts/ends with '.' or '_'")
        if ".." in segment:
            return invalid("bad-structure", f"segment {segment!r} has consecutive dots")
    return valid()


def asset_to_dns(asset_name: str) -> str:
    root, domain = asset_name.split("/")
    return f"{domain.lower()}.{root.lower()}"


def dns_to_asset(dns_name: str) -> str:
    labels = dns_name.lower().rstrip(".").rsplit(".", 1)
    if len(labels) != 2 or not all(labels):
        raise DdnsError(f"not a registrable two-label name: {dns_name!r}")
    domain, tld = labels
    return f"{tld.upper()}/{domain.upper()}"


def lookup_domain(state: ChainState, name: str) -> DomainAsset | None:
    """Accepts either asset form ("DDNS/EXAMPLE") or DNS form ("example.ddns")."""
    if "/" not in name:
        name = dns_to_asset(name)
    else:
        name = name.upper()
    result = validate_asset_name(name)
    if not result.ok:
        raise DdnsError(f"invalid name: {result.code}")
    return state.assets.get(name)


# ---------------------------------------------------------------------------
# Operation validation (called from chain.validate_transaction)


def _op_is_subsidizable(asset_name: str) -> bool:
    return asset_name.split("/")[0] == SUBSIDIZED_ROOT


def _verify_auth(op: AssetOperation, signing_bytes: bytes,
                 expected_owner: str) -> ValidationResult:
    """Check op.auth signatures against a single-key or multisig owner."""
    try:
        version, _ = decode_address(expected_owner)
    except InvalidAddressError:
        return invalid("asset-rule-violation", "owner address undecodable")
    if version == MULTISIG_VERSION:
        if len(op.policy_keys) != MULTISIG_KEYS:
            return invalid("not-owner", "multisig owner requires 3 policy keys")
        if len(set(op.policy_keys)) != MULTISIG_KEYS:
            return invalid("not-owner", "policy keys must be distinct")
        if multisig_address(list(op.policy_keys)) != expected_owner:
            return invalid("not-owner", "policy keys do not match owner commitment")
        signers = set()
        for pubkey, sig in op.auth:
            if pubkey not in op.policy_keys:
                continue
            try:
                if verify(pubkey, signing_bytes, Signature.from_bytes(sig)):
                    signers.add(pubkey)
            except Exception:
                continue
        if len(signers) < MULTISIG_THRESHOLD:
            return invalid("not-owner",
                           f"{len(signers)} valid policy signatures, need {MULTISIG_THRESHOLD}")
        return valid()
    for pubkey, sig in op.auth:
        try:
            if derive_address(pubkey) != expected_owner:
                continue
            if verify(pubkey, signing_bytes, Signature.from_bytes(sig)):
                return valid()
        except Exception:
            continue
    return invalid("not-owner", "no valid signature by the current owner")


def check_asset_operation(tx: Transaction, state: ChainState, fee: int) -> ValidationResult:
    op = tx.asset_op
    name_check = validate_asset_name(op.asset_name)
    if not name_check.ok:
        return invalid("invalid-name", f"{name_check.code}: {name_check.detail}")
    signing = tx.signing_bytes
    if op.kind == "register":
        if op.asset_name in state.assets:
            return invalid("name-taken", op.asset_name)
        if op.new_content_id is None:
            return invalid("asset-rule-violation", "register requires a content id")
        try:
            decode_content_id(op.new_content_id)
        except Exception:
            return invalid("asset-rule-violation", "malformed content id")
        if op.subsidized:
            if not _op_is_subsidizable(op.asset_name):
                return invalid("asset-rule-violation",
                               "only DDNS registrations are subsidized")
        elif fee < REGISTRATION_FEE:
            return invalid("insufficient-funds",
                           f"fee {fee} below registration fee {REGISTRATION_FEE}")
        owner = _registration_owner(op)
        if owner is None:
            return invalid("asset-rule-violation", "cannot determine new owner")
        return _verify_auth(op, signing, owner)
    asset = state.assets.get(op.asset_name)
    if asset is None:
        return invalid("unknown-domain", op.asset_name)
    if op.kind == "update":
        if op.new_content_id is None:
            return invalid("asset-rule-violation", "update requires a content id")
        try:
            decode_content_id(op.new_content_id)
        except Exception:
            return invalid("asset-rule-violation", "malformed content id")
        return _verify_auth(op, signing, asset.owner_address)
    if op.kind == "transfer":
        if op.new_owner is None:
            return invalid("asset-rule-violation", "transfer requires a new owner")
        try:
            decode_address(op.new_owner)
        except InvalidAddressError:
            return invalid("invalid-address", op.new_owner)
        return _verify_auth(op, signing, asset.owner_address)
    return invalid("asset-rule-violation", f"unknown kind {op.kind!r}")


def _registration_owner(op: AssetOperation) -> str | None:
    if op.policy_keys:
        if len(op.policy_keys) != MULTISIG_KEYS or len(set(op.policy_keys)) != MULTISIG_KEYS:
            return None
        try:
            return multisig_address(list(op.policy_keys))
        except Exception:
            return None
    if op.new_owner is not None:
        return op.new_owner
    if op.auth:
        try:
            return derive_address(op.auth[0][0])
        except Exception:
            return None
    return None


def apply_asset_operation(assets: dict, op: AssetOperation) -> dict:
    """Fold one confirmed operation into the asset index (pre-validated)."""
    if op.kind == "register":
        assets[op.asset_name] = DomainAsset(
            op.asset_name, _registration_owner(op), op.new_content_id)
    elif op.kind == "update":
        assets[op.asset_name] = replace(assets[op.asset_name],
                                        ipfs_hash=op.new_content_id)
    elif op.kind == "transfer":
        assets[op.asset_name] = replace(assets[op.asset_name],
                                        owner_address=op.new_owner)
    return assets


# ---------------------------------------------------------------------------
# Transaction builders


def _select_funding(state: ChainState, address: str, amount: int):
    chosen = []
    total = 0
    for key in sorted(state.utxos):
        out = state.utxos[key]
        if out.recipient != address or out.carried_asset is not None:
            continue
        chosen.append((key, out))
        total += out.value
        if total >= amount:
            return chosen, total
    raise DdnsError(f"insufficient funds: have {total}, need {amount}")


def _funded_asset_tx(op: AssetOperation, owner: KeyPair, state: ChainState,
                     fee: int, nonce: int) -> Transaction:
    from .chain import TxInput
    address = owner.address
    inputs = ()
    outputs = ()
    if fee > 0:
        chosen, total = _select_funding(state, address, fee)
        inputs = tuple(TxInput(txid, idx, owner.public_key)
                       for (txid, idx), _ in chosen)
        change = total - fee
        if change > 0:
            outputs = (TxOutput(change, address),)
    tx = Transaction(inputs, outputs, op, nonce)
    return sign_transaction(tx, owner)


def register_domain(name: str, control_file_id: str, owner: KeyPair,
                    state: ChainState, nonce: int = 0) -> Transaction:
    """Build and sign a registration transaction (not yet broadcast)."""
    name = name.upper()
    check = validate_asset_name(name)
    if not check.ok:
        raise DdnsError(f"invalid name: {check.code}: {check.detail}")
    if name in state.assets:
        raise DdnsError(f"name taken: {name}")
    subsidized = _op_is_subsidizable(name)
    fee = 0 if subsidized else REGISTRATION_FEE
    op = AssetOperation("register", name, new_content_id=control_file_id,
                        fee_paid=fee, subsidized=subsidized,
                        auth=((owner.public_key, b"\x00" * 64),))
    return _funded_asset_tx(op, owner, state, fee, nonce)


def update_domain(name: str, new_content_id: str, signer: KeyPair,
                  state: ChainState, nonce: int = 0) -> Transaction:
    name = name.upper()
    if name not in state.assets:
        raise DdnsError(f"unknown domain: {name}")
    op = AssetOperation("update", name, new_content_id=new_content_id,
                        auth=((signer.public_key, b"\x00" * 64),))
    return sign_transaction(Transaction((), (), op, nonce), signer)


def transfer_domain(name: str, new_owner: str, signer: KeyPair,
                    state: ChainState, nonce: int = 0) -> Transaction:
    name = name.upper()
    if name not in state.assets:
        raise DdnsError(f"unknown domain: {name}")
    decode_address(new_owner)
    op = AssetOperation("transfer", name, new_owner=new_owner,
                        auth=((signer.public_key, b"\x00" * 64),))
    return sign_transaction(Transaction((), (), op, nonce), signer)


# ---------------------------------------------------------------------------
# Multisig policies


@dataclass(frozen=True)
class MultiSigPolicy:
    keys: tuple  # exactly 3 compressed public keys
    threshold: int = MULTISIG_THRESHOLD

    def __post_init__(self):
        if len(self.keys) != MULTISIG_KEYS or len(set(self.keys)) != MULTISIG_KEYS:
            raise DdnsError("policy requires 3 distinct keys")
        if self.threshold != MULTISIG_THRESHOLD:
            raise DdnsError("only 2-of-3 policies are supported")

    @property
    def address(self) -> str:
        return multisig_address(list(self.keys))


def operation_digest(tx: Transaction) -> bytes:
    """Bytes a policy holder signs to authorize the asset operation."""
    return tx.signing_bytes


def verify_multisig_operation(tx: Transaction, policy: MultiSigPolicy,
                              signatures) -> bool:
    """True iff >= 2 distinct policy keys validly signed the operation.

    `signatures` is a list of (public_key, 64-byte signature) pairs;
    duplicate signers count once, malformed signatures count never.
    """
    digest_input = operation_digest(tx)
    signers = set()
    for pubkey, sig in signatures:
        if pubkey not in policy.keys:
            continue
        try:
            if verify(pubkey, digest_input, Signature.from_bytes(sig)):
                signers.add(pubkey)
        except Exception:
            continue
    return len(signers) >= policy.threshold
