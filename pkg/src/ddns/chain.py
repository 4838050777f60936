"""Proof-of-work ledger: transactions, blocks, validation, mining,
difficulty retargeting, and longest-chain reorganization.

Canonical serialization is little-endian fixed-width integers with
length-prefixed variable fields, fields in declaration order. Uniqueness
of that byte form is load-bearing: tx ids are double SHA-256 of it, and
input/authorization signatures cover the same bytes with all signature
slots zeroed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

from .encoding import sha256d
from .errors import SerializationError
from .keys import Signature, decode_address, derive_address, verify, ADDRESS_VERSION, MULTISIG_VERSION
from .validation import ValidationResult, invalid, valid

COIN = 10 ** 8                     # base units per PHI
REGISTRATION_FEE = COIN // 10      # 0.1 PHI
BLOCK_SUBSIDY = 100 * COIN
MAX_MONEY = 1 << 62

WEIGHT_PER_BYTE = 4
MAX_BLOCK_WEIGHT = 4_000_000
TARGET_BLOCK_TIME = 15
DIFFICULTY_WINDOW = 30
DIFFICULTY_SMOOTHING = 0.25
DIFFICULTY_CLAMP = 3.0
MAX_TARGET = (1 << 256) - 1
MAX_FUTURE_DRIFT = 120

# Easy default so unit tests mine in microseconds; real deployments
# would set this in the genesis config.
DEFAULT_GENESIS_TARGET = MAX_TARGET >> 4
GENESIS_TIMESTAMP = 1_700_000_000


# ---------------------------------------------------------------------------
# Canonical byte streams


class Writer:
    def __init__(self):
        self.parts = []

    def u8(self, v):
        self.parts.append(struct.pack("<B", v))

    def u16(self, v):
        self.parts.append(struct.pack("<H", v))

    def u32(self, v):
        self.parts.append(struct.pack("<I", v))

    def u64(self, v):
        self.parts.append(struct.pack("<Q", v))

    def raw(self, b):
        self.parts.append(b)

    def var(self, b):
        self.u32(len(b))
        self.raw(b)

    def getvalue(self) -> bytes:
        return b"".join(self.parts)


class Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def _take(self, n) -> bytes:
        if self.pos + n > len(self.data):
            raise SerializationError("unexpected end of input")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self):
        return self._take(1)[0]

    def u16(self):
        return struct.unpack("<H", self._take(2))[0]

    def u32(self):
        return struct.unpack("<I", self._take(4))[0]

    def u64(self):
        return struct.unpack("<Q", self._take(8))[0]

    def raw(self, n):
        return self._take(n)

    def var(self):
        return self._take(self.u32())

    def done(self) -> bool:
        return self.pos == len(self.data)


def _addr_bytes(address: str) -> bytes:
    version, payload = decode_address(address)
    return bytes([version]) + payload


def _addr_text(raw: bytes) -> str:
    from .encoding import b58check_encode
    if len(raw) != 21 or raw[0] not in (ADDRESS_VERSION, MULTISIG_VERSION):
        raise SerializationError("bad address bytes")
    return b58check_encode(raw[0], raw[1:])


# ---------------------------------------------------------------------------
# Transactions

ZERO_SIG = b"\x00" * 64

OP_KINDS = ("register", "update", "transfer")


@dataclass(frozen=True)
class TxInput:
    prev_txid: bytes
    index: int
    public_key: bytes
    signature: bytes = ZERO_SIG


@dataclass(frozen=True)
class TxOutput:
    value: int
    recipient: str
    carried_asset: tuple | None = None  # (asset_name, quantity, content_id)


@dataclass(frozen=True)
class AssetOperation:
    kind: str
    asset_name: str
    new_content_id: str | None = None
    new_owner: str | None = None
    fee_paid: int = 0
    subsidized: bool = False
    policy_keys: tuple = ()            # () or exactly 3 compressed pubkeys
    auth: tuple = ()                   # ((pubkey, 64-byte sig), ...)


@dataclass(frozen=True)
class Transaction:
    inputs: tuple
    outputs: tuple
    asset_op: AssetOperation | None = None
    nonce: int = 0

    def serialize(self, for_signing: bool = False) -> bytes:
        w = Writer()
        w.u32(len(self.inputs))
        for txin in self.inputs:
            w.raw(txin.prev_txid)
            w.u32(txin.index)
            w.raw(txin.public_key)
            w.raw(ZERO_SIG if for_signing else txin.signature)
        w.u32(len(self.outputs))
        for out in self.outputs:
            w.u64(out.value)
            w.raw(_addr_bytes(out.recipient))
            if out.carried_asset is None:
                w.u8(0)
            else:
                name, quantity, content_id = out.carried_asset
                w.u8(1)
                w.var(name.encode())
                w.u64(quantity)
                w.var(content_id.encode())
        if self.asset_op is None:
            w.u8(0)
        else:
            op = self.asset_op
            w.u8(1)
            w.u8(OP_KINDS.index(op.kind))
            w.var(op.asset_name.encode())
            w.u8(1 if op.new_content_id is not None else 0)
            if op.new_content_id is not None:
                w.var(op.new_content_id.encode())
            w.u8(1 if op.new_owner is not None else 0)
            if op.new_owner is not None:
                w.raw(_addr_bytes(op.new_owner))
            w.u64(op.fee_paid)
            w.u8(1 if op.subsidized else 0)
            w.u32(len(op.policy_keys))
            for key in op.policy_keys:
                w.raw(key)
            w.u32(len(op.auth))
            for pubkey, sig in op.auth:
                w.raw(pubkey)
                w.raw(ZERO_SIG if for_signing else sig)
        w.u64(self.nonce)
        return w.getvalue()

    @classmethod
    def deserialize(cls, data: bytes) -> "Transaction":
        r = Reader(data)
        tx = cls._read(r)
        if not r.done():
            raise SerializationError("trailing bytes after transaction")
        return tx

    @classmethod
    def _read(cls, r: Reader) -> "Transaction":
        inputs = tuple(
            TxInput(r.raw(32), r.u32(), r.raw(33), r.raw(64))
            for _ in range(r.u32())
        )
        outputs = []
        for _ in range(r.u32()):
            value = r.u64()
            recipient = _addr_text(r.raw(21))
            carried = None
            if r.u8():
                carried = (r.var().decode(), r.u64(), r.var().decode())
            outputs.append(TxOutput(value, recipient, carried))
        asset_op = None
        if r.u8():
            kind = OP_KINDS[r.u8()]
            asset_name = r.var().decode()
            new_content_id = r.var().decode() if r.u8() else None
            new_owner = _addr_text(r.raw(21)) if r.u8() else None
            fee_paid = r.u64()
            subsidized = bool(r.u8())
            policy_keys = tuple(r.raw(33) for _ in range(r.u32()))
            auth = tuple((r.raw(33), r.raw(64)) for _ in range(r.u32()))
            asset_op = AssetOperation(kind, asset_name, new_content_id, new_owner,
                                      fee_paid, subsidized, policy_keys, auth)
        nonce = r.u64()
        return cls(tuple(inputs), tuple(outputs), asset_op, nonce)

    @property
    def txid(self) -> bytes:
        return sha256d(self.serialize())

    @property
    def signing_bytes(self) -> bytes:
        return self.serialize(for_signing=True)

    @property
    def is_coinbase(self) -> bool:
        return not self.inputs and self.asset_op is None


def tx_weight(tx: Transaction) -> int:
    return WEIGHT_PER_BYTE * len(tx.serialize())


def sign_transaction(tx: Transaction, keypair) -> Transaction:
    """Fill every input (and asset-op auth slot) owned by `keypair`."""
    from .keys import sign
    sig = sign(keypair.secret_key, tx.signing_bytes).to_bytes()
    inputs = tuple(
        replace(txin, signature=sig) if txin.public_key == keypair.public_key else txin
        for txin in tx.inputs
    )
    asset_op = tx.asset_op
    if asset_op is not None and asset_op.auth:
        auth = tuple(
            (pub, sig if pub == keypair.public_key else old)
            for pub, old in asset_op.auth
        )
        asset_op = replace(asset_op, auth=auth)
    return replace(tx, inputs=inputs, asset_op=asset_op)


# ---------------------------------------------------------------------------
# Blocks


@dataclass(frozen=True)
class BlockHeader:
    previous_hash: bytes
    merkle_root: bytes
    timestamp: int
    difficulty_target: int
    nonce: int
    height: int

    def serialize(self) -> bytes:
        w = Writer()
        w.raw(self.previous_hash)
        w.raw(self.merkle_root)
        w.u64(self.timestamp)
        w.raw(self.difficulty_target.to_bytes(32, "big"))
        w.u64(self.nonce)
        w.u64(self.height)
        return w.getvalue()

    @classmethod
    def deserialize(cls, data: bytes) -> "BlockHeader":
        r = Reader(data)
        hdr = cls(r.raw(32), r.raw(32), r.u64(),
                  int.from_bytes(r.raw(32), "big"), r.u64(), r.u64())
        if not r.done():
            raise SerializationError("trailing bytes after header")
        return hdr

    @property
    def hash(self) -> bytes:
        return sha256d(self.serialize())


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    transactions: tuple

    def serialize(self) -> bytes:
        w = Writer()
        w.raw(self.header.serialize())
        w.u32(len(self.transactions))
        for tx in self.transactions:
            w.var(tx.serialize())
        return w.getvalue()

    @classmethod
    def deserialize(cls, data: bytes) -> "Block":
        r = Reader(data)
        header = BlockHeader.deserialize(r.raw(32 + 32 + 8 + 32 + 8 + 8))
        txs = tuple(Transaction.deserialize(r.var()) for _ in range(r.u32()))
        if not r.done():
            raise SerializationError("trailing bytes after block")
        return cls(header, txs)


def merkle_root(txids: list) -> bytes:
    if not txids:
        return b"\x00" * 32
    level = list(txids)
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [sha256d(level[i] + level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


def block_weight(block: Block) -> int:
    return sum(tx_weight(tx) for tx in block.transactions)


# ---------------------------------------------------------------------------
# Difficulty (Dark-Gravity-Wave-style smoothed retarget)


def adjust_difficulty(recent_headers) -> int:
    """Next difficulty target from the trailing header window.

    Retarget ratio is clamped to [1/3, 3] per step and blended with a
    0.25 smoothing factor to avoid oscillation.
    """
    headers = list(recent_headers)[-DIFFICULTY_WINDOW:]
    if len(headers) < 2:
        return headers[-1].difficulty_target if headers else DEFAULT_GENESIS_TARGET
    old_target = headers[-1].difficulty_target
    timestamps = sorted(h.timestamp for h in headers)
    actual_time = max(timestamps[-1] - timestamps[0], 1)
    target_time = TARGET_BLOCK_TIME * (len(headers) - 1)
    old_difficulty = MAX_TARGET / old_target
    # Base the proposal on the window-average difficulty: the measured
    # span lags the tip by a full window, and pairing it with the tip
    # difficulty makes the control loop oscillate.
    avg_difficulty = sum(MAX_TARGET / h.difficulty_target for h in headers) / len(headers)
    ratio = target_time / actual_time
    ratio = min(max(ratio, 1.0 / DIFFICULTY_CLAMP), DIFFICULTY_CLAMP)
    proposed = avg_difficulty * ratio
    smoothed = old_difficulty + DIFFICULTY_SMOOTHING * (proposed - old_difficulty)
    new_target = int(MAX_TARGET / smoothed)
    return min(max(new_target, 1), MAX_TARGET)


def median_time_past(recent_headers) -> int:
    times = sorted(h.timestamp for h in list(recent_headers)[-11:])
    return times[len(times) // 2] if times else 0


# ---------------------------------------------------------------------------
# Chain state


@dataclass(frozen=True)
class ChainState:
    utxos: dict            # (txid, index) -> TxOutput
    assets: dict           # asset_name -> registry.DomainAsset
    tip: bytes
    height: int
    recent_headers: tuple  # up to the last 30 headers, oldest first

    def digest(self) -> bytes:
        w = Writer()
        for (txid, idx) in sorted(self.utxos):
            out = self.utxos[(txid, idx)]
            w.raw(txid)
            w.u32(idx)
            w.u64(out.value)
            w.var(out.recipient.encode())
            if out.carried_asset:
                name, quantity, cid = out.carried_asset
                w.var(name.encode())
                w.u64(quantity)
                w.var(cid.encode())
        for name in sorted(self.assets):
            asset = self.assets[name]
            w.var(name.encode())
            w.var(asset.owner_address.encode())
            w.var((asset.ipfs_hash or "").encode())
        w.raw(self.tip)
        w.u64(self.height)
        return sha256d(w.getvalue())




def validate_transaction(tx: Transaction, state: ChainState) -> ValidationResult:
    """Full standalone (non-coinbase) transaction check against a state."""
    from . import registry

    if tx.is_coinbase:
        return invalid("bad-tx", "coinbase outside block context")
    signing = tx.signing_bytes
    seen = set()
    total_in = 0
    for i, txin in enumerate(tx.inputs):
        key = (txin.prev_txid, txin.index)
        if key in seen:
            return invalid("missing-utxo", f"input {i} double-spends within tx")
        seen.add(key)
        utxo = state.utxos.get(key)
        if utxo is None:
            return invalid("missing-utxo", f"input {i} spends unknown output")
        try:
            if derive_address(txin.public_key) != utxo.recipient:
                return invalid("bad-signature", f"input {i} key does not own output")
            if not verify(txin.public_key, signing, Signature.from_bytes(txin.signature)):
                return invalid("bad-signature", f"input {i} signature invalid")
        except Exception:
            return invalid("bad-signature", f"input {i} malformed key or signature")
        total_in += utxo.value
    total_out = 0
    for i, out in enumerate(tx.outputs):
        if not 0 <= out.value < MAX_MONEY:
            return invalid("value-overflow", f"output {i} value out of range")
        total_out += out.value
    if total_out >= MAX_MONEY:
        return invalid("value-overflow", "total output value out of range")
    if tx.asset_op is None:
        if not tx.inputs:
            return invalid("bad-tx", "no inputs and no asset operation")
        if total_in < total_out:
            return invalid("value-overflow", "outputs exceed inputs")
        return valid()
    # Asset-bearing transactions may be zero-input (subsidized register,
    # update, transfer); value conservation still applies when funded.
    if total_in < total_out:
        return invalid("value-overflow", "outputs exceed inputs")
    result = registry.check_asset_operation(tx, state, fee=total_in - total_out)
    if not result.ok:
        return result
    return valid()


def transaction_fee(tx: Transaction, state: ChainState) -> int:
    total_in = sum(state.utxos[(i.prev_txid, i.index)].value for i in tx.inputs)
    return total_in - sum(o.value for o in tx.outputs)


def validate_block(block: Block, state: ChainState, now: int | None = None) -> ValidationResult:
    import time as _time
    if now is None:
        now = int(_time.time())
    header = block.header
    if header.previous_hash != state.tip:
        return invalid("unknown-parent", "header does not extend the given state")
    if header.height != state.height + 1:
        return invalid("bad-tx", "wrong height")
    expected_target = adjust_difficulty(state.recent_headers)
    if header.difficulty_target != expected_target:
        return invalid("bad-difficulty",
                       f"target {header.difficulty_target:#x} != expected {expected_target:#x}")
    if int.from_bytes(header.hash, "big") > header.difficulty_target:
        return invalid("bad-pow", "header hash above target")
    if header.timestamp <= median_time_past(state.recent_headers):
        return invalid("bad-timestamp", "timestamp not past median of prior 11")
    if header.timestamp > now + MAX_FUTURE_DRIFT:
        return invalid("bad-timestamp", "timestamp too far in the future")
    if not block.transactions:
        return invalid("bad-tx", "empty block")
    if header.merkle_root != merkle_root([tx.txid for tx in block.transactions]):
        return invalid("bad-merkle", "merkle root mismatch")
    if block_weight(block) > MAX_BLOCK_WEIGHT:
        return invalid("overweight", f"block weight {block_weight(block)}")
    coinbase = block.transactions[0]
    if not coinbase.is_coinbase:
        return invalid("bad-tx", "first transaction must be coinbase")
    working = state
    fees = 0
    for i, tx in enumerate(block.transactions[1:], start=1):
        if tx.is_coinbase:
            return invalid(f"bad-tx({i})", "duplicate coinbase")
        result = validate_transaction(tx, working)
        if not result.ok:
            return invalid(f"bad-tx({i})", f"{result.code}: {result.detail}")
        fees += transaction_fee(tx, working)
        working = _apply_transaction(working, tx)
    coinbase_value = sum(o.value for o in coinbase.outputs)
    if coinbase_value > BLOCK_SUBSIDY + fees:
        return invalid("bad-tx(0)", "coinbase exceeds subsidy plus fees")
    return valid()


def _apply_transaction(state: ChainState, tx: Transaction) -> ChainState:
    from . import registry
    utxos = dict(state.utxos)
    txid = tx.txid
    for txin in tx.inputs:
        del utxos[(txin.prev_txid, txin.index)]
    for idx, out in enumerate(tx.outputs):
        utxos[(txid, idx)] = out
    assets = state.assets
    if tx.asset_op is not None:
        assets = registry.apply_asset_operation(dict(assets), tx.asset_op)
    return replace(state, utxos=utxos, assets=assets)


def apply_block(state: ChainState, block: Block) -> ChainState:
    """Pure state transition; the input state is left untouched."""
    working = state
    for tx in block.transactions:
        working = _apply_transaction(working, tx)
    headers = (tuple(state.recent_headers) + (block.header,))[-DIFFICULTY_WINDOW:]
    return replace(working, tip=block.header.hash, height=block.header.height,
                   recent_headers=headers)


# ---------------------------------------------------------------------------
# Mining


def select_transactions(mempool, state: ChainState, budget: int):
    """Greedy fee-rate order (ties broken by arrival order)."""
    scored = []
    for arrival, tx in enumerate(mempool):
        result = validate_transaction(tx, state)
        if not result.ok:
            continue
        weight = tx_weight(tx)
        fee = transaction_fee(tx, state)
        scored.append((-fee / weight, arrival, tx, weight))
    scored.sort(key=lambda item: (item[0], item[1]))
    chosen = []
    working = state
    used = 0
    for _, _, tx, weight in scored:
        if used + weight > budget:
            continue
        if not validate_transaction(tx, working).ok:
            continue  # conflicts with an already-selected tx
        chosen.append(tx)
        used += weight
        working = _apply_transaction(working, tx)
    return chosen


def mine_block(mempool, state: ChainState, coinbase_address: str,
               now: int | None = None, start_nonce: int = 0,
               max_attempts: int = 1_000_000) -> Block | None:
    """One bounded round of nonce search; None means keep trying."""
    import time as _time
    if now is None:
        now = int(_time.time())
    target = adjust_difficulty(state.recent_headers)
    coinbase_stub = Transaction((), (TxOutput(0, coinbase_address),), None, state.height + 1)
    budget = MAX_BLOCK_WEIGHT - tx_weight(coinbase_stub)
    chosen = select_transactions(mempool, state, budget)
    working = state
    fees = 0
    for tx in chosen:
        fees += transaction_fee(tx, working)
        working = _apply_transaction(working, tx)
    coinbase = Transaction(
        (), (TxOutput(BLOCK_SUBSIDY + fees, coinbase_address),), None, state.height + 1)
    txs = (coinbase,) + tuple(chosen)
    root = merkle_root([tx.txid for tx in txs])
    timestamp = max(now, median_time_past(state.recent_headers) + 1)
    for nonce in range(start_nonce, start_nonce + max_attempts):
        header = BlockHeader(state.tip, root, timestamp, target, nonce, state.height + 1)
        if int.from_bytes(header.hash, "big") <= target:
            return Block(header, txs)
    return None


# ---------------------------------------------------------------------------
# Chain container with fork handling


def make_genesis(target: int = DEFAULT_GENESIS_TARGET,
                 timestamp: int = GENESIS_TIMESTAMP) -> Block:
    from .encoding import b58check_encode
    burn = b58check_encode(ADDRESS_VERSION, b"\x00" * 20)
    coinbase = Transaction((), (TxOutput(BLOCK_SUBSIDY, burn),), None, 0)
    header = BlockHeader(b"\x00" * 32, merkle_root([coinbase.txid]),
                         timestamp, target, 0, 0)
    return Block(header, (coinbase,))


def genesis_state(genesis: Block) -> ChainState:
    empty = ChainState({}, {}, b"\x00" * 32, -1, ())
    return apply_block(empty, genesis)


@dataclass
class AddBlockResult:
    accepted: bool
    code: str | None = None
    tip_changed: bool = False
    reorged: bool = False
    returned_txs: list = field(default_factory=list)


class Chain:
    """Block tree with longest-chain selection and first-seen tie-breaking."""

    def __init__(self, genesis: Block | None = None):
        self.genesis = genesis or make_genesis()
        ghash = self.genesis.header.hash
        self.blocks = {ghash: self.genesis}
        self.states = {ghash: genesis_state(self.genesis)}
        self._arrival = {ghash: 0}
        self._counter = 1
        self.tip_hash = ghash

    @property
    def state(self) -> ChainState:
        return self.states[self.tip_hash]

    @property
    def height(self) -> int:
        return self.state.height

    def branch(self, tip: bytes):
        """Block hashes from genesis to `tip`, inclusive."""
        out = []
        cursor = tip
        while cursor in self.blocks:
            out.append(cursor)
            if cursor == self.genesis.header.hash:
                break
            cursor = self.blocks[cursor].header.previous_hash
        return list(reversed(out))

    def add_block(self, block: Block, now: int | None = None) -> AddBlockResult:
        bhash = block.header.hash
        if bhash in self.blocks:
            return AddBlockResult(False, "duplicate")
        parent = block.header.previous_hash
        if parent not in self.states:
            return AddBlockResult(False, "unknown-parent")
        parent_state = self.states[parent]
        result = validate_block(block, parent_state, now=now)
        if not result.ok:
            return AddBlockResult(False, result.code)
        self.blocks[bhash] = block
        self.states[bhash] = apply_block(parent_state, block)
        self._arrival[bhash] = self._counter
        self._counter += 1
        if block.header.height <= self.states[self.tip_hash].height:
            return AddBlockResult(True, tip_changed=False)
        old_branch = self.branch(self.tip_hash)
        new_branch = self.branch(bhash)
        self.tip_hash = bhash
        reorged = old_branch and old_branch[-1] != new_branch[len(old_branch) - 1]
        returned = []
        if reorged:
            new_set = set(new_branch)
            abandoned = [h for h in old_branch if h not in new_set]
            confirmed_ids = {
                tx.txid
                for h in new_branch
                for tx in self.blocks[h].transactions
            }
            for h in abandoned:
                for tx in self.blocks[h].transactions:
                    if not tx.is_coinbase and tx.txid not in confirmed_ids:
                        returned.append(tx)
        return AddBlockResult(True, tip_changed=True, reorged=bool(reorged),
                              returned_txs=returned)
