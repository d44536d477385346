"""Confidential two-layer transactions on a consortium chain.

Every transaction output appears twice:

* payment layer: ``c_i = Enc_{pk_i}(m_i)`` under the receiver's key;
* verification layer: ``c_id = g_d^{m_i} h_d^{rho_i} mod n_d^2``, a Paillier
  ciphertext under the dumb-account key (no private key exists) that is also
  a commitment, so it carries the range proof for ``m_i > 0``.

``E`` commits the input sum under the RSA-form parameters ``V_alpha`` and
``F = prod c_id`` commits the output sum under the dumb-account parameters;
an equality proof ties the two together. A link proof per output ties
``c_i`` to ``c_id``, and one more ties ``E`` to the product of the spent
input ciphertexts. The sender proves ownership of the inputs with an
``n``-th root signature under the inputs' Paillier key.

Blocks are proposed round-robin by the ``k`` consortium parties and commit
with a majority of independent re-verifications.
"""
from __future__ import annotations

import copy
import hashlib
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from mab import arith, cokeygen, equalityproof, paillier, profiles, rangeproof
from mab.commitments import Commitment, CommitParams, Opening, commit, random_blinding, verify_opening
from mab.counters import tick
from mab.equalityproof import DualCommitment, EqualityParams, EqualityProof, LinkProof
from mab.paillier import Ciphertext, PaillierKey, PaillierPublicKey, ThresholdPaillier
from mab.profiles import SecurityProfile
from mab.rangeproof import RangeParams, RangeProof

MAX_OUTPUTS = 1 << equalityproof.SUM_SLACK_BITS
GENESIS_PROPOSER = 0

OutRef = tuple[str, int]


class LedgerError(ValueError):
    pass


class DumbAccountError(LedgerError):
    """Verification-layer outputs have no private key."""


class ConsensusError(LedgerError):
    pass


def canonical(doc) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


def sha256_hex(data: bytes) -> str:
    tick("hash")
    return hashlib.sha256(data).hexdigest()


# -- system parameters -------------------------------------------------------


@dataclass
class Consortium:
    """Private material of the ``k`` simulated parties."""

    shares: list[cokeygen.PartyShare]
    paillier_shares: list[paillier.PaillierShare]


@dataclass(frozen=True)
class SystemParams:
    profile: SecurityProfile
    modulus: cokeygen.JointModulus
    consortium_pk: ThresholdPaillier
    params_alpha: CommitParams
    params_d: CommitParams
    transcript_hash: str | None = None  # set when loaded without the transcript

    @property
    def party_count(self) -> int:
        return self.modulus.party_count

    @property
    def ceremony_complete(self) -> bool:
        return self.modulus.biprime_verified and self.modulus.e_public is not None

    @property
    def range_params(self) -> RangeParams:
        p = self.profile
        return RangeParams(self.params_d, p.t, p.l, p.s, p.T)

    @property
    def equality_params(self) -> EqualityParams:
        p = self.profile
        return EqualityParams(self.params_alpha, self.params_d, p.t, p.l, p.s)

    @property
    def dumb_pk(self) -> PaillierPublicKey:
        n = self.params_d.paillier_n
        return PaillierPublicKey(n, n + 1)

    @property
    def digest(self) -> str:
        return hashlib.sha256(canonical(self.to_json())).hexdigest()

    def to_json(self) -> dict:
        return {
            "profile": self.profile.to_json(),
            "consortium": {**self.modulus.public_json(), **self.consortium_pk.to_json()},
            "transcript_hash": self.transcript_hash or arith.digest_hex(self.modulus.transcript_bytes()),
            "params_alpha": self.params_alpha.to_json(),
            "params_d": self.params_d.to_json(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SystemParams":
        prof = dict(doc["profile"])
        prof.pop("challenge_bits", None)
        profile = SecurityProfile(**prof)
        con = doc["consortium"]
        n = arith.from_hex(con["n_hex"])
        jm = cokeygen.JointModulus(n, con["party_count"], arith.from_hex(con["e_hex"]), [], con["trial_bound"])
        if con["biprime_verified"]:
            jm.transcript.append(cokeygen.Message(0, 0, "bipri-verdict", (1,)))
        tpk = ThresholdPaillier(PaillierPublicKey.from_json(con), arith.from_hex(con["theta_hex"]), con["party_count"])
        alpha, dumb = CommitParams.from_json(doc["params_alpha"]), CommitParams.from_json(doc["params_d"])
        return cls(profile, jm, tpk, alpha, dumb, doc["transcript_hash"])


def setup_system(
    profile: SecurityProfile, parties: int, seed: object = None, params_dir: Path | None = None
) -> tuple[SystemParams, Consortium]:
    """Run the consortium ceremony and publish all verification parameters."""
    cer = cokeygen.run_ceremony(
        parties,
        profile.prime_bits,
        profile.exponent,
        seed,
        trial_bound=profile.trial_division_bound,
        rounds=profile.biprimality_rounds,
    )
    tpk, pshares = paillier.consortium_key(cer.modulus, cer.shares, arith.make_rng(seed, "consortium-paillier"))
    alpha, dumb = profiles.commitment_params(profile, seed, params_dir)
    sp = SystemParams(profile, cer.modulus, tpk, alpha, dumb)
    return sp, Consortium(cer.shares, pshares)


# -- keys and addresses ------------------------------------------------------


class Registry:
    """Address book: address -> public key of the receiver."""

    def __init__(self, keys: dict[str, PaillierPublicKey] | None = None):
        self.keys: dict[str, PaillierPublicKey] = dict(keys or {})

    def register(self, address: str, pk: PaillierPublicKey) -> None:
        if not address or not isinstance(address, str):
            raise LedgerError("address must be a non-empty string")
        if address in self.keys:
            raise LedgerError(f"address {address!r} already registered")
        self.keys[address] = pk

    def key(self, address: str) -> PaillierPublicKey:
        try:
            return self.keys[address]
        except KeyError:
            raise LedgerError(f"unknown receiver {address!r}") from None

    def __contains__(self, address: str) -> bool:
        return address in self.keys

    def to_json(self) -> dict:
        return {a: pk.to_json() for a, pk in sorted(self.keys.items())}

    @classmethod
    def from_json(cls, doc: dict) -> "Registry":
        return cls({a: PaillierPublicKey.from_json(v) for a, v in doc.items()})


@dataclass(frozen=True)
class Wallet:
    address: str
    public: PaillierPublicKey
    secret: PaillierKey | None = None  # None: consortium-keyed

    def decrypt(self, c: Ciphertext, sp: SystemParams, consortium: Consortium | None = None) -> int:
        if c.key_id != self.public.key_id:
            raise paillier.MalformedCiphertextError("ciphertext is not under this wallet's key")
        if self.secret is not None:
            return paillier.h_dec(self.secret, c)
        if consortium is None:
            raise LedgerError("consortium-keyed wallet needs the consortium to decrypt")
        return sp.consortium_pk.decrypt(consortium.paillier_shares, c)

    def nth_root(self, x: int, sp: SystemParams, consortium: Consortium | None = None) -> int:
        if self.secret is not None:
            return paillier.nth_root(self.secret, x)
        if consortium is None:
            raise LedgerError("consortium-keyed wallet needs the consortium to sign")
        return sp.consortium_pk.nth_root(consortium.paillier_shares, x)

    def to_json(self) -> dict:
        out = {"address": self.address, "public": self.public.to_json()}
        if self.secret is not None:
            out["lambda_hex"] = arith.to_hex(self.secret.lambda_value)
            out["mu_hex"] = arith.to_hex(self.secret.mu_value)
        return out

    @classmethod
    def from_json(cls, doc: dict) -> "Wallet":
        pk = PaillierPublicKey.from_json(doc["public"])
        sk = None
        if "lambda_hex" in doc:
            sk = PaillierKey(pk, arith.from_hex(doc["lambda_hex"]), arith.from_hex(doc["mu_hex"]))
        return cls(doc["address"], pk, sk)


# -- transactions ------------------------------------------------------------


@dataclass(frozen=True)
class TxOutput:
    address: str
    ciphertext: Ciphertext

    def to_json(self) -> dict:
        return {"address": self.address, **self.ciphertext.to_json()}

    @classmethod
    def from_json(cls, doc: dict) -> "TxOutput":
        return cls(doc["address"], Ciphertext.from_json(doc))


@dataclass(frozen=True)
class Transaction:
    inputs: tuple[OutRef, ...]
    payment_outputs: tuple[TxOutput, ...]
    verification_outputs: tuple[Ciphertext, ...]
    input_sum: DualCommitment
    range_proofs: tuple[RangeProof, ...]
    link_proofs: tuple[LinkProof, ...]
    equality_proof: EqualityProof
    reward_flag: bool = False
    reward_opening: Opening | None = None
    input_link: LinkProof | None = None
    spend_sig: int | None = None
    tx_id: str = ""

    def header_json(self) -> dict:
        """Fields the proofs are bound to."""
        return {
            "inputs": [{"tx_id": t, "index": i} for t, i in self.inputs],
            "payment_outputs": [o.to_json() for o in self.payment_outputs],
            "verification_outputs": [c.to_json() for c in self.verification_outputs],
            "input_sum": self.input_sum.to_json(),
            "reward_flag": self.reward_flag,
        }

    def body_json(self) -> dict:
        out = self.header_json()
        out["range_proofs"] = [p.to_json() for p in self.range_proofs]
        out["link_proofs"] = [p.to_json() for p in self.link_proofs]
        out["equality_proof"] = self.equality_proof.to_json()
        out["reward_opening"] = (
            None
            if self.reward_opening is None
            else {"x_hex": arith.to_hex(self.reward_opening.x_value), "r_hex": arith.to_hex(self.reward_opening.r_value)}
        )
        out["input_link"] = None if self.input_link is None else self.input_link.to_json()
        out["spend_sig"] = None if self.spend_sig is None else arith.to_hex(self.spend_sig)
        return out

    def signing_digest(self) -> bytes:
        """What the input owner signs: everything except the signature."""
        body = self.body_json()
        del body["spend_sig"]
        return hashlib.sha256(b"mab/spend" + canonical(body)).digest()

    def compute_id(self) -> str:
        return sha256_hex(b"mab/tx" + canonical(self.body_json()))

    def to_json(self) -> dict:
        return {"tx_id": self.tx_id, **self.body_json()}

    @classmethod
    def from_json(cls, doc: dict) -> "Transaction":
        ro = doc.get("reward_opening")
        il, sig = doc.get("input_link"), doc.get("spend_sig")
        return cls(
            inputs=tuple((i["tx_id"], i["index"]) for i in doc["inputs"]),
            payment_outputs=tuple(TxOutput.from_json(o) for o in doc["payment_outputs"]),
            verification_outputs=tuple(Ciphertext.from_json(c) for c in doc["verification_outputs"]),
            input_sum=DualCommitment.from_json(doc["input_sum"]),
            range_proofs=tuple(RangeProof.from_json(p) for p in doc["range_proofs"]),
            link_proofs=tuple(LinkProof.from_json(p) for p in doc["link_proofs"]),
            equality_proof=EqualityProof.from_json(doc["equality_proof"]),
            reward_flag=bool(doc["reward_flag"]),
            reward_opening=None if ro is None else Opening(arith.from_hex(ro["x_hex"]), arith.from_hex(ro["r_hex"])),
            input_link=None if il is None else LinkProof.from_json(il),
            spend_sig=None if sig is None else arith.from_hex(sig),
            tx_id=doc["tx_id"],
        )


def _context(header: dict) -> bytes:
    return hashlib.sha256(b"mab/tx-context" + canonical(header)).digest()


def _indexed(ctx: bytes, i: int) -> bytes:
    return ctx + i.to_bytes(4, "big")


def _sig_target(digest: bytes, n: int) -> int:
    return 1 + arith.hash_to_int(b"mab/spend-sig", [digest], n - 1)


def min_key_bits(profile: SecurityProfile) -> int:
    """Receiver moduli must exceed every value a link proof can bind."""
    return profile.msg_bits + profile.t + profile.l + 3


def _input_aggregate(tx: "Transaction", state: "ChainState", registry: Registry) -> tuple[PaillierPublicKey, Ciphertext] | None:
    outs = [state.utxo.get(ref) for ref in tx.inputs]
    if not outs or any(o is None for o in outs) or len({o.address for o in outs}) != 1:
        return None
    pk = registry.key(outs[0].address)
    if any(o.ciphertext.key_id != pk.key_id for o in outs):
        return None
    return pk, paillier.h_oper([o.ciphertext for o in outs], pk)


def _assemble(
    sp: SystemParams,
    registry: Registry,
    inputs: Sequence[OutRef],
    outputs: Sequence[tuple[str, int]],
    m_in: int,
    rng: random.Random,
    *,
    reward: bool = False,
    owner: tuple[Wallet, Ciphertext, Consortium | None] | None = None,
) -> Transaction:
    """``owner`` carries the sender wallet, the product of the input
    ciphertexts and the consortium, and is needed for every non-reward spend."""
    prof, pd, pa = sp.profile, sp.params_d, sp.params_alpha
    if not 1 <= len(outputs) <= MAX_OUTPUTS:
        raise LedgerError(f"a transaction needs 1..{MAX_OUTPUTS} outputs")
    dumb_id = sp.dumb_pk.key_id
    pays, verifs, secrets = [], [], []
    for address, m in outputs:
        pk = registry.key(address)
        r = arith.rand_unit(rng, pk.n_value)
        pays.append(TxOutput(address, paillier.h_enc(pk, m % pk.n_value, r)))
        rho = random_blinding(pd, rng, prof.s)
        verifs.append(Ciphertext(commit(pd, m, rho).value, dumb_id))
        secrets.append((pk, m, r, rho))
    r_alpha = random_blinding(pa, rng, prof.s)
    e_cm = commit(pa, m_in, r_alpha)
    f_cm = Commitment(arith.prodmod((c.c_value for c in verifs), pd.modulus), pd.params_id)
    dual = DualCommitment(e_cm, f_cm)
    draft = Transaction(tuple(inputs), tuple(pays), tuple(verifs), dual, (), (), EqualityProof(0, 0, 0, 0), reward)
    ctx = _context(draft.header_json())

    rp = sp.range_params
    range_proofs, link_proofs = [], []
    for i, ((pk, m, r, rho), cd) in enumerate(zip(secrets, verifs)):
        cm = Commitment(cd.c_value, pd.params_id)
        if m >= 1:
            range_proofs.append(rangeproof.r_prove(rp, cm, Opening(m, rho), 0, rng, context=_indexed(ctx, i)))
        else:
            # force-built invalid output: the best a prover can do is follow the protocol
            proof = rangeproof.forge_nonpositive(rp, cm, Opening(m, rho), 0, rng, "honest_omega")
            range_proofs.append(proof)
        link_proofs.append(
            equalityproof.link_prove(
                pk, pd, pays[i].ciphertext, cd, m % pk.n_value, r, rho, rng, prof.t, prof.l, prof.s, context=_indexed(ctx, i)
            )
        )
    total_rho = sum(s[3] for s in secrets)
    balanced = sum(m for _, m in outputs) == m_in
    eq = equalityproof.e_prove(sp.equality_params, dual, m_in, r_alpha, total_rho, rng, context=ctx, strict=balanced)
    opening = Opening(m_in, r_alpha) if reward else None
    tx = Transaction(tuple(inputs), tuple(pays), tuple(verifs), dual, tuple(range_proofs), tuple(link_proofs), eq, reward, opening)
    if owner is not None:
        wallet, c_in, con = owner
        pk = wallet.public
        r_in = paillier.recover_randomness(pk, c_in, lambda x: wallet.nth_root(x, sp, con))
        link = equalityproof.link_prove(
            pk, pa, c_in, e_cm, m_in % pk.n_value, r_in, r_alpha, rng, prof.t, prof.l, prof.s, context=ctx + b"in"
        )
        tx = Transaction(**{**tx.__dict__, "input_link": link})
        sig = wallet.nth_root(_sig_target(tx.signing_digest(), pk.n_value), sp, con)
        tx = Transaction(**{**tx.__dict__, "spend_sig": sig})
    return _with_id(tx)


def _with_id(tx: Transaction) -> Transaction:
    return Transaction(**{**tx.__dict__, "tx_id": tx.compute_id()})


def build_coinbase(sp: SystemParams, registry: Registry, address: str, rng: random.Random) -> Transaction:
    """Reward transaction paying the fixed reward to ``address``; its input sum is opened."""
    amount = sp.profile.reward_amount
    return _assemble(sp, registry, (), [(address, amount)], amount, rng, reward=True)


def build_transaction(
    sp: SystemParams,
    registry: Registry,
    sender: Wallet,
    chain: "Chain",
    inputs: Sequence[OutRef],
    outputs: Sequence[tuple[str, int]],
    rng: random.Random,
    *,
    consortium: Consortium | None = None,
    force: bool = False,
) -> Transaction:
    """Spend ``inputs`` owned by ``sender`` into ``outputs``.

    Change goes back to the sender as an ordinary output. ``force`` skips the
    amount checks so tests can produce unbalanced or non-positive transactions.
    """
    if not inputs:
        raise LedgerError("a transfer needs at least one input")
    m_in = 0
    in_cts = []
    for ref in inputs:
        out = chain.state.utxo.get(tuple(ref))
        if out is None:
            if not force:
                raise LedgerError(f"input {ref} is not an unspent output")
            out = chain.output(*ref)
        if out.address != sender.address:
            raise LedgerError(f"input {ref} does not belong to {sender.address!r}")
        m_in += sender.decrypt(out.ciphertext, sp, consortium)
        in_cts.append(out.ciphertext)
    for address, _ in outputs:
        registry.key(address)
    if not force:
        if not outputs:
            raise LedgerError("a transaction needs at least one output")
        if any(m < 1 for _, m in outputs):
            raise LedgerError("every output amount must be at least 1")
        if sum(m for _, m in outputs) != m_in:
            raise LedgerError(f"outputs sum to {sum(m for _, m in outputs)}, inputs to {m_in}")
        if any(m >= 1 << sp.profile.msg_bits for _, m in outputs):
            raise LedgerError("amount exceeds the message bound")
    c_in = paillier.h_oper(in_cts, sender.public)
    owner = (sender, c_in, consortium)
    return _assemble(sp, registry, [tuple(r) for r in inputs], outputs, m_in, rng, owner=owner)


# -- validation --------------------------------------------------------------


@dataclass
class ChainState:
    utxo: dict[OutRef, TxOutput] = field(default_factory=dict)
    rewarded: set[str] = field(default_factory=set)

    def copy(self) -> "ChainState":
        return ChainState(dict(self.utxo), set(self.rewarded))

    def apply(self, tx: Transaction) -> None:
        for ref in tx.inputs:
            del self.utxo[ref]
        for i, out in enumerate(tx.payment_outputs):
            self.utxo[(tx.tx_id, i)] = out
        if tx.reward_flag:
            self.rewarded.add(tx.payment_outputs[0].address)

    def digest(self) -> str:
        doc = {
            "utxo": sorted([t, i, o.address, o.ciphertext.c_value] for (t, i), o in self.utxo.items()),
            "rewarded": sorted(self.rewarded),
        }
        return hashlib.sha256(canonical(doc)).hexdigest()


CHECK_STAGES = ("structure", "tx_id", "reward", "inputs", "outputs", "RVer", "link", "EVer", "InLink", "spend_sig")


def check_transaction(sp: SystemParams, registry: Registry, state: ChainState, tx: Transaction) -> str | None:
    """Name of the first failing check, or ``None`` when the transaction is valid."""
    i = len(tx.payment_outputs)
    if not (
        1 <= i <= MAX_OUTPUTS
        and len(tx.verification_outputs) == i
        and len(tx.range_proofs) == i
        and len(tx.link_proofs) == i
    ):
        return "structure"
    try:
        if tx.compute_id() != tx.tx_id:
            return "tx_id"
    except (ValueError, TypeError):
        return "tx_id"

    pa, pd = sp.params_alpha, sp.params_d
    if tx.reward_flag:
        op = tx.reward_opening
        if (
            tx.inputs
            or i != 1
            or op is None
            or op.x_value != sp.profile.reward_amount
            or not verify_opening(pa, tx.input_sum.e_cm, op)
            or tx.payment_outputs[0].address in state.rewarded
        ):
            return "reward"
    else:
        if tx.reward_opening is not None:
            return "reward"
        if not tx.inputs or len(set(tx.inputs)) != len(tx.inputs) or any(r not in state.utxo for r in tx.inputs):
            return "inputs"
        if _input_aggregate(tx, state, registry) is None:
            return "inputs"

    dumb_id = sp.dumb_pk.key_id
    for out, cd in zip(tx.payment_outputs, tx.verification_outputs):
        if out.address not in registry or out.ciphertext.key_id != registry.key(out.address).key_id:
            return "outputs"
        pk = registry.key(out.address)
        if not 1 <= out.ciphertext.c_value < pk.n_squared or pk.n_value.bit_length() < min_key_bits(sp.profile):
            return "outputs"
        if cd.key_id != dumb_id or not 1 <= cd.c_value < pd.modulus:
            return "outputs"

    ctx = _context(tx.header_json())
    rp = sp.range_params
    for k, (cd, proof) in enumerate(zip(tx.verification_outputs, tx.range_proofs)):
        if not rangeproof.r_verify(rp, Commitment(cd.c_value, pd.params_id), 0, proof, context=_indexed(ctx, k)):
            return "RVer"
    prof = sp.profile
    for k, (out, cd, lp) in enumerate(zip(tx.payment_outputs, tx.verification_outputs, tx.link_proofs)):
        pk = registry.key(out.address)
        if not equalityproof.link_verify(pk, pd, out.ciphertext, cd, lp, prof.t, prof.l, prof.s, context=_indexed(ctx, k)):
            return "link"
    if tx.input_sum.f_cm.params_id != pd.params_id or tx.input_sum.e_cm.params_id != pa.params_id:
        return "EVer"
    if not equalityproof.aggregate_check(pd, tx.verification_outputs, tx.input_sum.f_cm):
        return "EVer"
    if not equalityproof.e_verify(sp.equality_params, tx.input_sum, tx.equality_proof, context=ctx):
        return "EVer"
    if tx.reward_flag:
        return None if tx.input_link is None and tx.spend_sig is None else "InLink"
    pk, c_in = _input_aggregate(tx, state, registry)
    if pk.n_value.bit_length() < min_key_bits(sp.profile) or tx.input_link is None:
        return "InLink"
    if not equalityproof.link_verify(pk, pa, c_in, tx.input_sum.e_cm, tx.input_link, prof.t, prof.l, prof.s, context=ctx + b"in"):
        return "InLink"
    sig = tx.spend_sig
    if sig is None or not 1 <= sig < pk.n_value:
        return "spend_sig"
    if arith.powmod(sig, pk.n_value, pk.n_value) != _sig_target(tx.signing_digest(), pk.n_value):
        return "spend_sig"
    return None


def verify_transaction(sp: SystemParams, registry: Registry, state: ChainState, tx: Transaction) -> bool:
    """True iff ``tx`` is valid against ``state``. Plaintexts are never touched."""
    return check_transaction(sp, registry, state, tx) is None


# -- blocks and chain --------------------------------------------------------


def merkle_root(tx_ids: Sequence[str]) -> str:
    """Binary hash tree over transaction ids; an odd node is promoted as is."""
    level = [hashlib.sha256(b"\x00" + bytes.fromhex(t)).digest() for t in tx_ids]
    if not level:
        return hashlib.sha256(b"mab/empty").hexdigest()
    while len(level) > 1:
        nxt = [hashlib.sha256(b"\x01" + level[j] + level[j + 1]).digest() for j in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0].hex()


def leader_for(height: int, view: int, k: int) -> int:
    return 1 + (height + view) % k


def quorum(k: int) -> int:
    return (k + 2) // 2  # ceil((k + 1) / 2)


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: str
    proposer: int
    view: int
    txs: tuple[Transaction, ...]
    merkle: str
    block_hash: str = ""

    def header(self) -> dict:
        return {
            "height": self.height,
            "prev_hash": self.prev_hash,
            "proposer": self.proposer,
            "view": self.view,
            "merkle_root": self.merkle,
        }

    def compute_hash(self) -> str:
        return sha256_hex(b"mab/block" + canonical(self.header()))

    def to_json(self) -> dict:
        return {**self.header(), "block_hash": self.block_hash, "txs": [t.to_json() for t in self.txs]}

    @classmethod
    def from_json(cls, doc: dict) -> "Block":
        return cls(
            doc["height"],
            doc["prev_hash"],
            doc["proposer"],
            doc["view"],
            tuple(Transaction.from_json(t) for t in doc["txs"]),
            doc["merkle_root"],
            doc["block_hash"],
        )


def make_block(height: int, prev_hash: str, proposer: int, view: int, txs: Sequence[Transaction]) -> Block:
    b = Block(height, prev_hash, proposer, view, tuple(txs), merkle_root([t.tx_id for t in txs]))
    return Block(**{**b.__dict__, "block_hash": b.compute_hash()})


class Chain:
    """Append-only list of blocks and the UTXO set folded from them."""

    def __init__(self, sp: SystemParams, registry: Registry):
        self.sp = sp
        self.registry = registry
        self.blocks: list[Block] = [make_block(0, sp.digest, GENESIS_PROPOSER, 0, ())]
        self.state = ChainState()
        self._index: dict[str, Transaction] = {}

    @property
    def height(self) -> int:
        return len(self.blocks) - 1

    @property
    def tip_hash(self) -> str:
        return self.blocks[-1].block_hash

    def find_tx(self, tx_id: str) -> Transaction:
        try:
            return self._index[tx_id]
        except KeyError:
            raise LedgerError(f"transaction {tx_id} is not confirmed") from None

    def output(self, tx_id: str, index: int) -> TxOutput:
        tx = self.find_tx(tx_id)
        if not 0 <= index < len(tx.payment_outputs):
            raise LedgerError(f"no payment output {index} in {tx_id}")
        return tx.payment_outputs[index]

    def block_problem(self, block: Block) -> str | None:
        """Why ``block`` cannot extend this chain, or ``None``."""
        if block.height != self.height + 1:
            return "height"
        if block.prev_hash != self.tip_hash:
            return "prev_hash"
        if block.proposer != leader_for(block.height, block.view, self.sp.party_count):
            return "proposer"
        ids = [t.tx_id for t in block.txs]
        if ids != sorted(ids) or len(set(ids)) != len(ids):
            return "ordering"
        if block.merkle != merkle_root(ids) or block.block_hash != block.compute_hash():
            return "hash"
        state = self.state.copy()
        for tx in block.txs:
            if not verify_transaction(self.sp, self.registry, state, tx):
                return f"tx {tx.tx_id[:16]}"
            state.apply(tx)
        return None

    def validate_block(self, block: Block) -> bool:
        return self.block_problem(block) is None

    def append(self, block: Block) -> None:
        problem = self.block_problem(block)
        if problem:
            raise ConsensusError(f"block {block.height} rejected: {problem}")
        for tx in block.txs:
            self.state.apply(tx)
            self._index[tx.tx_id] = tx
        self.blocks.append(block)

    def fork(self) -> "Chain":
        other = copy.copy(self)
        other.blocks = list(self.blocks)
        other.state = self.state.copy()
        other._index = dict(self._index)
        return other

    # persistence

    def save(self, directory: Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for b in self.blocks:
            (directory / f"block_{b.height:08d}.json").write_text(json.dumps(b.to_json(), indent=1))
        head = {
            "height": self.height,
            "tip_hash": self.tip_hash,
            "params_digest": self.sp.digest,
            "state_digest": self.state.digest(),
        }
        (directory / "chain_head.json").write_text(json.dumps(head, indent=1))

    @classmethod
    def load(cls, directory: Path, sp: SystemParams, registry: Registry, *, verify: bool = True) -> "Chain":
        """Rebuild a chain from disk, re-validating every block unless ``verify`` is off."""
        directory = Path(directory)
        head = json.loads((directory / "chain_head.json").read_text())
        chain = cls(sp, registry)
        blocks = [Block.from_json(json.loads((directory / f"block_{h:08d}.json").read_text())) for h in range(head["height"] + 1)]
        if blocks[0] != chain.blocks[0]:
            raise ConsensusError("genesis block does not match the system parameters")
        for b in blocks[1:]:
            if verify:
                chain.append(b)
            else:
                for tx in b.txs:
                    chain.state.apply(tx)
                    chain._index[tx.tx_id] = tx
                chain.blocks.append(b)
        return chain


def propose_block(
    chain: Chain, pool: Iterable[Transaction], proposer: int, view: int = 0, *, include_invalid: bool = False
) -> Block:
    """Leader's block: the valid subset of ``pool`` in ``tx_id`` order."""
    height = chain.height + 1
    if proposer != leader_for(height, view, chain.sp.party_count):
        raise ConsensusError(f"party {proposer} is not the leader for height {height} view {view}")
    unique = {tx.tx_id: tx for tx in pool}
    state = chain.state.copy()
    chosen = []
    for tx_id in sorted(unique):
        tx = unique[tx_id]
        if include_invalid or verify_transaction(chain.sp, chain.registry, state, tx):
            try:
                state.apply(tx)
            except KeyError:
                pass
            chosen.append(tx)
    return make_block(height, chain.tip_hash, proposer, view, chosen)


def tx_confirm(chain: Chain, pool: Iterable[Transaction], proposer: int, view: int = 0) -> Block:
    block = propose_block(chain, pool, proposer, view)
    chain.append(block)
    tick("block_confirm")
    return block


@dataclass
class Node:
    index: int
    chain: Chain
    online: bool = True
    faulty: bool = False  # proposes blocks without filtering invalid transactions

    def sync(self, peer: "Node") -> None:
        for b in peer.chain.blocks[self.chain.height + 1 :]:
            self.chain.append(b)


@dataclass
class RoundResult:
    committed: bool
    leader: int
    block: Block | None
    votes: dict[int, bool | None]


def make_nodes(sp: SystemParams, registry: Registry) -> list[Node]:
    base = Chain(sp, registry)
    return [Node(i, base.fork()) for i in range(1, sp.party_count + 1)]


def consensus_round(nodes: Sequence[Node], pool: Sequence[Transaction], view: int = 0) -> RoundResult:
    """One proposal and vote. The block commits with a majority of all ``k`` parties."""
    k = len(nodes)
    online = [n for n in nodes if n.online]
    if not online:
        raise ConsensusError("no party online")
    height = max(n.chain.height for n in online) + 1
    leader_idx = leader_for(height, view, k)
    leader = nodes[leader_idx - 1]
    if not leader.online or leader.chain.height + 1 != height:
        return RoundResult(False, leader_idx, None, {n.index: None for n in nodes})
    block = propose_block(leader.chain, pool, leader_idx, view, include_invalid=leader.faulty)
    tick("tx_broadcast", len(block.txs))
    votes: dict[int, bool | None] = {}
    for n in nodes:
        votes[n.index] = n.chain.validate_block(block) if n.online and n.chain.height + 1 == height else None
    committed = sum(1 for v in votes.values() if v) >= quorum(k)
    if committed:
        tick("block_confirm")
        for n in nodes:
            if votes[n.index]:
                n.chain.append(block)
    return RoundResult(committed, leader_idx, block, votes)


def run_until_committed(nodes: Sequence[Node], pool: Sequence[Transaction], max_views: int | None = None) -> RoundResult:
    """Retry with the next leader until a block commits or every view was tried."""
    last = None
    for view in range(max_views if max_views is not None else len(nodes)):
        last = consensus_round(nodes, pool, view)
        if last.committed:
            return last
    return last


# -- spending and audit ------------------------------------------------------


def spend_and_decrypt(
    wallet: Wallet,
    chain: Chain,
    tx_id: str,
    index: int,
    *,
    consortium: Consortium | None = None,
    layer: str = "payment",
) -> int:
    """Receiver-side decryption of a confirmed output."""
    if layer == "verification":
        raise DumbAccountError("dumb-account outputs have no private key")
    if layer != "payment":
        raise ValueError(f"unknown layer {layer!r}")
    out = chain.output(tx_id, index)
    if out.address != wallet.address:
        raise LedgerError(f"output belongs to {out.address!r}, not {wallet.address!r}")
    return wallet.decrypt(out.ciphertext, chain.sp, consortium)


def audit_chain(chain: Chain) -> bool:
    """Replay from genesis and compare every hash, proof and the UTXO fold."""
    replay = Chain(chain.sp, chain.registry)
    if not chain.blocks or chain.blocks[0] != replay.blocks[0]:
        return False
    for b in chain.blocks[1:]:
        if not replay.validate_block(b):
            return False
        replay.append(b)
    return replay.state.digest() == chain.state.digest() and replay.tip_hash == chain.tip_hash


def audit_directory(directory: Path, sp: SystemParams, registry: Registry) -> bool:
    """Audit a persisted chain, including the stored head record."""
    try:
        head = json.loads((Path(directory) / "chain_head.json").read_text())
        stored = Chain.load(directory, sp, registry, verify=False)
    except (OSError, ValueError, KeyError, TypeError):
        return False
    if head.get("params_digest") != sp.digest or head.get("tip_hash") != stored.tip_hash:
        return False
    if head.get("state_digest") != stored.state.digest():
        return False
    return audit_chain(stored)


def mint(
    sp: SystemParams | None,
    registry: Registry,
    address: str,
    rng: random.Random,
    *,
    reward: bool = True,
    key_mode: str = "consortium",
) -> tuple[Wallet, Transaction | None]:
    """Register ``address`` and optionally issue its one-time reward coin.

    ``key_mode="consortium"`` gives every receiver the joint modulus, so
    decryption needs all parties; ``"independent"`` makes a fresh key pair.
    """
    if sp is None or not sp.ceremony_complete:
        raise LedgerError("the consortium ceremony has not completed")
    if key_mode == "consortium":
        wallet = Wallet(address, sp.consortium_pk.public)
    elif key_mode == "independent":
        sk = paillier.h_keygen(2 * sp.profile.prime_bits, rng)
        wallet = Wallet(address, sk.public, sk)
    else:
        raise ValueError(f"unknown key mode {key_mode!r}")
    registry.register(address, wallet.public)
    coinbase = build_coinbase(sp, registry, address, rng) if reward else None
    return wallet, coinbase
