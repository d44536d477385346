"""End-to-end transaction flow, one report entry per line of the workflow.

Lines: rdmPara, CoN, BipriTest, KeyGen, Mint, HEnc, HOper, RInact, RVer,
EInact, EVer, Spend, TxConfirm, HDec. The run stops at the first line whose
verdict is 0; later lines are reported as skipped.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Callable

from mab import arith, cokeygen, equalityproof, ledger, paillier, profiles, rangeproof
from mab.commitments import Commitment
from mab.counters import OpCounters, counting

LINES = (
    "rdmPara",
    "CoN",
    "BipriTest",
    "KeyGen",
    "Mint",
    "HEnc",
    "HOper",
    "RInact",
    "RVer",
    "EInact",
    "EVer",
    "Spend",
    "TxConfirm",
    "HDec",
)
FAULTS = (None, "wrong_sum", "zero_output", "mutated_proof")


@dataclass
class FlowConfig:
    profile: str = "test"
    seed: object = 0
    parties: int = 3
    sender: str = "alice"
    outputs: list[tuple[str, int]] = field(default_factory=lambda: [("bob", 20), ("alice", 30)])
    key_mode: str = "consortium"
    fault: str | None = None

    def __post_init__(self):
        self.outputs = [(str(a), int(m)) for a, m in self.outputs]
        if self.fault not in FAULTS:
            raise ValueError(f"unknown fault {self.fault!r}; choose from {FAULTS[1:]}")
        if self.parties < 2:
            raise ValueError("a consortium needs at least two parties")
        if not self.outputs:
            raise ValueError("need at least one output")

    @classmethod
    def from_json(cls, doc: dict) -> "FlowConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def to_json(self) -> dict:
        return {**dataclasses.asdict(self), "outputs": [list(o) for o in self.outputs]}


@dataclass
class FlowReport:
    config: dict
    lines: list[dict] = field(default_factory=list)
    halted_at: str | None = None

    @property
    def ok(self) -> bool:
        return self.halted_at is None and len(self.lines) == len(LINES) and all(x["verdict"] == 1 for x in self.lines)

    def to_json(self) -> dict:
        return {"config": self.config, "ok": self.ok, "halted_at": self.halted_at, "lines": self.lines}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True)


def _short(x: int) -> str:
    return arith.digest_hex(arith.int_to_bytes(x))[:16]


class _Runner:
    def __init__(self, report: FlowReport):
        self.report = report

    def line(self, name: str, fn: Callable[[], tuple[int, dict]]) -> bool:
        if self.report.halted_at is not None:
            self.report.lines.append({"line": LINES.index(name) + 1, "name": name, "status": "skipped", "verdict": 0})
            return False
        ops = OpCounters()
        with counting(ops):
            try:
                verdict, detail = fn()
            except (ValueError, RuntimeError) as exc:
                verdict, detail = 0, {"error": f"{type(exc).__name__}: {exc}"}
        self.report.lines.append(
            {
                "line": LINES.index(name) + 1,
                "name": name,
                "status": "ok" if verdict else "failed",
                "verdict": int(verdict),
                "detail": detail,
                "ops": ops.by_symbol(),
            }
        )
        if not verdict:
            self.report.halted_at = name
        return bool(verdict)


def _mutate_proof(tx: ledger.Transaction) -> ledger.Transaction:
    p = tx.range_proofs[0]
    pk3 = dataclasses.replace(p.pk3, responses=(p.pk3.responses[0] ^ 1,) + p.pk3.responses[1:])
    proofs = (dataclasses.replace(p, pk3=pk3),) + tx.range_proofs[1:]
    return ledger._with_id(dataclasses.replace(tx, range_proofs=proofs, tx_id=""))


def run_transaction_flow(config: FlowConfig) -> FlowReport:
    prof = profiles.get_profile(config.profile)
    seed = config.seed
    report = FlowReport(config.to_json())
    run = _Runner(report)
    k = config.parties
    st: dict = {}

    def rdm_para():
        # same per-party streams the ceremony uses for its first candidate
        rngs = [arith.make_rng(seed, "party", i) for i in range(1, k + 1)]
        shares = cokeygen.rdm_para(prof.prime_bits, k, rngs)
        residues = [(s.p_share % 4, s.q_share % 4) for s in shares]
        ok = residues[0] == (3, 3) and all(r == (0, 0) for r in residues[1:])
        return int(ok), {"parties": k, "prime_bits": prof.prime_bits, "share_count": 2 * k}

    def co_n():
        cer = cokeygen.run_ceremony(
            k, prof.prime_bits, prof.exponent, seed, trial_bound=prof.trial_division_bound, rounds=prof.biprimality_rounds
        )
        st["ceremony"] = cer
        jm = cer.modulus
        return int(jm.n_value % 2 == 1), {
            "n_hex": arith.to_hex(jm.n_value),
            "candidates": cer.candidates,
            "restarts": cer.restarts,
            "trial_bound": jm.trial_bound,
        }

    def bipri():
        jm = st["ceremony"].modulus
        rounds = [m for m in jm.transcript if m.kind == "bipri-g"]
        return int(jm.biprime_verified), {"rounds_final_candidate": prof.biprimality_rounds, "rounds_total": len(rounds)}

    def keygen():
        cer = st["ceremony"]
        jm = cer.modulus
        probe = 2
        c = pow(probe, jm.e_public, jm.n_value)
        back = cokeygen.combine([cokeygen.threshold_decrypt_contrib(s, c, jm) for s in cer.shares], jm)
        return int(back == probe), {"e_hex": arith.to_hex(jm.e_public), "d_shares": len(cer.shares)}

    def mint():
        cer = st["ceremony"]
        tpk, pshares = paillier.consortium_key(cer.modulus, cer.shares, arith.make_rng(seed, "consortium-paillier"))
        alpha, dumb = profiles.commitment_params(prof, seed)
        sp = ledger.SystemParams(prof, cer.modulus, tpk, alpha, dumb)
        con = ledger.Consortium(cer.shares, pshares)
        reg = ledger.Registry()
        rng = arith.make_rng(seed, "flow-mint")
        wallets, coinbase = {}, None
        names = [config.sender] + sorted({a for a, _ in config.outputs} - {config.sender})
        for name in names:
            w, cb = ledger.mint(sp, reg, name, rng, reward=name == config.sender, key_mode=config.key_mode)
            wallets[name] = w
            coinbase = coinbase or cb
        nodes = ledger.make_nodes(sp, reg)
        res = ledger.consensus_round(nodes, [coinbase])
        st.update(sp=sp, con=con, reg=reg, wallets=wallets, coinbase=coinbase, nodes=nodes)
        return int(res.committed and len(res.block.txs) == 1), {
            "addresses": names,
            "key_ids": {a: w.public.key_id for a, w in wallets.items()},
            "dumb_key_id": sp.dumb_pk.key_id,
            "reward": prof.reward_amount,
            "coinbase_tx": coinbase.tx_id,
        }

    def h_enc():
        sp, reg, nodes = st["sp"], st["reg"], st["nodes"]
        outputs = list(config.outputs)
        if config.fault == "wrong_sum":
            outputs[0] = (outputs[0][0], outputs[0][1] + 1)
        elif config.fault == "zero_output":
            # move the first amount onto the last output so only positivity breaks
            moved = outputs[0][1]
            outputs[0] = (outputs[0][0], 0)
            if len(outputs) > 1:
                outputs[-1] = (outputs[-1][0], outputs[-1][1] + moved)
        tx = ledger.build_transaction(
            sp,
            reg,
            st["wallets"][config.sender],
            nodes[0].chain,
            [(st["coinbase"].tx_id, 0)],
            outputs,
            arith.make_rng(seed, "flow-tx"),
            consortium=st["con"],
            force=config.fault is not None,
        )
        if config.fault == "mutated_proof":
            tx = _mutate_proof(tx)
        st["tx"] = tx
        return 1, {
            "outputs": len(tx.payment_outputs),
            "payment_c": [_short(o.ciphertext.c_value) for o in tx.payment_outputs],
            "verification_c": [_short(c.c_value) for c in tx.verification_outputs],
        }

    def h_oper():
        sp, tx = st["sp"], st["tx"]
        cm = paillier.h_oper(list(tx.verification_outputs), sp.dumb_pk)
        st["CM"] = cm
        return int(cm.c_value == tx.input_sum.f_cm.value), {"CM": _short(cm.c_value)}

    def r_inact():
        tx = st["tx"]
        return int(len(tx.range_proofs) == len(tx.payment_outputs)), {
            "proofs": len(tx.range_proofs),
            "v_bits": [p.v.bit_length() for p in tx.range_proofs],
        }

    def r_ver():
        sp, tx = st["sp"], st["tx"]
        ctx = ledger._context(tx.header_json())
        verdicts = [
            rangeproof.r_verify(
                sp.range_params, Commitment(c.c_value, sp.params_d.params_id), 0, p, context=ledger._indexed(ctx, i)
            )
            for i, (c, p) in enumerate(zip(tx.verification_outputs, tx.range_proofs))
        ]
        return int(all(verdicts)), {"verdicts": [int(v) for v in verdicts]}

    def e_inact():
        tx = st["tx"]
        return 1, {"u": _short(tx.equality_proof.u_value), "E": _short(tx.input_sum.e_cm.value)}

    def e_ver():
        sp, tx = st["sp"], st["tx"]
        ctx = ledger._context(tx.header_json())
        agg = equalityproof.aggregate_check(sp.params_d, tx.verification_outputs, tx.input_sum.f_cm)
        eq = equalityproof.e_verify(sp.equality_params, tx.input_sum, tx.equality_proof, context=ctx)
        return int(agg and eq), {"aggregate": int(agg), "equality": int(eq)}

    def spend():
        sp, reg, tx = st["sp"], st["reg"], st["tx"]
        problem = ledger.check_transaction(sp, reg, st["nodes"][0].chain.state, tx)
        return int(problem is None), {"tx_id": tx.tx_id, "problem": problem, "receivers": [o.address for o in tx.payment_outputs]}

    def confirm():
        res = ledger.consensus_round(st["nodes"], [st["tx"]])
        tips = {n.chain.tip_hash for n in st["nodes"]}
        ok = res.committed and st["tx"] in res.block.txs and len(tips) == 1
        return int(ok), {"height": res.block.height, "leader": res.leader, "block_hash": res.block.block_hash, "votes": res.votes}

    def h_dec():
        tx, chain = st["tx"], st["nodes"][0].chain
        got = [
            ledger.spend_and_decrypt(st["wallets"][o.address], chain, tx.tx_id, i, consortium=st["con"])
            for i, o in enumerate(tx.payment_outputs)
        ]
        return int(got == [m for _, m in config.outputs]), {"amounts": got}

    for name, fn in zip(
        LINES, (rdm_para, co_n, bipri, keygen, mint, h_enc, h_oper, r_inact, r_ver, e_inact, e_ver, spend, confirm, h_dec)
    ):
        run.line(name, fn)
    return report
