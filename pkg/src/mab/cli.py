"""``mab`` command line.

JSON results go to stdout, diagnostics to stderr. Exit status is 0 on
success, 1 when the operation fails or a verdict is negative, 2 on usage
errors. ``MAB_SEED`` fixes all randomness; ``MAB_PARAMS_DIR`` caches the
slow commitment-parameter setup.

A *home* directory holds one simulated consortium::

    system.json      public parameters
    consortium.json  every party's private shares (simulator only)
    registry.json    address -> public key
    wallets/         one file per address
    pool/            submitted transactions
    chain/           block_%08d.json + chain_head.json
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from mab import arith, cokeygen, flow, instrument, ledger, paillier, profiles


class CommandError(Exception):
    """Operation failed; message goes to stderr, exit status 1."""


def _emit(doc: dict) -> None:
    json.dump(doc, sys.stdout, indent=1, sort_keys=True)
    sys.stdout.write("\n")


def _seed(args) -> object:
    if getattr(args, "seed", None) is not None:
        return args.seed
    return os.environ.get("MAB_SEED")


def _write(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True), encoding="utf-8")


def _read(path: Path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CommandError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise CommandError(f"{path}: invalid JSON ({exc})") from None


# -- home directory ----------------------------------------------------------


class Home:
    def __init__(self, root: str | Path):
        self.root = Path(root)

    @property
    def exists(self) -> bool:
        return (self.root / "system.json").exists()

    def init(self, profile: str, parties: int, seed: object) -> None:
        prof = profiles.get_profile(profile)
        sp, con = ledger.setup_system(prof, parties, seed)
        _write(self.root / "system.json", sp.to_json())
        _write(
            self.root / "consortium.json",
            {
                "shares": [s.to_json() for s in con.shares],
                "paillier_shares": [
                    {"party_index": s.party_index, "exponent_hex": arith.to_hex(s.exponent)} for s in con.paillier_shares
                ],
            },
        )
        _write(self.root / "registry.json", {})
        ledger.Chain(sp, ledger.Registry()).save(self.root / "chain")

    def system(self) -> ledger.SystemParams:
        if not self.exists:
            raise CommandError(f"{self.root} is not initialised; run `mab mint` first")
        return ledger.SystemParams.from_json(_read(self.root / "system.json"))

    def consortium(self) -> ledger.Consortium:
        doc = _read(self.root / "consortium.json")
        return ledger.Consortium(
            [cokeygen.PartyShare.from_json(s) for s in doc["shares"]],
            [paillier.PaillierShare(s["party_index"], arith.from_hex(s["exponent_hex"])) for s in doc["paillier_shares"]],
        )

    def registry(self) -> ledger.Registry:
        return ledger.Registry.from_json(_read(self.root / "registry.json"))

    def save_registry(self, reg: ledger.Registry) -> None:
        _write(self.root / "registry.json", reg.to_json())

    def wallet(self, address: str) -> ledger.Wallet:
        path = self.root / "wallets" / f"{address}.json"
        if not path.exists():
            raise CommandError(f"no wallet for {address!r} in {self.root}")
        return ledger.Wallet.from_json(_read(path))

    def save_wallet(self, w: ledger.Wallet) -> None:
        _write(self.root / "wallets" / f"{w.address}.json", w.to_json())

    def chain(self, sp, reg) -> ledger.Chain:
        try:
            return ledger.Chain.load(self.root / "chain", sp, reg)
        except ledger.ConsensusError as exc:
            raise CommandError(f"stored chain is invalid: {exc}") from None

    def pool(self) -> dict[Path, ledger.Transaction]:
        d = self.root / "pool"
        return {p: ledger.Transaction.from_json(_read(p)) for p in sorted(d.glob("*.json"))} if d.exists() else {}

    def submit(self, tx: ledger.Transaction) -> Path:
        path = self.root / "pool" / f"{tx.tx_id}.json"
        _write(path, tx.to_json())
        return path


def _safe_address(address: str) -> str:
    if not address or any(c in address for c in "/\\:") or address.startswith("."):
        raise CommandError(f"invalid address {address!r}")
    return address


# -- commands ----------------------------------------------------------------


def cmd_cokeygen(args) -> int:
    cer = cokeygen.run_ceremony(args.parties, args.prime_bits, args.exponent, _seed(args))
    jm = cer.modulus
    share_files = []
    if args.out:
        out = Path(args.out)
        _write(out / "modulus.json", jm.public_json())
        _write(out / "transcript.json", jm.transcript_json())
        for s in cer.shares:
            path = out / f"party_{s.party_index:02d}.json"
            _write(path, s.to_json())
            share_files.append(str(path))
    _emit(
        {
            **jm.public_json(),
            "n_bits": jm.n_value.bit_length(),
            "candidates": cer.candidates,
            "restarts": cer.restarts,
            "transcript_hash": arith.digest_hex(jm.transcript_bytes()),
            "share_files": share_files,
        }
    )
    return 0


def cmd_mint(args) -> int:
    home = Home(args.home)
    seed = _seed(args)
    if not home.exists:
        print(f"initialising {home.root} ({args.params}, k={args.parties})", file=sys.stderr)
        home.init(args.params, args.parties, seed)
    sp, reg = home.system(), home.registry()
    address = _safe_address(args.address)
    rng = arith.make_rng(seed, "cli-mint", address)
    wallet, coinbase = ledger.mint(sp, reg, address, rng, reward=not args.no_reward, key_mode=args.key_mode)
    home.save_wallet(wallet)
    home.save_registry(reg)
    if coinbase is not None:
        home.submit(coinbase)
    _emit(
        {
            "address": address,
            "key_mode": args.key_mode,
            "key_id": wallet.public.key_id,
            "coinbase_tx": coinbase.tx_id if coinbase else None,
            "reward": sp.profile.reward_amount if coinbase else 0,
            "system_digest": sp.digest,
        }
    )
    return 0


def _outref(text: str) -> tuple[str, int]:
    tx_id, sep, idx = text.rpartition(":")
    if not sep or not tx_id or not idx.isdigit():
        raise argparse.ArgumentTypeError(f"expected TXID:INDEX, got {text!r}")
    return tx_id, int(idx)


def _outspec(text: str) -> tuple[str, int]:
    addr, sep, amount = text.rpartition(":")
    try:
        return addr, int(amount)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected ADDRESS:AMOUNT, got {text!r}") from None


def cmd_tx_build(args) -> int:
    home = Home(args.home)
    sp, reg = home.system(), home.registry()
    chain = home.chain(sp, reg)
    sender = home.wallet(args.sender)
    rng = arith.make_rng(_seed(args), "cli-tx", chain.tip_hash, *args.inputs)
    tx = ledger.build_transaction(sp, reg, sender, chain, args.inputs, args.outputs, rng, consortium=home.consortium())
    pool_file = str(home.submit(tx)) if args.submit else None
    _emit({"transaction": tx.to_json(), "submitted": bool(args.submit), "pool_file": pool_file})
    return 0


def cmd_tx_verify(args) -> int:
    home = Home(args.home)
    sp, reg = home.system(), home.registry()
    chain = home.chain(sp, reg)
    doc = _read(Path(args.file))
    if "transaction" in doc:  # accept `tx build` output as is
        doc = doc["transaction"]
    try:
        tx = ledger.Transaction.from_json(doc)
    except (KeyError, TypeError, ValueError) as exc:
        _emit({"tx_id": str(doc.get("tx_id", "")), "valid": False, "problem": f"malformed: {exc}"})
        return 1
    problem = ledger.check_transaction(sp, reg, chain.state, tx)
    _emit({"tx_id": tx.tx_id, "valid": problem is None, "problem": problem})
    return 0 if problem is None else 1


def cmd_block_propose(args) -> int:
    home = Home(args.home)
    sp, reg = home.system(), home.registry()
    chain = home.chain(sp, reg)
    pool = home.pool()
    nodes = [ledger.Node(i, chain.fork()) for i in range(1, sp.party_count + 1)]
    res = ledger.consensus_round(nodes, list(pool.values()), args.view)
    dropped = []
    if res.committed:
        new_chain = nodes[res.leader - 1].chain
        new_chain.save(home.root / "chain")
        included = {t.tx_id for t in res.block.txs}
        for path, tx in pool.items():
            if tx.tx_id in included or not ledger.verify_transaction(sp, reg, new_chain.state, tx):
                path.unlink()
                if tx.tx_id not in included:
                    dropped.append(tx.tx_id)
    _emit(
        {
            "committed": res.committed,
            "height": res.block.height if res.block else chain.height + 1,
            "leader": res.leader,
            "view": args.view,
            "block_hash": res.block.block_hash if res.committed else None,
            "tx_ids": [t.tx_id for t in res.block.txs] if res.block else [],
            "votes": {str(k): v for k, v in res.votes.items()},
            "dropped": dropped,
        }
    )
    return 0 if res.committed else 1


def cmd_chain_audit(args) -> int:
    home = Home(args.home)
    sp, reg = home.system(), home.registry()
    ok = ledger.audit_directory(home.root / "chain", sp, reg)
    head = {}
    try:
        head = _read(home.root / "chain" / "chain_head.json")
    except CommandError:
        pass
    _emit({"valid": ok, "height": head.get("height"), "tip_hash": head.get("tip_hash")})
    return 0 if ok else 1


def cmd_wallet_balance(args) -> int:
    home = Home(args.home)
    sp, reg = home.system(), home.registry()
    chain = home.chain(sp, reg)
    w = home.wallet(args.address)
    con = home.consortium() if w.secret is None else None
    unspent = [
        {"tx_id": t, "index": i, "amount": w.decrypt(o.ciphertext, sp, con)}
        for (t, i), o in sorted(chain.state.utxo.items())
        if o.address == w.address
    ]
    _emit({"address": w.address, "balance": sum(u["amount"] for u in unspent), "unspent": unspent})
    return 0


def cmd_flow_run(args) -> int:
    doc = _read(Path(args.config)) if args.config else {}
    if args.params:
        doc["profile"] = args.params
    seed = _seed(args)
    if seed is not None:
        doc["seed"] = seed
    if args.parties is not None:
        doc["parties"] = args.parties
    if args.fault:
        doc["fault"] = args.fault
    report = flow.run_transaction_flow(flow.FlowConfig.from_json(doc))
    text = report.dumps()
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    sys.stdout.write(text + "\n")
    if not report.ok:
        print(f"flow halted at {report.halted_at}", file=sys.stderr)
    return 0 if report.ok else 1


def cmd_measure(args) -> int:
    seed = _seed(args)
    rep = instrument.measure(args.scope, args.params, args.i, args.parties, 0 if seed is None else seed)
    _emit(rep.to_json())
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mab", description="Multi-center anonymous consortium blockchain simulator.")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def seed(sp):
        sp.add_argument("--seed", help="deterministic seed (default: $MAB_SEED, else OS entropy)")

    def home(sp):
        sp.add_argument("--home", default=".mab", help="consortium home directory (default: .mab)")

    c = sub.add_parser("cokeygen", help="run a joint RSA-modulus ceremony")
    c.add_argument("--parties", type=int, default=3)
    c.add_argument("--prime-bits", type=int, default=profiles.TEST.prime_bits)
    c.add_argument("--exponent", type=int, default=65537)
    c.add_argument("--out", help="directory for modulus, transcript and shares")
    seed(c)
    c.set_defaults(func=cmd_cokeygen)

    c = sub.add_parser("mint", help="register an address and issue its reward coin")
    home(c)
    c.add_argument("--address", required=True)
    c.add_argument("--no-reward", action="store_true")
    c.add_argument("--key-mode", choices=["consortium", "independent"], default="independent")
    c.add_argument("--params", choices=sorted(profiles.PROFILES), default="test", help="profile used on first mint")
    c.add_argument("--parties", type=int, default=3, help="consortium size used on first mint")
    seed(c)
    c.set_defaults(func=cmd_mint)

    tx = sub.add_parser("tx", help="build or verify transactions").add_subparsers(dest="tx_command", required=True, metavar="ACTION")
    c = tx.add_parser("build", help="spend inputs into encrypted outputs")
    home(c)
    c.add_argument("--from", dest="sender", required=True)
    c.add_argument("--in", dest="inputs", type=_outref, action="append", required=True, metavar="TXID:INDEX")
    c.add_argument("--out", dest="outputs", type=_outspec, action="append", required=True, metavar="ADDRESS:AMOUNT")
    c.add_argument("--submit", action="store_true", help="add the transaction to the pool")
    seed(c)
    c.set_defaults(func=cmd_tx_build)
    c = tx.add_parser("verify", help="check a transaction against the current chain")
    home(c)
    c.add_argument("file")
    c.set_defaults(func=cmd_tx_verify)

    blk = sub.add_parser("block", help="block operations").add_subparsers(dest="block_command", required=True, metavar="ACTION")
    c = blk.add_parser("propose", help="one consensus round over the pool")
    home(c)
    c.add_argument("--view", type=int, default=0)
    c.set_defaults(func=cmd_block_propose)

    ch = sub.add_parser("chain", help="chain operations").add_subparsers(dest="chain_command", required=True, metavar="ACTION")
    c = ch.add_parser("audit", help="replay the stored chain from genesis")
    home(c)
    c.set_defaults(func=cmd_chain_audit)

    wl = sub.add_parser("wallet", help="wallet operations").add_subparsers(dest="wallet_command", required=True, metavar="ACTION")
    c = wl.add_parser("balance", help="decrypt an address's unspent outputs")
    home(c)
    c.add_argument("--address", required=True)
    c.set_defaults(func=cmd_wallet_balance)

    fl = sub.add_parser("flow", help="end-to-end transaction flow").add_subparsers(dest="flow_command", required=True, metavar="ACTION")
    c = fl.add_parser("run", help="execute every workflow line and report")
    c.add_argument("--config", help="flow config JSON")
    c.add_argument("--params", choices=sorted(profiles.PROFILES))
    c.add_argument("--parties", type=int)
    c.add_argument("--fault", choices=[f for f in flow.FAULTS if f])
    c.add_argument("--out", help="also write the report here")
    seed(c)
    c.set_defaults(func=cmd_flow_run)

    c = sub.add_parser("measure", help="operation counts beside the reference cost model")
    c.add_argument("--scope", choices=instrument.SCOPES, required=True)
    c.add_argument("--params", choices=sorted(profiles.PROFILES), default="test")
    c.add_argument("--i", type=int, default=2, help="number of outputs")
    c.add_argument("--parties", type=int, default=3)
    seed(c)
    c.set_defaults(func=cmd_measure)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"mab: {exc}", file=sys.stderr)
    except (ValueError, RuntimeError, KeyError, OSError) as exc:
        print(f"mab: {type(exc).__name__}: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
