"""Experiment drivers shared by the property tests and the acceptance gate."""
from __future__ import annotations

import dataclasses
import itertools
import json
import math
import random
import re
from pathlib import Path

from mab import arith, cokeygen, ledger, paillier, profiles

HEXISH = re.compile(r"-?[0-9a-f]+")


def brute_prime(n: int) -> bool:
    """Trial division oracle, independent of arith's primality test."""
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    return all(n % d for d in range(3, math.isqrt(n) + 1, 2))


def plant_composite(rng: random.Random, k: int):
    """Shares of a composite p = r1 * r2 = 3 mod 4 with no factor below 2^15."""
    while True:
        r1 = arith.gen_prime(arith.PrimeSpec(16, (1, 4)), rng)
        r2 = arith.gen_prime(arith.PrimeSpec(16, (3, 4)), rng)
        q = arith.gen_prime(arith.PrimeSpec(32, (3, 4)), rng)
        p = r1 * r2
        if p.bit_length() == 32:
            return cokeygen.shares_for(p, q, k, rng)


def planted_rejected(seed: int, k: int, rounds: int = 20) -> bool:
    shares = plant_composite(random.Random(seed), k)
    try:
        jm = cokeygen.co_n(shares, bound=10_000)
    except cokeygen.TrialDivisionError:
        return True
    return not cokeygen.biprimality_test(jm, shares, rounds=rounds, rng=random.Random(seed))


class World:
    """Fresh registry and k simulated nodes on top of a shared system."""

    def __init__(self, system, seed="world"):
        self.sp, self.con = system
        self.reg = ledger.Registry()
        self.rng = arith.make_rng(seed, "world")
        self.nodes = ledger.make_nodes(self.sp, self.reg)
        self.wallets = {}

    @property
    def chain(self):
        return self.nodes[0].chain

    def mint(self, address, reward=True, key_mode="independent"):
        w, cb = ledger.mint(self.sp, self.reg, address, self.rng, reward=reward, key_mode=key_mode)
        self.wallets[address] = w
        if cb is not None:
            assert ledger.consensus_round(self.nodes, [cb]).committed
        return w, cb

    def pay(self, sender, inputs, outputs, **kw):
        return ledger.build_transaction(
            self.sp, self.reg, self.wallets[sender], self.chain, inputs, outputs, self.rng, consortium=self.con, **kw
        )

    def commit(self, txs):
        res = ledger.consensus_round(self.nodes, txs)
        assert res.committed
        return res

    def unspent_total(self):
        return sum(
            self.wallets[o.address].decrypt(o.ciphertext, self.sp, self.con) for o in self.chain.state.utxo.values()
        )


# -- BAL ---------------------------------------------------------------------


def bal_profile(reward: int = 6) -> profiles.SecurityProfile:
    return dataclasses.replace(profiles.TEST, name=f"bal{reward}", reward_amount=reward)


def bal_experiment(system, max_len: int = 3, values=range(7)):
    """Every output vector over ``values`` of length 1..max_len against the plaintext predicate.

    Returns (cases, disagreements, rejected_at) where rejected_at counts the
    first failing stage of each rejected transaction.
    """
    w = World(system, "bal")
    m_in = w.sp.profile.reward_amount
    _, cb = w.mint("alice")
    w.mint("bob", reward=False)
    w.mint("carol", reward=False)
    names = ["bob", "carol", "alice"]
    cases = disagreements = 0
    stages: dict[str, int] = {}
    for size in range(1, max_len + 1):
        for amounts in itertools.product(values, repeat=size):
            tx = w.pay("alice", [(cb.tx_id, 0)], list(zip(names, amounts)), force=True)
            problem = ledger.check_transaction(w.sp, w.reg, w.chain.state, tx)
            expected = all(m >= 1 for m in amounts) and sum(amounts) == m_in
            cases += 1
            disagreements += (problem is None) != expected
            if problem is not None:
                stages[problem] = stages.get(problem, 0) + 1
    return cases, disagreements, stages


# -- N-MAL -------------------------------------------------------------------


def _paths(doc, prefix=()):
    if isinstance(doc, dict):
        for k, v in doc.items():
            yield from _paths(v, prefix + (k,))
    elif isinstance(doc, list):
        yield prefix, doc
        for i, v in enumerate(doc):
            yield from _paths(v, prefix + (i,))
    elif doc is not None:
        yield prefix, doc


def _set(doc, path, value):
    for p in path[:-1]:
        doc = doc[p]
    doc[path[-1]] = value


def mutate(doc: dict, rng: random.Random, addresses=()) -> tuple[dict, tuple]:
    """Copy of ``doc`` with exactly one field changed."""
    out = json.loads(json.dumps(doc))
    path, value = rng.choice(list(_paths(out)))
    if isinstance(value, bool):
        new = not value
    elif isinstance(value, int):
        new = value + rng.choice([-1, 1])
    elif isinstance(value, list):
        new = list(value)
        if len(new) > 1 and rng.random() < 0.5:
            i, j = rng.sample(range(len(new)), 2)
            new[i], new[j] = new[j], new[i]
            if new == value:
                new.pop()
        elif new and rng.random() < 0.5:
            new.pop(rng.randrange(len(new)))
        else:
            new.append(rng.choice(new) if new else 0)
    elif path[-1] == "address" or not HEXISH.fullmatch(value):
        others = [a for a in addresses if a != value]
        new = rng.choice(others) if others else value + "x"
    else:
        x = arith.from_hex(value) if not value.startswith("0") or value == "0" else int(value, 16)
        x ^= 1 << rng.randrange(max(x.bit_length(), 1) + 1)
        new = format(x, "x") if x >= 0 else "-" + format(-x, "x")
        if len(value) == 64:
            new = new.zfill(64)
    if path:
        _set(out, path, new)
    else:
        out = new
    return out, path


def confirmed_corpus(system, seed="nmal"):
    """Confirmed transactions, each with the registry and pre-state it was validated against."""
    corpus = []
    cbw = World(system, f"{seed}-cb")
    state0 = cbw.chain.state.copy()
    cbw.mint("zed")
    corpus.append((cbw.chain.blocks[-1].txs[0], state0, cbw.reg))

    w = World(system, seed)
    _, cb_a = w.mint("alice")
    w.mint("bob", key_mode="consortium")
    w.mint("carol", reward=False)
    for sender, outputs in (("alice", [("bob", 20), ("carol", 30)]), ("bob", [("carol", 69), ("alice", 1)])):
        inputs = [ref for ref, o in w.chain.state.utxo.items() if o.address == sender]
        tx = w.pay(sender, inputs, outputs)
        pre = w.chain.state.copy()
        w.commit([tx])
        corpus.append((tx, pre, w.reg))
    return w, corpus


def nmal_experiment(system, trials: int = 1000, seed: int = 0):
    """Single-field mutations of confirmed transactions.

    Returns (trials, escapes, verified_unchanged) where an escape is a mutant
    that still verifies with the original tx_id.
    """
    w, corpus = confirmed_corpus(system)
    rng = random.Random(seed)
    addresses = sorted(w.wallets) + ["zed"]
    escapes = 0
    for _ in range(trials):
        tx, pre, reg = rng.choice(corpus)
        doc, _path = mutate(tx.to_json(), rng, addresses)
        if doc == tx.to_json():
            escapes += 1  # the mutator must always change something
            continue
        try:
            mutant = ledger.Transaction.from_json(doc)
            ok = ledger.verify_transaction(w.sp, reg, pre, mutant)
        except (ValueError, KeyError, TypeError, AttributeError, IndexError):
            continue
        if ok and mutant.tx_id == tx.tx_id:
            escapes += 1
    return trials, escapes


# -- ANY ---------------------------------------------------------------------

ANY_REWARD = 0xD1CEB00B
ANY_SPLITS = ((0x9E3779B9,), (0x7F4A7C15,))


def any_profile() -> profiles.SecurityProfile:
    return dataclasses.replace(profiles.TEST, name="any", reward_amount=ANY_REWARD)


def encodings(m: int) -> list[bytes]:
    size = (m.bit_length() + 7) // 8
    return [
        format(m, "x").encode(),
        format(m, "X").encode(),
        str(m).encode(),
        m.to_bytes(size, "big"),
        m.to_bytes(size, "little"),
        m.to_bytes(8, "big"),
        m.to_bytes(8, "little"),
    ]


def _strip_openings(doc):
    if isinstance(doc, dict):
        return {k: _strip_openings(v) for k, v in doc.items() if k != "reward_opening"}
    if isinstance(doc, list):
        return [_strip_openings(v) for v in doc]
    return doc


def any_chain(system, directory: Path):
    """Two transfers with distinctive amounts, saved to ``directory``."""
    w = World(system, "any")
    _, cb = w.mint("alice", key_mode="consortium")
    w.mint("bob", reward=False)
    w.mint("carol", reward=False)
    a = ANY_SPLITS[0][0]
    t1 = w.pay("alice", [(cb.tx_id, 0)], [("bob", a), ("alice", ANY_REWARD - a)])
    w.commit([t1])
    b = ANY_SPLITS[1][0]
    t2 = w.pay("bob", [(t1.tx_id, 0)], [("carol", b), ("bob", a - b)])
    w.commit([t2])
    w.chain.save(directory)
    hidden = [a, ANY_REWARD - a, b, a - b]
    return w, hidden


def any_scan(system, directory: Path):
    """Return the list of (amount, encoding) hits found in the saved chain."""
    w, hidden = any_chain(system, directory)
    blob = b"".join(p.read_bytes() for p in sorted(Path(directory).iterdir()))
    hits = [(m, e) for m in hidden for e in encodings(m) if e in blob]
    # the reward is public by design inside the coinbase opening and nowhere else
    stripped = b"".join(
        json.dumps(_strip_openings(json.loads(p.read_text()))).encode() for p in sorted(Path(directory).iterdir())
    )
    hits += [(ANY_REWARD, e) for e in encodings(ANY_REWARD) if e in stripped]
    assert format(ANY_REWARD, "x").encode() in blob  # sanity: the scanner would have seen it
    assert ledger.audit_directory(directory, w.sp, w.reg)
    return hits, hidden, w


def distinct_ciphertexts(pk: paillier.PaillierPublicKey, m: int, samples: int, rng: random.Random) -> int:
    return len({paillier.h_enc(pk, m, rng=rng).c_value for _ in range(samples)})


# -- consensus ---------------------------------------------------------------


def consensus_sim(system, seed: int):
    """One 3-party run with a random pool and random faulty or offline parties.

    Returns a dict of observations; the caller asserts on them.
    """
    rng = random.Random(seed)
    w = World(system, f"cons{seed}")
    _, cb_a = w.mint("alice")
    _, cb_b = w.mint("bob")
    w.mint("carol", reward=False)
    x = rng.randint(1, 49)
    valid = [w.pay("alice", [(cb_a.tx_id, 0)], [("carol", x), ("alice", 50 - x)])]
    double = w.pay("alice", [(cb_a.tx_id, 0)], [("bob", 50)])  # conflicts with valid[0]
    invalid = [
        w.pay("bob", [(cb_b.tx_id, 0)], [("carol", 51)], force=True),
        w.pay("bob", [(cb_b.tx_id, 0)], [("carol", 0), ("bob", 50)], force=True),
    ]
    if rng.random() < 0.5:
        valid.append(w.pay("bob", [(cb_b.tx_id, 0)], [("alice", 50)]))
    pool = valid + [double] + invalid
    rng.shuffle(pool)
    roles = rng.sample(range(3), 2)
    faulty = roles[0] if rng.random() < 0.7 else None
    offline = roles[1] if rng.random() < 0.5 else None
    for i, n in enumerate(w.nodes):
        n.faulty = i == faulty
        n.online = i != offline
    committed_rounds = bad_proposals = bad_commits = 0
    invalid_ids = {t.tx_id for t in invalid}
    for _ in range(3):
        top = max(w.nodes, key=lambda n: n.chain.height)
        done = {t.tx_id for b in top.chain.blocks for t in b.txs}
        remaining = [t for t in pool if t.tx_id not in done]
        for view in range(3):
            res = ledger.consensus_round(w.nodes, remaining, view)
            bad = res.block is not None and any(t.tx_id in invalid_ids for t in res.block.txs)
            bad_proposals += bad
            bad_commits += bad and res.committed
            if res.committed:
                committed_rounds += 1
                break
    # the offline party rejoins and catches up from any up-to-date peer
    top = max(w.nodes, key=lambda n: n.chain.height)
    for n in w.nodes:
        n.online = True
        if n.chain.height < top.chain.height:
            n.sync(top)
    committed_ids = {t.tx_id for b in top.chain.blocks for t in b.txs}
    return {
        "tips": {n.chain.tip_hash for n in w.nodes},
        "invalid_committed": [t.tx_id for t in invalid if t.tx_id in committed_ids],
        "double_spend_both": valid[0].tx_id in committed_ids and double.tx_id in committed_ids,
        "audit": all(ledger.audit_chain(n.chain) for n in w.nodes),
        "conserved": w.unspent_total() == 50 * 2,
        "committed_rounds": committed_rounds,
        "bad_proposals": bad_proposals,
        "bad_commits": bad_commits,
        "faulty": faulty,
        "offline": offline,
    }
