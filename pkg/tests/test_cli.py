import json
import subprocess
import sys

import jsonschema
import pytest

from mab import cli
from mab.schemas import SCHEMAS


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


def check(name, doc):
    jsonschema.Draft202012Validator(SCHEMAS[name]).validate(doc)


@pytest.fixture
def home(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("MAB_SEED", "cli")
    h = str(tmp_path / "home")
    code, doc, _ = run(capsys, "mint", "--home", h, "--address", "alice")
    assert code == 0
    check("mint", doc)
    code, bob, _ = run(capsys, "mint", "--home", h, "--address", "bob", "--no-reward")
    assert code == 0 and bob["coinbase_tx"] is None
    code, blk, _ = run(capsys, "block", "propose", "--home", h)
    assert code == 0 and blk["committed"]
    check("block propose", blk)
    return h, doc["coinbase_tx"]


def test_schemas_are_valid():
    for schema in SCHEMAS.values():
        jsonschema.Draft202012Validator.check_schema(schema)


def test_full_cli_session(home, capsys, tmp_path):
    h, cb = home
    code, built, _ = run(capsys, "tx", "build", "--home", h, "--from", "alice", "--in", f"{cb}:0", "--out", "bob:20", "--out", "alice:30", "--submit")
    assert code == 0 and built["submitted"]
    check("tx build", built)
    txf = tmp_path / "tx.json"
    txf.write_text(json.dumps(built))
    code, ver, _ = run(capsys, "tx", "verify", "--home", h, str(txf))
    assert code == 0 and ver["valid"]
    check("tx verify", ver)
    code, blk, _ = run(capsys, "block", "propose", "--home", h)
    assert code == 0 and blk["tx_ids"] == [built["transaction"]["tx_id"]]
    code, bal, _ = run(capsys, "wallet", "balance", "--home", h, "--address", "bob")
    assert code == 0 and bal["balance"] == 20
    check("wallet balance", bal)
    code, aud, _ = run(capsys, "chain", "audit", "--home", h)
    assert code == 0 and aud["valid"] and aud["height"] == 2
    check("chain audit", aud)
    # spent now: verifying again fails
    code, ver, _ = run(capsys, "tx", "verify", "--home", h, str(txf))
    assert code == 1 and ver["problem"] == "inputs"


def test_mutated_tx_verify_fails(home, capsys, tmp_path):
    h, cb = home
    _, built, _ = run(capsys, "tx", "build", "--home", h, "--from", "alice", "--in", f"{cb}:0", "--out", "bob:50")
    tx = built["transaction"]
    z = tx["range_proofs"][0]["pk3"]["z_hex"]
    z[0] = format(int(z[0], 16) ^ 1, "x")
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(tx))
    code, ver, _ = run(capsys, "tx", "verify", "--home", h, str(bad))
    assert code == 1 and ver["valid"] is False
    check("tx verify", ver)
    bad.write_text(json.dumps({"tx_id": "x"}))
    code, ver, _ = run(capsys, "tx", "verify", "--home", h, str(bad))
    assert code == 1 and ver["problem"].startswith("malformed")


def test_operation_failures_exit_1(home, capsys):
    h, cb = home
    code, out, err = run(capsys, "tx", "build", "--home", h, "--from", "alice", "--in", f"{cb}:0", "--out", "bob:51")
    assert code == 1 and out is None and "sum" in err
    code, _, err = run(capsys, "mint", "--home", h, "--address", "alice")
    assert code == 1 and "already registered" in err
    code, _, err = run(capsys, "wallet", "balance", "--home", h, "--address", "nobody")
    assert code == 1
    code, _, err = run(capsys, "chain", "audit", "--home", h + "-missing")
    assert code == 1


def test_audit_detects_tamper(home, capsys):
    h, _ = home
    from pathlib import Path

    f = Path(h) / "chain" / "block_00000001.json"
    doc = json.loads(f.read_text())
    doc["proposer"] = doc["proposer"] % 3 + 1
    f.write_text(json.dumps(doc))
    code, aud, _ = run(capsys, "chain", "audit", "--home", h)
    assert code == 1 and aud["valid"] is False


def test_flow_run(capsys, tmp_path):
    out = tmp_path / "r.json"
    code, doc, _ = run(capsys, "flow", "run", "--params", "test", "--seed", "7", "--out", str(out))
    assert code == 0 and doc["ok"] and len(doc["lines"]) == 14
    check("flow run", doc)
    assert json.loads(out.read_text()) == doc
    code, doc, err = run(capsys, "flow", "run", "--seed", "7", "--fault", "zero_output")
    assert code == 1 and doc["halted_at"] == "RVer" and "RVer" in err
    check("flow run", doc)


def test_flow_config_file(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("MAB_SEED", "9")
    cfg = tmp_path / "flow.json"
    cfg.write_text(json.dumps({"parties": 2, "outputs": [["bob", 5], ["alice", 45]]}))
    code, doc, _ = run(capsys, "flow", "run", "--config", str(cfg))
    assert code == 0 and doc["config"]["seed"] == "9" and doc["lines"][-1]["detail"]["amounts"] == [5, 45]
    cfg.write_text(json.dumps({"nonsense": 1}))
    code, _, _ = run(capsys, "flow", "run", "--config", str(cfg))
    assert code == 1


@pytest.mark.parametrize("scope", ["encryption", "decryption", "empty"])
def test_measure(capsys, scope):
    code, doc, _ = run(capsys, "measure", "--scope", scope, "--i", "1")
    assert code == 0
    check("measure", doc)


def test_cokeygen(capsys, tmp_path):
    code, doc, _ = run(capsys, "cokeygen", "--parties", "2", "--seed", "1", "--out", str(tmp_path))
    assert code == 0 and doc["biprime_verified"]
    check("cokeygen", doc)
    assert len(doc["share_files"]) == 2
    share = json.loads((tmp_path / "party_02.json").read_text())
    assert share["party_index"] == 2 and json.loads((tmp_path / "modulus.json").read_text())["n_hex"] == doc["n_hex"]


def test_usage_errors_exit_2(capsys):
    for argv in (["nosuch"], [], ["tx"], ["tx", "build", "--in", "nocolon", "--from", "a", "--out", "b:1"]):
        with pytest.raises(SystemExit) as exc:
            cli.main(argv)
        assert exc.value.code == 2
    capsys.readouterr()


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "mab.cli", "nosuch"], capture_output=True, text=True)
    assert proc.returncode == 2 and proc.stdout == ""
    proc = subprocess.run(
        [sys.executable, "-m", "mab.cli", "measure", "--scope", "empty"], capture_output=True, text=True
    )
    assert proc.returncode == 0 and json.loads(proc.stdout)["scope"] == "empty"
