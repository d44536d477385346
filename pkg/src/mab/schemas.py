"""JSON Schemas (draft 2020-12) for every CLI document written to stdout."""
from __future__ import annotations

HEX = {"type": "string", "pattern": "^(-)?[0-9a-f]+$"}
DIGEST = {"type": "string", "pattern": "^[0-9a-f]{64}$"}
COUNTS = {
    "type": "object",
    "properties": {
        s: {"type": "integer", "minimum": 0}
        for s in ("tau_m", "tau_a", "tau_M", "tau_E", "tau_H", "tau_td", "tau_bp", "tau_Tx", "tau_Bl")
    },
    "required": ["tau_m", "tau_a", "tau_M", "tau_E", "tau_H", "tau_td", "tau_bp", "tau_Tx", "tau_Bl"],
    "additionalProperties": False,
}


def _obj(props: dict, required: list[str] | None = None, extra: bool = False) -> dict:
    return {
        "type": "object",
        "properties": props,
        "required": list(props) if required is None else required,
        "additionalProperties": extra,
    }


COKEYGEN = _obj(
    {
        "n_hex": HEX,
        "n_bits": {"type": "integer", "minimum": 1},
        "party_count": {"type": "integer", "minimum": 2},
        "e_hex": HEX,
        "trial_bound": {"type": "integer", "minimum": 2},
        "biprime_verified": {"const": True},
        "candidates": {"type": "integer", "minimum": 1},
        "restarts": {"type": "integer", "minimum": 0},
        "transcript_hash": DIGEST,
        "share_files": {"type": "array", "items": {"type": "string"}},
    }
)

MINT = _obj(
    {
        "address": {"type": "string", "minLength": 1},
        "key_mode": {"enum": ["consortium", "independent"]},
        "key_id": {"type": "string"},
        "coinbase_tx": {"type": ["string", "null"]},
        "reward": {"type": "integer", "minimum": 0},
        "system_digest": DIGEST,
    }
)

OUTPUT = _obj(
    {
        "address": {"type": "string"},
        "c_hex": HEX,
        "key_id": {"type": "string"},
    }
)

TRANSACTION = _obj(
    {
        "tx_id": DIGEST,
        "inputs": {"type": "array", "items": _obj({"tx_id": DIGEST, "index": {"type": "integer", "minimum": 0}})},
        "payment_outputs": {"type": "array", "items": OUTPUT, "minItems": 1},
        "verification_outputs": {"type": "array", "minItems": 1},
        "input_sum": {"type": "object"},
        "range_proofs": {"type": "array", "minItems": 1},
        "link_proofs": {"type": "array", "minItems": 1},
        "equality_proof": {"type": "object"},
        "reward_flag": {"type": "boolean"},
        "reward_opening": {"type": ["object", "null"]},
    },
    required=["tx_id", "inputs", "payment_outputs", "verification_outputs", "input_sum", "range_proofs", "equality_proof", "reward_flag"],
    extra=True,
)

TX_BUILD = _obj({"transaction": TRANSACTION, "submitted": {"type": "boolean"}, "pool_file": {"type": ["string", "null"]}})

TX_VERIFY = _obj(
    {
        "tx_id": {"type": "string"},
        "valid": {"type": "boolean"},
        "problem": {"type": ["string", "null"]},
    }
)

BLOCK_PROPOSE = _obj(
    {
        "committed": {"type": "boolean"},
        "height": {"type": "integer", "minimum": 0},
        "leader": {"type": "integer", "minimum": 1},
        "view": {"type": "integer", "minimum": 0},
        "block_hash": {"type": ["string", "null"]},
        "tx_ids": {"type": "array", "items": DIGEST},
        "votes": {"type": "object", "additionalProperties": {"type": ["boolean", "null"]}},
        "dropped": {"type": "array", "items": {"type": "string"}},
    }
)

CHAIN_AUDIT = _obj({"valid": {"type": "boolean"}, "height": {"type": ["integer", "null"]}, "tip_hash": {"type": ["string", "null"]}})

WALLET_BALANCE = _obj(
    {
        "address": {"type": "string"},
        "balance": {"type": "integer", "minimum": 0},
        "unspent": {
            "type": "array",
            "items": _obj({"tx_id": DIGEST, "index": {"type": "integer", "minimum": 0}, "amount": {"type": "integer", "minimum": 1}}),
        },
    }
)

FLOW_LINE = _obj(
    {
        "line": {"type": "integer", "minimum": 1, "maximum": 14},
        "name": {"type": "string"},
        "status": {"enum": ["ok", "failed", "skipped"]},
        "verdict": {"enum": [0, 1]},
        "detail": {"type": "object"},
        "ops": COUNTS,
    },
    required=["line", "name", "status", "verdict"],
)

FLOW_RUN = _obj(
    {
        "config": {"type": "object"},
        "ok": {"type": "boolean"},
        "halted_at": {"type": ["string", "null"]},
        "lines": {"type": "array", "items": FLOW_LINE, "minItems": 14, "maxItems": 14},
    }
)

MEASURE = _obj(
    {
        "scope": {"enum": ["keygen", "encryption", "verification", "decryption", "blockchain", "empty"]},
        "profile": {"type": "string"},
        "i": {"type": "integer", "minimum": 1},
        "k": {"type": "integer", "minimum": 2},
        "measured": COUNTS,
        "reference": COUNTS,
        "reference_formula": {"type": "string"},
        "informational": {"const": True},
    }
)

SCHEMAS = {
    "cokeygen": COKEYGEN,
    "mint": MINT,
    "tx build": TX_BUILD,
    "tx verify": TX_VERIFY,
    "block propose": BLOCK_PROPOSE,
    "chain audit": CHAIN_AUDIT,
    "wallet balance": WALLET_BALANCE,
    "flow run": FLOW_RUN,
    "measure": MEASURE,
}
