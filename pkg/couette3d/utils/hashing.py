import hashlib
import json
from typing import Any


def canonical_json(payload: Any) -> str:
    """Key-sorted, whitespace-free JSON; floats keep their repr."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)


def parameter_hash(payload: Any) -> str:
    """SHA-256 hex digest of the canonical JSON of ``payload``."""
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()
