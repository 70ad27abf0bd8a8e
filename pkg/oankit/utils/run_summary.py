"""The run-summary JSON every command writes next to its outputs."""

import hashlib
import json
from pathlib import Path
from typing import Any
from typing import Dict
from typing import Optional
from typing import Union

FLOAT_DIGITS = 6


def round_floats(value: Any, digits: int = FLOAT_DIGITS) -> Any:
    """Recursively round floats; tuples become lists.

    Examples:
        >>> round_floats({"a": [0.1234567, 2], "b": (1 / 3,)})
        {'a': [0.123457, 2], 'b': [0.333333]}
    """
    if isinstance(value, float):
        return round(value, digits)
    if isinstance(value, dict):
        return {k: round_floats(v, digits) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_floats(v, digits) for v in value]
    return value


def config_hash(config_dict: Dict[str, Any]) -> str:
    """sha256 of the canonical JSON form of a config mapping."""
    canonical = json.dumps(
        round_floats(config_dict), sort_keys=True, separators=(",", ":")
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def git_blob_sha1(path: Union[Path, str]) -> str:
    """Content hash of a file as ``git hash-object`` computes it.

    Examples:
        >>> import tempfile, os
        >>> with tempfile.NamedTemporaryFile(delete=False) as f:
        ...     _ = f.write(b"hello\\n")
        >>> git_blob_sha1(f.name)
        'ce013625030ba8dba906f756967f9e9ca394464a'
    """
    data = Path(path).read_bytes()
    header = f"blob {len(data)}\0".encode("ascii")
    return hashlib.sha1(header + data).hexdigest()


def dump_json(path: Union[Path, str], obj: Any):
    """Deterministic JSON: fixed key order as given, floats rounded."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        json.dump(round_floats(obj), f, indent=2)
        f.write("\n")


def write_summary(
    path: Union[Path, str],
    command: str,
    config_dict: Dict[str, Any],
    seed: int,
    results: Dict[str, Any],
    checkpoint: Optional[Union[Path, str]] = None,
) -> Dict[str, Any]:
    summary = dict(
        command=command,
        config_hash=config_hash(config_dict),
        seed=seed,
        checkpoint_sha1=None if checkpoint is None else git_blob_sha1(checkpoint),
        results=results,
    )
    dump_json(path, summary)
    return summary
