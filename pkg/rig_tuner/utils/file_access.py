import hashlib
import json
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError


def read_json(path: str | Path) -> Any:
    path = Path(path)
    if not path.is_file():
        _error_msg = "File does not exist"
        raise ConfigError(_error_msg, path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        _error_msg = f"Invalid JSON ({e})"
        raise ConfigError(_error_msg, path) from e


def write_json(path: str | Path, content: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(content, indent=2, sort_keys=False) + "\n", encoding="utf-8")
    return path


def array_fingerprint(values: np.ndarray) -> str:
    """
    Content hash of a float vector, stable across platforms.
    """
    data = np.ascontiguousarray(values, dtype="<f8").tobytes()
    return "sha256:" + hashlib.sha256(data).hexdigest()


def csv_cell(value: Any) -> str:
    """Floats keep full precision (repr) so that CSV dumps are byte-stable."""
    if isinstance(value, float | np.floating):
        return repr(float(value))
    return str(value)


def reject_unknown_fields(cls, content: dict) -> None:
    unknown = set(content) - set(cls.__dataclass_fields__)
    if unknown:
        _error_msg = f"Unknown {cls.__name__} fields {sorted(unknown)}"
        raise ConfigError(_error_msg)
