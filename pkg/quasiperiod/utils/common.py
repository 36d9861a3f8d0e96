import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Iterable, TypeVar

from quasiperiod.consts import max_threads
from quasiperiod.errors import InputFileError, ParseError

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(func: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """Map over items with up to QP_THREADS workers, returning results in input order."""
    items = list(items)
    workers = min(max_threads(), len(items))
    if workers <= 1:
        return [func(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def load_json(path: str | Path) -> Any:
    """Read a JSON document, turning I/O and syntax problems into input errors."""
    path = Path(path)
    if not path.is_file():
        raise InputFileError(f"Input file not found: {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputFileError(f"Could not read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"Malformed JSON in {path}: {exc.msg}", line=exc.lineno) from exc


def dump_json(payload: Any, path: str | Path | None = None) -> str:
    """Serialize deterministically; write to path when given."""
    text = json.dumps(payload, sort_keys=True, indent=2)
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text + "\n", encoding="utf-8")
    return text


def require(doc: Any, key: str, path: str = "") -> Any:
    """Fetch doc[key], reporting the JSON field path when it is missing."""
    field_path = f"{path}.{key}" if path else key
    if not isinstance(doc, dict):
        raise ParseError("Expected an object", field_path=path or "<root>")
    if key not in doc:
        raise ParseError(f"Missing field '{key}'", field_path=field_path)
    return doc[key]


def require_number(doc: Any, key: str, path: str = "") -> float:
    """Fetch a numeric field."""
    value = require(doc, key, path)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"Field '{key}' must be a number", field_path=f"{path}.{key}" if path else key)
    return float(value)


def require_list(doc: Any, key: str, path: str = "") -> list:
    """Fetch a list field."""
    value = require(doc, key, path)
    if not isinstance(value, list):
        raise ParseError(f"Field '{key}' must be a list", field_path=f"{path}.{key}" if path else key)
    return value


def complex_to_dict(z: complex) -> dict:
    return {"re": float(z.real), "im": float(z.imag)}


def complex_from_dict(doc: Any, path: str = "") -> complex:
    return complex(require_number(doc, "re", path), require_number(doc, "im", path))


def max_consecutive_gap(values: Iterable[float]) -> float:
    """Largest spacing between consecutive sorted values (inf for fewer than two)."""
    ordered = sorted(values)
    if len(ordered) < 2:
        return float("inf")
    return max(b - a for a, b in zip(ordered, ordered[1:]))
