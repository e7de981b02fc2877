"""Report records and their JSON / CSV serialization."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np


@dataclass
class BoundCheck:
    """One inequality evaluated against a measured quantity.

    ``holds`` is False only for a genuine violation; a side that cannot be
    evaluated is left as None and explained in ``note``.
    """

    quantity: str
    measured: float | None
    lower_bound: float | None = None
    upper_bound: float | None = None
    holds: bool = True
    note: str = ""
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "quantity": self.quantity,
            "measured": self.measured,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "holds": bool(self.holds),
        }
        if self.note:
            out["note"] = self.note
        if self.details:
            out["details"] = self.details
        return to_jsonable(out)


@dataclass
class TimeEstimate:
    """A horizon-limited time measurement.

    ``value`` is None when the defining condition was not met by ``horizon``.
    ``witness`` names the binding ``(t, X, start)`` triple where known.
    """

    value: int | None
    horizon: int
    witness: dict = field(default_factory=dict)

    @property
    def exceeded(self) -> bool:
        return self.value is None

    def __int__(self):
        if self.value is None:
            raise ValueError(f"time exceeds horizon {self.horizon}")
        return self.value

    def to_dict(self) -> dict:
        return to_jsonable({
            "value": self.value,
            "exceeds_horizon": self.exceeded,
            "horizon": self.horizon,
            "witness": self.witness,
        })


def to_jsonable(obj: Any) -> Any:
    """Recursively convert numpy scalars/arrays and tuples to JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return None
        return x
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def write_json(path, obj: Any) -> None:
    _atomic_write(Path(path), dumps(obj))


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    _atomic_write(Path(path), csv_text(header, rows))


def state_to_json(amp: np.ndarray) -> list[list[float]]:
    """Amplitudes as ``[re, im]`` pairs in ``a * n + v`` index order."""
    amp = np.asarray(amp, dtype=complex).ravel()
    return [[float(z.real), float(z.imag)] for z in amp]


def state_from_json(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("state snapshot must be a list of [re, im] pairs")
    return arr[:, 0] + 1j * arr[:, 1]


def schema_path(name: str) -> Path:
    return Path(__file__).with_name("schemas") / f"{name}.schema.json"


def load_schema(name: str) -> dict:
    return json.loads(schema_path(name).read_text())
