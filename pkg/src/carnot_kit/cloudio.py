"""Point-cloud serialisation (CSV and JSON) and control-string parsing."""
from __future__ import annotations

import csv
import io
import json
from fractions import Fraction
from pathlib import Path

import numpy as np

from .algebra import GradedAlgebra
from .control import HorizontalControl, SemigroupCloud
from .errors import UsageError


def _g17(v: float) -> str:
    return format(float(v), ".17g")


def _control_spec(durations, directions) -> list:
    return [[float(d), [float(c) for c in u]] for d, u in zip(durations, directions) if d > 0]


def cloud_to_json(cloud: SemigroupCloud) -> str:
    doc = {
        "algebra": cloud.algebra.name,
        "basis": list(cloud.algebra.basis),
        "nu": [float(c) for c in cloud.nu],
        "seed": cloud.seed,
        "params": cloud.params,
        "points": [[float(c) for c in p] for p in cloud.points],
        "generated_by": [_control_spec(d, u) for d, u in zip(cloud.durations, cloud.directions)],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def cloud_to_csv(cloud: SemigroupCloud) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cloud.algebra.basis)
    for p in cloud.points:
        w.writerow([_g17(c) for c in p])
    return buf.getvalue()


def export_cloud(cloud: SemigroupCloud, path, fmt: str = "csv") -> Path:
    """Write ``cloud`` to ``path``; output depends only on the cloud's contents."""
    if fmt not in ("csv", "json"):
        raise UsageError(f"unknown cloud format {fmt!r}; expected csv or json")
    text = cloud_to_csv(cloud) if fmt == "csv" else cloud_to_json(cloud)
    path = Path(path)
    path.write_bytes(text.encode("utf-8"))
    return path


def load_points(path, alg: GradedAlgebra | None = None) -> np.ndarray:
    """Read points written by ``export_cloud`` (or a bare JSON array / headerless CSV).

    Integer and ``p/q`` entries are kept as exact ``Fraction`` values so that
    rational point sets stay exact; the result then has dtype ``object``.
    """
    text = Path(path).read_text()
    if Path(path).suffix.lower() == ".json" or text.lstrip().startswith(("{", "[")):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
        rows = doc["points"] if isinstance(doc, dict) else doc
        labels = doc.get("basis") if isinstance(doc, dict) else None
    else:
        rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
        labels = None
        if rows and not _numeric(rows[0][0]):
            labels, rows = rows[0], rows[1:]
    if alg is not None and labels is not None and list(labels) != list(alg.basis):
        raise UsageError(f"{path}: columns {labels} do not match the basis {list(alg.basis)}")
    vals = [[_scalar(c) for c in r] for r in rows]
    width = alg.n if alg is not None else (len(vals[0]) if vals else 0)
    if any(len(r) != width for r in vals):
        raise UsageError(f"{path}: every point needs {width} coordinates")
    exact = bool(vals) and all(isinstance(c, Fraction) for r in vals for c in r)
    if exact:
        return np.array(vals, dtype=object).reshape(len(vals), width)
    return np.array([[float(c) for c in r] for r in vals], dtype=float).reshape(len(vals), width)


def _numeric(s: str) -> bool:
    try:
        _scalar(s)
        return True
    except UsageError:
        return False


def _scalar(c):
    if isinstance(c, bool):
        raise UsageError(f"bad coordinate {c!r}")
    if isinstance(c, int):
        return Fraction(c)
    if isinstance(c, float):
        return c
    s = str(c).strip()
    try:
        return Fraction(s) if "/" in s or s.lstrip("+-").isdigit() else float(s)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"bad coordinate {c!r}") from None


def parse_scalar(text: str):
    """``"3"``, ``"-1/2"`` -> Fraction; ``"0.25"`` -> float."""
    return _scalar(text)


def parse_vector(text: str, length: int | None = None) -> list:
    parts = [p for p in text.replace(" ", "").split(",") if p != ""]
    vec = [_scalar(p) for p in parts]
    if length is not None and len(vec) != length:
        raise UsageError(f"expected {length} comma-separated values, got {len(vec)}")
    return vec


def parse_control(alg: GradedAlgebra, text: str) -> HorizontalControl:
    """``"d:v1,v2;d:v1,v2"`` -> piecewise-constant control (durations first)."""
    pieces = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        if ":" not in chunk:
            raise UsageError(f"control piece {chunk!r} must look like duration:v1,...,vm")
        d, v = chunk.split(":", 1)
        pieces.append((_scalar(d), alg.horizontal(parse_vector(v, alg.rank))))
    if not pieces:
        raise UsageError("control has no pieces")
    return HorizontalControl(alg, tuple(pieces))
