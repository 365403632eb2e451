"""Byte-stable CSV/JSON emission and fringe CSV ingestion.

Floats are written with ``repr`` (shortest string that parses back to the
same double).  Every artifact starts with a provenance comment naming the
tool version, the config digest and the seed.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .config import URAD
from .model import CountModel, FringeCurve


class CurveFormatError(ValueError):
    pass


def provenance(digest: str, seed: int | None) -> str:
    return f"hypertilt {__version__} config_sha256={digest} seed={'none' if seed is None else seed}"


def fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "nan"
    return repr(value)


def atomic_write(path: str | Path, data: str | bytes) -> None:
    """Write through a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: list[str], rows, comment: str) -> str:
    buf = io.StringIO()
    buf.write(f"# {comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if not math.isfinite(obj) else float(obj)
    return obj


def json_text(payload: dict, comment: str) -> str:
    body = {"meta": comment, **_clean(payload)}
    return json.dumps(body, indent=2) + "\n"


def curve_rows(curve: FringeCurve):
    """CSV header and rows for a fringe curve (theta in urad)."""
    theta_urad = curve.theta / URAD
    if curve.has_counts:
        return ["theta_urad", "successes", "trials"], zip(theta_urad, curve.successes, curve.trials)
    return ["theta_urad", "probability"], zip(theta_urad, curve.probability)


def read_fringe_csv(path: str | Path) -> FringeCurve:
    """Parse ``theta_urad,probability`` or ``theta_urad,successes,trials`` (``#`` lines skipped)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise CurveFormatError(f"cannot read {path}: {exc.strerror}") from None
    header = None
    cols: dict[str, list] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cells = [c.strip() for c in next(csv.reader([line]))]
        if header is None:
            header = cells
            if "theta_urad" not in header:
                raise CurveFormatError(f"{path}:{lineno}: header must contain theta_urad")
            if "probability" not in header and not {"successes", "trials"} <= set(header):
                raise CurveFormatError(f"{path}:{lineno}: need a probability column or successes and trials")
            cols = {name: [] for name in header}
            continue
        if len(cells) != len(header):
            raise CurveFormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(cells)}")
        for name, cell in zip(header, cells):
            try:
                value = float(cell)
            except ValueError:
                raise CurveFormatError(f"{path}:{lineno}: column {name}: not a number: {cell!r}") from None
            if not math.isfinite(value):
                raise CurveFormatError(f"{path}:{lineno}: column {name}: non-finite value")
            if name in ("successes", "trials") and value != int(value):
                raise CurveFormatError(f"{path}:{lineno}: column {name}: not an integer: {cell!r}")
            cols[name].append(value)
    if header is None or not cols["theta_urad"]:
        raise CurveFormatError(f"{path}: no data rows")
    theta = np.array(cols["theta_urad"]) * URAD
    try:
        if "successes" in cols and "trials" in cols:
            return FringeCurve(theta=theta, successes=np.array(cols["successes"]), trials=np.array(cols["trials"]),
                               count_model=CountModel.BINOMIAL)
        return FringeCurve(theta=theta, probability=np.array(cols["probability"]))
    except ValueError as exc:
        raise CurveFormatError(f"{path}: {exc}") from None
