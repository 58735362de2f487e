"""Point-cloud files and the truth sidecar.

Point files hold one point per row, either whitespace-delimited (``.xyz``,
``.txt``, ``.pts``) or comma-separated (``.csv``). Values are written with 17
significant digits so a save/load round trip is exact.

The truth sidecar is a JSON object::

    {
      "schema": "partialreg.truth/1",
      "source": "source.xyz",            # paths relative to the sidecar
      "target": "target.xyz",
      "dim": 2,
      "zeta": 91,                        # number of clean target points
      "source_noise": [false, ...],      # per-point outlier labels
      "target_noise": [false, ..., true],
      "truth_map": [0, 1, ..., -1],      # source index -> target index, -1 if none
      "deformation": {...} | null        # DeformationModel.to_dict() of f*
    }
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..core import ContractError, DeformationModel, PointCloud

TRUTH_SCHEMA = "partialreg.truth/1"


class CloudFormatError(ContractError):
    """Malformed point file; the message names the offending line."""


def _infer_format(path, fmt):
    if fmt is not None:
        if fmt not in ("xyz", "csv"):
            raise ContractError(f"unknown point format {fmt!r}")
        return fmt
    return "csv" if Path(path).suffix.lower() == ".csv" else "xyz"


def load_cloud(path, fmt: str | None = None, header: bool = False) -> PointCloud:
    """Read a point file.

    ``header`` skips the first non-blank line. Blank lines and lines starting
    with ``#`` are ignored.
    """
    fmt = _infer_format(path, fmt)
    rows = []
    width = None
    skipped_header = not header
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            if not skipped_header:
                skipped_header = True
                continue
            fields = [f.strip() for f in text.split(",")] if fmt == "csv" else text.split()
            try:
                values = [float(f) for f in fields]
            except ValueError:
                raise CloudFormatError(f"{path}: line {lineno}: non-numeric value in {text!r}") from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise CloudFormatError(f"{path}: line {lineno}: expected {width} columns, "
                                       f"found {len(values)}")
            if not np.all(np.isfinite(values)):
                raise CloudFormatError(f"{path}: line {lineno}: non-finite value")
            rows.append(values)
    if not rows:
        raise CloudFormatError(f"{path}: no points found")
    return PointCloud(np.array(rows, dtype=np.float64))


def save_cloud(cloud, path, fmt: str | None = None, header: bool = False) -> None:
    """Write a point file with 17 significant digits per coordinate."""
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    fmt = _infer_format(path, fmt)
    sep = "," if fmt == "csv" else " "
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(sep.join("xyzw"[d] if d < 4 else f"c{d}" for d in range(pts.shape[1])) + "\n")
        for row in pts:
            fh.write(sep.join(f"{v:.17g}" for v in row) + "\n")


def write_truth(path, source: PointCloud, target: PointCloud, source_file: str,
                target_file: str, deformation: DeformationModel | None = None) -> dict:
    doc = {
        "schema": TRUTH_SCHEMA,
        "source": source_file,
        "target": target_file,
        "dim": source.dim,
        "zeta": int(target.clean_mask.sum()),
        "source_noise": (~source.clean_mask).tolist(),
        "target_noise": (~target.clean_mask).tolist(),
        "truth_map": (source.truth_map if source.truth_map is not None
                      else -np.ones(source.n, np.int64)).tolist(),
        "deformation": None if deformation is None else deformation.to_dict(),
    }
    Path(path).write_text(json.dumps(doc, indent=1), encoding="utf-8")
    return doc


def read_truth(path) -> tuple[PointCloud, PointCloud, dict]:
    """Load a sidecar and the clouds it names, with labels and truth map attached."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ContractError(f"{path}: invalid JSON ({exc})") from None
    if doc.get("schema") != TRUTH_SCHEMA:
        raise ContractError(f"{path}: expected schema {TRUTH_SCHEMA!r}")
    base = path.parent
    src = load_cloud(base / doc["source"])
    tgt = load_cloud(base / doc["target"])
    source = PointCloud(src.points, noise=np.array(doc["source_noise"], bool),
                        truth_map=np.array(doc["truth_map"], np.int64))
    target = PointCloud(tgt.points, noise=np.array(doc["target_noise"], bool))
    source.check_truth_against(target.n)
    return source, target, doc
