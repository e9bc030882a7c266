"""Point-cloud, surface and hull files.

Tables are CSV with LF line endings and floats written with ``repr`` so
they round-trip exactly. A block of ``#`` lines at the top holds the
manifest as JSON; its ``content_hash`` is the sha256 of everything below
the comment block.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__

SOURCES = ("random", "oracle", "sweep")


class DatasetParseError(ValueError):
    pass


class IntegrityError(ValueError):
    pass


class SchemaError(ValueError):
    pass


@dataclass
class DatasetManifest:
    model_tag: str
    axes: list
    params: dict = field(default_factory=dict)
    kind: str = "cloud"
    tool_version: str = __version__
    created: str | None = None
    content_hash: str = ""

    @staticmethod
    def timestamp(explicit: str | None = None) -> str | None:
        """Creation time only when asked for, so files stay reproducible."""
        if explicit:
            return explicit
        epoch = os.environ.get("SOURCE_DATE_EPOCH")
        if epoch:
            return datetime.fromtimestamp(int(epoch), tz=timezone.utc).isoformat()
        return None


@dataclass
class Table:
    columns: list
    data: np.ndarray
    sources: list | None
    manifest: DatasetManifest

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise SchemaError(f"missing column {name!r} (have {self.columns})")
        return self.data[:, self.columns.index(name)]


def _fmt(x: float) -> str:
    return repr(float(x))


def _body(columns, data, sources) -> str:
    head = list(columns) + (["source"] if sources is not None else [])
    lines = [",".join(head)]
    for i, row in enumerate(data):
        cells = [_fmt(v) for v in row]
        if sources is not None:
            cells.append(sources[i])
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_table(path, columns, data, manifest: DatasetManifest, sources=None) -> str:
    data = np.asarray(data, dtype=float).reshape(-1, len(columns))
    if not np.all(np.isfinite(data)):
        raise ValueError("refusing to write non-finite values")
    if sources is not None:
        if isinstance(sources, str):
            sources = [sources] * len(data)
        sources = list(sources)
        if len(sources) != len(data):
            raise ValueError("one source label per row")
        bad = set(sources) - set(SOURCES)
        if bad:
            raise ValueError(f"unknown source labels {sorted(bad)}")
    body = _body(columns, data, sources)
    manifest.content_hash = hashlib.sha256(body.encode()).hexdigest()
    meta = json.dumps(asdict(manifest), sort_keys=True, indent=1)
    header = "".join(f"# {line}\n" for line in meta.splitlines())
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(header + body)
    return manifest.content_hash


def read_table(path, verify: bool = True) -> Table:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    meta_lines = []
    k = 0
    while k < len(lines) and lines[k].startswith("#"):
        meta_lines.append(lines[k][2:] if lines[k].startswith("# ") else lines[k][1:])
        k += 1
    if not meta_lines:
        raise DatasetParseError("line 1: missing manifest header")
    try:
        manifest = DatasetManifest(**json.loads("\n".join(meta_lines)))
    except (json.JSONDecodeError, TypeError) as exc:
        raise DatasetParseError(f"line 1: bad manifest ({exc})") from None
    body = "\n".join(lines[k:])
    if verify and hashlib.sha256(body.encode()).hexdigest() != manifest.content_hash:
        raise IntegrityError(f"{path}: content hash does not match manifest")
    if k >= len(lines) or not lines[k]:
        raise DatasetParseError(f"line {k + 1}: missing column header")
    head = lines[k].split(",")
    has_source = head[-1] == "source"
    columns = head[:-1] if has_source else head
    rows, sources = [], []
    for n, line in enumerate(lines[k + 1:], start=k + 2):
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != len(head):
            raise DatasetParseError(f"line {n}: expected {len(head)} fields, got {len(cells)}")
        try:
            rows.append([float(c) for c in cells[:len(columns)]])
        except ValueError as exc:
            raise DatasetParseError(f"line {n}: {exc}") from None
        if has_source:
            if cells[-1] not in SOURCES:
                raise DatasetParseError(f"line {n}: unknown source {cells[-1]!r}")
            sources.append(cells[-1])
    data = np.array(rows, dtype=float).reshape(-1, len(columns))
    return Table(columns, data, sources if has_source else None, manifest)


def write_cloud(points, manifest: DatasetManifest, path, sources="random") -> str:
    """Cloud rows ``a, b, c`` plus an optional ``y`` column and a source label."""
    if not isinstance(points, np.ndarray):
        points = [[p.a, p.b, p.c] if hasattr(p, "a") else p for p in points]
    arr = np.asarray(points, dtype=float)
    arr = arr.reshape(-1, arr.shape[-1] if arr.ndim == 2 else 3)
    if arr.shape[1] not in (3, 4):
        raise ValueError("cloud rows have three coordinates and an optional y")
    columns = ["a", "b", "c"] + (["y"] if arr.shape[1] == 4 else [])
    manifest.kind = "cloud"
    return write_table(path, columns, arr, manifest, sources)


def read_cloud(path, verify: bool = True) -> Table:
    table = read_table(path, verify)
    if table.columns not in (["a", "b", "c"], ["a", "b", "c", "y"]) or table.sources is None:
        raise SchemaError(f"{path}: cloud columns must be a,b,c[,y],source; got {table.columns}")
    return table


def write_hull(hull, path, manifest: DatasetManifest | None = None) -> None:
    doc = {
        "degenerate": bool(hull.degenerate),
        "dim": int(hull.dim),
        "vertices": hull.vertices.tolist(),
        "facets": hull.facets.tolist(),
        "edges": hull.edges.tolist(),
        "equations": hull.equations.tolist(),
    }
    if manifest is not None:
        manifest.kind = "hull"
        doc["manifest"] = asdict(manifest)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def read_hull(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    for key in ("vertices", "facets", "edges", "equations"):
        doc[key] = np.asarray(doc[key], dtype=float if key in ("vertices", "equations") else int)
    return doc
