"""Result tables and their on-disk form (CSV + JSON manifest)."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import RefusedOverwrite, ValidationError

MANIFEST = "index.json"


@dataclass
class ResultTable:
    name: str
    columns: list  # [(name, unit), ...]
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValidationError(self.name, f"row has {len(values)} values, schema has {len(self.columns)}")
        self.rows.append(tuple(values))

    def column(self, name: str) -> list:
        i = [c[0] for c in self.columns].index(name)
        return [r[i] for r in self.rows]


def format_value(value) -> str:
    """Shortest round-trip text for numbers; bools as 0/1; None as empty."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float) or hasattr(value, "dtype"):
        if hasattr(value, "dtype") and value.dtype.kind in "iub":
            return str(int(value))
        x = float(value)
        if math.isnan(x):
            return "nan"
        return repr(x)
    text = str(value)
    if any(ch in text for ch in ',"\n'):
        return '"' + text.replace('"', '""') + '"'
    return text


def render_csv(table: ResultTable, config_echo: dict, version: str) -> str:
    meta = {
        "table": table.name,
        "columns": [{"name": n, "unit": u} for n, u in table.columns],
        "config": config_echo,
        "version": version,
    }
    meta.update(table.metadata)
    lines = ["# " + json.dumps(meta, sort_keys=True, separators=(",", ":"), allow_nan=True)]
    lines.append(",".join(n for n, _ in table.columns))
    for row in table.rows:
        lines.append(",".join(format_value(v) for v in row))
    return "\n".join(lines) + "\n"


def write_outputs(tables, config_echo: dict, out_dir, version: str, force: bool = False) -> list[Path]:
    """Write one CSV per table plus ``index.json`` with sha256 digests.

    Refuses to touch an existing file unless ``force``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = [f"{t.name}.csv" for t in tables]
    if len(set(names)) != len(names):
        raise ValidationError("tables", "duplicate table names")
    if not force:
        clash = [n for n in names + [MANIFEST] if (out / n).exists()]
        if clash:
            raise RefusedOverwrite(f"{out}: would overwrite {', '.join(clash)} (use --force)")
    entries = []
    written = []
    for table, name in zip(tables, names):
        data = render_csv(table, config_echo, version).encode("utf-8")
        path = out / name
        path.write_bytes(data)
        written.append(path)
        entries.append({"file": name, "rows": len(table.rows), "sha256": hashlib.sha256(data).hexdigest()})
    manifest = {"files": entries, "task": config_echo.get("task"), "version": version}
    path = out / MANIFEST
    path.write_bytes((json.dumps(manifest, sort_keys=True, indent=2) + "\n").encode("utf-8"))
    written.append(path)
    return written


def read_csv(path) -> tuple[dict, list[str], list[list[str]]]:
    """Inverse of ``render_csv`` for simple cells: (metadata, header, rows as strings)."""
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    meta = json.loads(lines[0][2:])
    header = lines[1].split(",")
    rows = [line.split(",") for line in lines[2:] if line]
    return meta, header, rows
