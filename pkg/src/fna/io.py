"""Config files, CSV envelopes and atomic output.

Config files are flat ``key = value`` text (``#`` starts a comment); a
``.json`` file holding one flat object is accepted as well. Every CSV begins
with ``#`` header lines carrying the library version and the config hash;
wall-clock fields live only there, so bodies are reproducible byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from . import __version__


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


def parse_value(text: str):
    """int, float, bool, None, comma-separated list, or the raw string."""
    s = text.strip()
    if "," in s:
        return [parse_value(part) for part in s.split(",") if part.strip()]
    low = s.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null", ""):
        return None
    for cast in (int, float):
        try:
            return cast(s)
        except ValueError:
            pass
    return s


def parse_assignment(line: str):
    if "=" not in line:
        raise ConfigError(f"expected key=value, got {line!r}")
    key, value = line.split("=", 1)
    key = key.strip()
    if not key or not key.replace("_", "").isalnum():
        raise ConfigError(f"invalid config key {key!r}")
    return key, parse_value(value)


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if path.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(data, dict) or any(isinstance(v, dict) for v in data.values()):
            raise ConfigError(f"{path}: expected one flat JSON object")
        return data
    cfg = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            key, value = parse_assignment(line)
        except ConfigError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
        if key in cfg:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        cfg[key] = value
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        x = float(v)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    s = str(v)
    if any(c in s for c in ",\"\n"):
        raise ValueError(f"CSV cell {s!r} needs quoting, which the format does not use")
    return s


def csv_body(columns, rows) -> str:
    lines = [",".join(columns)]
    for r in rows:
        lines.append(",".join(format_cell(r[c]) for c in columns))
    return "\n".join(lines) + "\n"


def envelope_header(meta: dict) -> str:
    return "".join(f"# {k}={meta[k]}\n" for k in meta)


def atomic_write(path, text: str):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, columns, rows, meta: dict):
    """Header lines plus the CSV body; returns the body text."""
    body = csv_body(columns, rows)
    atomic_write(path, envelope_header(meta) + body)
    return body


def read_csv(path):
    """(meta, columns, rows) with every cell kept as text."""
    meta, lines = {}, []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("# "):
            k, v = line[2:].split("=", 1)
            meta[k] = v
        else:
            lines.append(line)
    columns = lines[0].split(",")
    rows = [dict(zip(columns, ln.split(","))) for ln in lines[1:]]
    return meta, columns, rows


def split_body(path) -> str:
    """File text without the ``#`` envelope lines."""
    text = Path(path).read_text(encoding="utf-8")
    return "".join(ln for ln in text.splitlines(keepends=True) if not ln.startswith("# "))


def write_json(path, data: dict):
    atomic_write(path, json.dumps(data, sort_keys=True, indent=2) + "\n")


def envelope_meta(cfg_hash: str, **extra) -> dict:
    meta = {"library": f"fna {__version__}", "config_hash": cfg_hash}
    meta.update(extra)
    return meta
