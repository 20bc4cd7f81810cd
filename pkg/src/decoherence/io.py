"""Self-describing CSV output with a ``#`` metadata header."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .config import RunConfig, make_config
from .errors import ValidationError

HEADER_PREFIX = "# "
FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True)
class SeriesOutput:
    """A labelled numeric table plus the config that produced it."""

    config: RunConfig
    columns: tuple[str, ...]
    data: np.ndarray
    summary: dict[str, Any] = field(default_factory=dict)
    wall_time: float = 0.0

    def __post_init__(self) -> None:
        data = np.atleast_2d(np.asarray(self.data, dtype=float))
        if data.size == 0:
            data = data.reshape(0, len(self.columns))
        if data.shape[1] != len(self.columns):
            raise ValueError(f"{data.shape[1]} data columns for {len(self.columns)} labels")
        object.__setattr__(self, "data", data)

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    @classmethod
    def from_columns(cls, config: RunConfig, cols: Mapping[str, Any], **kw) -> "SeriesOutput":
        names = tuple(cols)
        data = np.column_stack([np.asarray(cols[k], dtype=float) for k in names]) if names else np.zeros((0, 0))
        return cls(config, names, data, **kw)


def _version() -> str:
    from . import __version__

    return __version__


def _json_default(obj: Any) -> Any:
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serialisable: {type(obj).__name__}")


def render_csv(out: SeriesOutput) -> str:
    """CSV text; identical inputs give identical bytes (no timestamps)."""
    lines = [
        f"{HEADER_PREFIX}decoherence {_version()}",
        f"{HEADER_PREFIX}config: {out.config.to_json()}",
        f"{HEADER_PREFIX}summary: {json.dumps(out.summary, sort_keys=True, separators=(',', ':'), default=_json_default)}",
        ",".join(out.columns),
    ]
    body = "\n".join(",".join(FLOAT_FORMAT % v for v in row) for row in out.data)
    return "\n".join(lines) + "\n" + (body + "\n" if body else "")


def atomic_write(path: str | Path, text: str) -> Path:
    """Write ``text`` to ``path`` through a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_output(out: SeriesOutput, directory: str | Path, name: str | None = None) -> Path:
    """Write the CSV and a ``.summary.json`` sidecar holding the summary and wall time."""
    directory = Path(directory)
    path = atomic_write(directory / (name or out.config.output_name), render_csv(out))
    side = {"summary": out.summary, "wall_time_s": out.wall_time, "version": _version(), "csv": path.name}
    atomic_write(path.with_suffix(".summary.json"), json.dumps(side, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


@dataclass(frozen=True)
class CsvTable:
    header: dict[str, Any]
    columns: tuple[str, ...]
    data: np.ndarray

    @property
    def config(self) -> RunConfig:
        return make_config(self.header["config"])

    def column(self, name: str) -> np.ndarray:
        try:
            return self.data[:, self.columns.index(name)]
        except ValueError:
            raise ValidationError(f"column {name!r} not in {self.columns}") from None


def read_csv(path: str | Path) -> CsvTable:
    """Parse a file written by :func:`write_output`."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    header: dict[str, Any] = {}
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        text = lines[i][1:].strip()
        key, sep, value = text.partition(": ")
        if sep and key in ("config", "summary"):
            header[key] = json.loads(value)
        elif text.startswith("decoherence "):
            header["version"] = text.split(" ", 1)[1]
        i += 1
    if "config" not in header or i >= len(lines):
        raise ValidationError(f"{path} is not a decoherence output file")
    columns = tuple(lines[i].split(","))
    rows = [list(map(float, ln.split(","))) for ln in lines[i + 1 :] if ln.strip()]
    data = np.array(rows, dtype=float).reshape(len(rows), len(columns))
    return CsvTable(header, columns, data)
