import csv
import io
import logging
import os
import tempfile
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import yaml

from memno_lab.errors import ContainerIOError

logger = logging.getLogger(__name__)


def atomic_write_bytes(fname, payload: bytes):
    """Writes `payload` to a temporary sibling and renames it over `fname`."""

    path = Path(fname)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(payload)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.remove(tmp)
            raise
    except OSError as e:
        raise ContainerIOError(path, e) from e


def write_file(fname, content: str):
    atomic_write_bytes(fname, content.encode("utf-8"))


def write_csv(fname, rows: Sequence[dict], columns: Optional[List[str]] = None):
    """Writes dict rows as CSV with a header row; columns default to the first row's keys."""

    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    buffer = io.StringIO(newline="")
    writer = csv.DictWriter(buffer, fieldnames=columns, extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    write_file(fname, buffer.getvalue())
    logger.debug(f"write_csv(): {len(rows)} rows -> {fname}")


def read_csv(fname) -> List[dict]:
    path = Path(fname)
    try:
        with open(path, newline="") as f:
            return list(csv.DictReader(f))
    except OSError as e:
        raise ContainerIOError(path, e) from e


def write_yml_file(fname, data: dict):
    # plain python types only, so the file stays readable by other tools
    write_file(fname, yaml.safe_dump(data, sort_keys=False))


def read_yml_file(fname) -> dict:
    path = Path(fname)
    try:
        with open(path) as f:
            return yaml.safe_load(f) or {}
    except OSError as e:
        raise ContainerIOError(path, e) from e


def to_key_values(values: Dict[str, object]) -> str:
    return "".join(f"{k}={v}\n" for k, v in values.items())


def from_key_values(text: str) -> Dict[str, str]:
    """Parses key=value lines; blank lines and lines starting with # are skipped."""

    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            continue
        out[key.strip()] = value.strip()
    return out


def write_key_values(fname, values: Dict[str, object]):
    write_file(fname, to_key_values(values))


def read_key_values(fname) -> Dict[str, str]:
    path = Path(fname)
    try:
        return from_key_values(path.read_text())
    except OSError as e:
        raise ContainerIOError(path, e) from e


def list_files(directory, suffix: str) -> Iterable[Path]:
    return sorted(Path(directory).glob(f"*{suffix}"))
