"""MNO1 binary container for trajectory sets and model checkpoints.

Layout (little-endian):
    b"MNO1" | u16 version | u16 dtype code | u16 rank | rank x u64 extents
    | u16 field count | per field: u16 name length, name, u32 count, count x f64
    | payload, prod(extents) x f64 in C order

Every container is written to a temporary file and renamed into place. A
key=value sidecar at `path + ".spec"` (datasets) or `path + ".config"`
(checkpoints) carries the human-readable provenance.
"""

import hashlib
import logging
import struct
from collections import OrderedDict
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
import torch

from memno_lab.errors import (
    BadMagicError,
    ContainerIOError,
    NonFinitePayloadError,
    TruncatedContainerError,
    UnsupportedVersionError,
)
from memno_lab.modules import file
from memno_lab.types import PDE_KINDS, ContainerHeader, SolverSpec, TrajectorySet

logger = logging.getLogger(__name__)

MAGIC = b"MNO1"
VERSION = 1
DTYPE_F64 = 1

SPEC_KEYS = ("nu", "length", "end_time", "nt", "dt", "resolution", "seed", "nonlinear", "forcing")
PARAM_PREFIX = "param:"


# ------------------------------ raw container ------------------------------


def encode_container(array: np.ndarray, fields: Dict[str, np.ndarray]) -> bytes:
    array = np.ascontiguousarray(array, dtype="<f8")
    parts = [MAGIC, struct.pack("<HHH", VERSION, DTYPE_F64, array.ndim)]
    parts.append(struct.pack(f"<{array.ndim}Q", *array.shape))
    parts.append(struct.pack("<H", len(fields)))
    for name, values in fields.items():
        encoded = name.encode("utf-8")
        values = np.asarray(values, dtype="<f8").reshape(-1)
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<I", values.size))
        parts.append(values.tobytes())
    parts.append(array.tobytes())
    return b"".join(parts)


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise ContainerIOError(path, e) from e


class _Cursor:
    """Bounds-checked reader over the header bytes."""

    def __init__(self, path, raw: bytes, offset: int):
        self.path = path
        self.raw = raw
        self.offset = offset

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.offset + size > len(self.raw):
            raise TruncatedContainerError(self.path, self.offset + size, len(self.raw))
        values = struct.unpack_from(fmt, self.raw, self.offset)
        self.offset += size
        return values

    def take_bytes(self, n: int) -> bytes:
        if self.offset + n > len(self.raw):
            raise TruncatedContainerError(self.path, self.offset + n, len(self.raw))
        out = self.raw[self.offset: self.offset + n]
        self.offset += n
        return out


def parse_header(path, raw: bytes) -> ContainerHeader:
    """Validates magic and version, then parses extents and fields.

    Raises:
        BadMagicError: Missing or wrong magic.
        UnsupportedVersionError: Version other than 1.
        TruncatedContainerError: Header runs past the end of the file.
    """

    if raw[:4] != MAGIC:
        raise BadMagicError(f"{path}: not an MNO1 container (magic {raw[:4]!r})")
    cursor = _Cursor(path, raw, 4)
    (version,) = cursor.take("<H")
    if version != VERSION:
        raise UnsupportedVersionError(f"{path}: unsupported container version {version}")
    dtype_code, rank = cursor.take("<HH")
    if dtype_code != DTYPE_F64:
        raise UnsupportedVersionError(f"{path}: unsupported element code {dtype_code}")
    extents = cursor.take(f"<{rank}Q")
    (n_fields,) = cursor.take("<H")
    fields = OrderedDict()
    for _ in range(n_fields):
        (name_len,) = cursor.take("<H")
        name = cursor.take_bytes(name_len).decode("utf-8")
        (count,) = cursor.take("<I")
        fields[name] = np.frombuffer(cursor.take_bytes(8 * count), dtype="<f8").astype(np.float64)
    return ContainerHeader(version, dtype_code, tuple(int(e) for e in extents), fields, cursor.offset)


def read_header(path) -> ContainerHeader:
    return parse_header(path, _read_bytes(path))


def read_container(path) -> Tuple[ContainerHeader, np.ndarray]:
    """Reads and validates a container: magic, version, length, then finiteness."""

    raw = _read_bytes(path)
    header = parse_header(path, raw)
    expected = header.payload_offset + header.payload_bytes
    if len(raw) != expected:
        raise TruncatedContainerError(path, expected, len(raw))
    payload = np.frombuffer(raw, dtype="<f8", offset=header.payload_offset).astype(np.float64)
    bad = np.flatnonzero(~np.isfinite(payload))
    if bad.size:
        raise NonFinitePayloadError(f"{path}: payload holds {bad.size} non-finite values (first at {int(bad[0])})")
    return header, payload.reshape(header.extents)


# ------------------------------ datasets ------------------------------


def spec_digest(sidecar_text: str) -> np.ndarray:
    """First 16 bytes of the sidecar's sha256, one byte per f64."""

    return np.frombuffer(hashlib.sha256(sidecar_text.encode("utf-8")).digest()[:16], dtype=np.uint8).astype(np.float64)


def spec_values(spec: SolverSpec) -> np.ndarray:
    return np.array([PDE_KINDS.index(spec.kind)] + [float(getattr(spec, k)) for k in SPEC_KEYS])


def spec_from_values(values: np.ndarray) -> SolverSpec:
    kind = PDE_KINDS[int(values[0])]
    raw = dict(zip(SPEC_KEYS, values[1:]))
    return SolverSpec(
        kind=kind,
        nu=float(raw["nu"]),
        length=float(raw["length"]),
        end_time=float(raw["end_time"]),
        nt=int(raw["nt"]),
        dt=float(raw["dt"]),
        resolution=int(raw["resolution"]),
        seed=int(raw["seed"]),
        nonlinear=bool(raw["nonlinear"]),
        forcing=bool(raw["forcing"]),
    )


def sidecar_text(ts: TrajectorySet) -> str:
    values = {"kind": ts.spec.kind, **{k: getattr(ts.spec, k) for k in SPEC_KEYS}}
    values["n_traj"] = ts.n_traj
    values["stored_resolution"] = ts.resolution
    values["lengths"] = ",".join(repr(v) for v in ts.lengths)
    return file.to_key_values(values)


def write_dataset(ts: TrajectorySet, path):
    """Writes `ts` to `path` and its key=value provenance to `path.spec`."""

    text = sidecar_text(ts)
    fields = OrderedDict([
        ("times", ts.times),
        ("lengths", np.asarray(ts.lengths)),
        ("spec_digest", spec_digest(text)),
        ("spec_values", spec_values(ts.spec)),
    ])
    file.atomic_write_bytes(path, encode_container(ts.data, fields))
    file.write_file(f"{path}.spec", text)
    logger.info(f"write_dataset(): {ts.n_traj} trajectories at resolution {ts.resolution} -> {path}")


def read_dataset(path) -> TrajectorySet:
    header, data = read_container(path)
    for name in ("times", "lengths", "spec_values"):
        if name not in header.fields:
            raise TruncatedContainerError(path, header.payload_offset, header.payload_offset)
    spec = spec_from_values(header.fields["spec_values"])

    sidecar = Path(f"{path}.spec")
    if sidecar.exists() and "spec_digest" in header.fields:
        if not np.array_equal(spec_digest(sidecar.read_text()), header.fields["spec_digest"]):
            logger.warning(f"read_dataset(): {sidecar} does not match the container provenance")

    return TrajectorySet(data, header.fields["times"], tuple(header.fields["lengths"]), spec)


# ------------------------------ checkpoints ------------------------------


def write_checkpoint(path, state_dict: Dict[str, torch.Tensor], config_text: str, extra: Optional[Dict[str, float]] = None):
    """Flattens a state dict into one container; a field per tensor records its shape."""

    fields = OrderedDict()
    chunks = []
    for name, value in state_dict.items():
        value = value.detach().to(torch.float64).cpu()
        fields[PARAM_PREFIX + name] = np.asarray(value.shape, dtype=np.float64)
        chunks.append(value.reshape(-1).numpy())
    for name, value in (extra or {}).items():
        fields[name] = np.atleast_1d(np.asarray(value, dtype=np.float64))
    payload = np.concatenate(chunks) if chunks else np.zeros(0)
    file.atomic_write_bytes(path, encode_container(payload, fields))
    file.write_file(f"{path}.config", config_text)


def read_checkpoint(path) -> Tuple["OrderedDict[str, torch.Tensor]", str, Dict[str, np.ndarray]]:
    """Returns (state_dict, config text, non-parameter fields)."""

    header, payload = read_container(path)
    state = OrderedDict()
    extra = {}
    offset = 0
    for name, values in header.fields.items():
        if not name.startswith(PARAM_PREFIX):
            extra[name] = values
            continue
        shape = tuple(int(v) for v in values)
        size = int(np.prod(shape, dtype=np.int64))
        if offset + size > payload.size:
            raise TruncatedContainerError(path, 8 * (offset + size), 8 * payload.size)
        state[name[len(PARAM_PREFIX):]] = torch.from_numpy(payload[offset: offset + size].reshape(shape).copy())
        offset += size
    try:
        config_text = Path(f"{path}.config").read_text()
    except OSError as e:
        raise ContainerIOError(f"{path}.config", e) from e
    return state, config_text, extra
