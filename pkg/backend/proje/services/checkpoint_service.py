"""Binary checkpoint format with CRC-32 integrity check.

Layout (little-endian throughout):
    16 bytes  magic "PROJE1" padded with NUL
     4 bytes  format version (u32)
     1 byte   task flag (0 entity, 1 relation)
     1 byte   variant flag (0 pointwise, 1 listwise, 2 wlistwise)
    24 bytes  n_e, n_r, k (u64 each)
     8 bytes  per scalar: W_E, W_R (row-major), D_eh, D_rh, D_et, D_rt, b_c, b_p as float64
     4 bytes  CRC-32 of everything above
"""

import logging
import struct
import zlib

import numpy as np

from ..exceptions import (
    BadMagicError,
    CheckpointError,
    CheckpointSizeError,
    ChecksumMismatchError,
    TruncatedCheckpointError,
    VersionMismatchError,
)
from ..models import ModelParams, TENSOR_ORDER
from ..schemas import CheckpointHeader, ModelConfig, Task, Variant
from ..utils.file_cleanup import atomic_write_bytes
from .projection_service import expected_parameter_count

logger = logging.getLogger(__name__)

MAGIC = b"PROJE1".ljust(16, b"\0")
FORMAT_VERSION = 1

_PREFIX = struct.Struct("<16sI")
_FLAGS = struct.Struct("<BB")
_DIMS = struct.Struct("<QQQ")
_CRC = struct.Struct("<I")
HEADER_SIZE = _PREFIX.size + _FLAGS.size + _DIMS.size

_TASK_FLAGS = {Task.ENTITY: 0, Task.RELATION: 1}
_VARIANT_FLAGS = {Variant.POINTWISE: 0, Variant.LISTWISE: 1, Variant.WLISTWISE: 2}


def checkpoint_size(n_entities: int, n_relations: int, k: int) -> int:
    return HEADER_SIZE + 8 * expected_parameter_count(n_entities, n_relations, k) + _CRC.size


def encode_checkpoint(params: ModelParams, config: ModelConfig) -> bytes:
    body = b"".join([
        _PREFIX.pack(MAGIC, FORMAT_VERSION),
        _FLAGS.pack(_TASK_FLAGS[Task(config.task)], _VARIANT_FLAGS[Variant(config.variant)]),
        _DIMS.pack(params.n_entities, params.n_relations, params.k),
        *(np.ascontiguousarray(t, dtype="<f8").tobytes() for t in params.tensors().values()),
    ])
    return body + _CRC.pack(zlib.crc32(body) & 0xFFFFFFFF)


def decode_checkpoint(data: bytes) -> tuple[ModelParams, CheckpointHeader]:
    if data[:len(MAGIC)] != MAGIC[:len(data)]:
        raise BadMagicError("not a ProjE checkpoint (bad magic)")
    if len(data) < HEADER_SIZE:
        raise TruncatedCheckpointError(f"checkpoint truncated inside the header ({len(data)} bytes)")

    _, version = _PREFIX.unpack_from(data, 0)
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"checkpoint format version {version}, expected {FORMAT_VERSION}")
    task_flag, variant_flag = _FLAGS.unpack_from(data, _PREFIX.size)
    n_entities, n_relations, k = _DIMS.unpack_from(data, _PREFIX.size + _FLAGS.size)
    try:
        task = {v: t for t, v in _TASK_FLAGS.items()}[task_flag]
        variant = {v: t for t, v in _VARIANT_FLAGS.items()}[variant_flag]
    except KeyError:
        raise CheckpointError(f"invalid task/variant flags {task_flag}/{variant_flag}") from None

    expected = checkpoint_size(n_entities, n_relations, k)
    if len(data) < expected:
        raise TruncatedCheckpointError(f"checkpoint has {len(data)} bytes, expected {expected}")
    if len(data) > expected:
        raise CheckpointSizeError(f"checkpoint has {len(data)} bytes, expected {expected}")
    (stored_crc,) = _CRC.unpack_from(data, expected - _CRC.size)
    actual_crc = zlib.crc32(data[:expected - _CRC.size]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise ChecksumMismatchError(f"CRC mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}")

    shapes = {
        "W_E": (n_entities, k),
        "W_R": (n_relations, k),
        "b_p": (1,),
    }
    offset = HEADER_SIZE
    tensors = {}
    for name in TENSOR_ORDER:
        shape = shapes.get(name, (k,))
        count = int(np.prod(shape))
        tensors[name] = np.frombuffer(data, dtype="<f8", count=count, offset=offset).astype(np.float64).reshape(shape)
        offset += 8 * count

    header = CheckpointHeader(
        format_version=version,
        task=task,
        variant=variant,
        n_entities=n_entities,
        n_relations=n_relations,
        k=k,
    )
    return ModelParams(**tensors), header


def save_checkpoint(params: ModelParams, config: ModelConfig, path: str) -> None:
    atomic_write_bytes(path, encode_checkpoint(params, config))
    logger.info("Saved checkpoint %s (n_e=%d, n_r=%d, k=%d)", path, params.n_entities, params.n_relations, params.k)


def load_checkpoint(path: str) -> tuple[ModelParams, CheckpointHeader]:
    """Read and validate a checkpoint; no parameters are returned unless every check passes."""
    with open(path, "rb") as f:
        data = f.read()
    params, header = decode_checkpoint(data)
    logger.info("Loaded checkpoint %s (%s, %s, k=%d)", path, header.task.value, header.variant.value, header.k)
    return params, header
