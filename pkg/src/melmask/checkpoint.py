"""Binary checkpoint format.

Layout (all integers 64-bit little-endian unsigned):

    magic b"MMCK" | version | step
    config block: byte length + utf-8 key=value text
    named array blocks, in order: parameters, buffers, optimizer first
    moments, optimizer second moments; each block is a count followed by
    (name length, name utf-8, rank, dims..., row-major float64 data)
    optimizer step count

Round trips are bit-exact: float64 values are written raw. Loading
validates magic, version, and completeness; applying a checkpoint to a
model validates shapes and names the offending parameter.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import CheckpointError

MAGIC = b"MMCK"
VERSION = 1


@dataclass
class Checkpoint:
    step: int
    config_text: str
    params: dict
    buffers: dict
    opt_m: dict
    opt_v: dict
    opt_t: int


def _write_u64(fh, value) -> None:
    fh.write(struct.pack("<Q", value))


def _write_named_block(fh, arrays) -> None:
    _write_u64(fh, len(arrays))
    for name in arrays:
        data = np.ascontiguousarray(arrays[name], dtype=np.float64)
        encoded = name.encode("utf-8")
        _write_u64(fh, len(encoded))
        fh.write(encoded)
        _write_u64(fh, data.ndim)
        for dim in data.shape:
            _write_u64(fh, dim)
        fh.write(data.tobytes())


class _Reader:
    def __init__(self, blob, path):
        self.blob = blob
        self.path = path
        self.offset = 0

    def bytes(self, n):
        if self.offset + n > len(self.blob):
            raise CheckpointError(f"truncated checkpoint {self.path}")
        out = self.blob[self.offset : self.offset + n]
        self.offset += n
        return out

    def u64(self):
        return struct.unpack("<Q", self.bytes(8))[0]

    def named_block(self):
        out = {}
        for _ in range(self.u64()):
            name = self.bytes(self.u64()).decode("utf-8")
            rank = self.u64()
            if rank > 32:
                raise CheckpointError(f"corrupt checkpoint {self.path}: rank {rank} for {name!r}")
            shape = tuple(self.u64() for _ in range(rank))
            count = int(np.prod(shape, dtype=np.int64)) if shape else 1
            data = np.frombuffer(self.bytes(count * 8), dtype="<f8").reshape(shape)
            out[name] = data.astype(np.float64)
        return out


def save_checkpoint(path, *, step, config_text, params, buffers, opt_m, opt_v, opt_t) -> None:
    """All dict values are arrays; parameters are stored by name."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        _write_u64(fh, VERSION)
        _write_u64(fh, step)
        encoded = config_text.encode("utf-8")
        _write_u64(fh, len(encoded))
        fh.write(encoded)
        _write_named_block(fh, params)
        _write_named_block(fh, buffers)
        _write_named_block(fh, opt_m)
        _write_named_block(fh, opt_v)
        _write_u64(fh, opt_t)


def load_checkpoint(path):
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    reader = _Reader(blob, path)
    if reader.bytes(4) != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint (bad magic)")
    version = reader.u64()
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}, expected {VERSION}")
    step = reader.u64()
    config_text = reader.bytes(reader.u64()).decode("utf-8")
    params = reader.named_block()
    buffers = reader.named_block()
    opt_m = reader.named_block()
    opt_v = reader.named_block()
    opt_t = reader.u64()
    return Checkpoint(step=step, config_text=config_text, params=params,
                      buffers=buffers, opt_m=opt_m, opt_v=opt_v, opt_t=opt_t)


def checkpoint_from_model(model, optimizer, step):
    from .config import format_config

    return dict(
        step=step,
        config_text=format_config(model.train_config),
        params={p.name: p.data.copy() for p in model.parameters()},
        buffers={k: v.copy() for k, v in model.buffers().items()},
        opt_m={k: v.copy() for k, v in optimizer.state.m.items()},
        opt_v={k: v.copy() for k, v in optimizer.state.v.items()},
        opt_t=optimizer.state.t,
    )


def apply_checkpoint(ckpt, model, optimizer=None) -> None:
    """Load values into a live model (and optimizer), validating shapes."""
    named = model.named_parameters()
    for name, param in named.items():
        if name not in ckpt.params:
            raise CheckpointError(f"checkpoint is missing parameter {name!r}")
        value = ckpt.params[name]
        if value.shape != param.data.shape:
            raise CheckpointError(
                f"parameter {name!r}: checkpoint shape {value.shape} does not "
                f"match model shape {param.data.shape}"
            )
        param.node.data[...] = value
    extra = set(ckpt.params) - set(named)
    if extra:
        raise CheckpointError(f"checkpoint has unknown parameters: {sorted(extra)}")
    buffers = model.buffers()
    for name, buf in buffers.items():
        if name not in ckpt.buffers:
            raise CheckpointError(f"checkpoint is missing buffer {name!r}")
        value = ckpt.buffers[name]
        if value.shape != buf.shape:
            raise CheckpointError(
                f"buffer {name!r}: checkpoint shape {value.shape} does not "
                f"match model shape {buf.shape}"
            )
        buf[...] = value
    if optimizer is not None:
        for name, value in ckpt.opt_m.items():
            if name not in named:
                raise CheckpointError(f"optimizer state for unknown parameter {name!r}")
        optimizer.load_state_dict({"t": ckpt.opt_t, "m": ckpt.opt_m, "v": ckpt.opt_v})
