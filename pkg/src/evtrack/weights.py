"""Named-tensor weight store with a bit-exact binary file format.

File layout: magic ``PSMW``, u32 version=1, u32 tensor count; per tensor a
u16 name length, UTF-8 name, u8 rank, u32 dims[rank], then the row-major
little-endian f32 payload. Tensors are written sorted by name so identical
weights always serialize to identical bytes.

In memory every tensor is float64; values are rounded through f32 at
creation so a save/load round trip is exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .config import TrackerConfig
from .nnops import make_rng

MAGIC = b"PSMW"
VERSION = 1


class WeightsError(ValueError):
    """Weights file fails the format or shape audit."""


def weight_schema(cfg: TrackerConfig) -> dict[str, tuple[int, ...]]:
    """Expected name -> shape map for a configuration."""
    d = cfg.embed_dim
    h = cfg.hidden
    schema: dict[str, tuple[int, ...]] = {
        "patch_embed.weight": (3 * cfg.patch * cfg.patch, d),
        "patch_embed.bias": (d,),
        "pos_embed.template": (cfg.n_template_tokens, d),
        "pos_embed.search": (cfg.n_search_tokens, d),
    }
    for i in range(cfg.n_layers):
        p = f"layers.{i}"
        schema[f"{p}.norm1.gamma"] = (d,)
        schema[f"{p}.norm1.beta"] = (d,)
        schema[f"{p}.attn.qkv.weight"] = (d, 3 * d)
        schema[f"{p}.attn.qkv.bias"] = (3 * d,)
        schema[f"{p}.attn.out.weight"] = (d, d)
        schema[f"{p}.attn.out.bias"] = (d,)
        schema[f"{p}.norm2.gamma"] = (d,)
        schema[f"{p}.norm2.beta"] = (d,)
        schema[f"{p}.ffn.fc1.weight"] = (d, h)
        schema[f"{p}.ffn.fc1.bias"] = (h,)
        schema[f"{p}.ffn.fc2.weight"] = (h, d)
        schema[f"{p}.ffn.fc2.bias"] = (d,)
    for stage in (2, 3):
        schema[f"ft.{stage}.norm.gamma"] = (d,)
        schema[f"ft.{stage}.norm.beta"] = (d,)
        schema[f"ft.{stage}.linear.weight"] = (d, d)
        schema[f"ft.{stage}.linear.bias"] = (d,)
    for i in cfg.moe_layer_indices:
        schema[f"router.{i}.fc1.weight"] = (2 * d, d)
        schema[f"router.{i}.fc1.bias"] = (d,)
        schema[f"router.{i}.fc2.weight"] = (d, 3)
        schema[f"router.{i}.fc2.bias"] = (3,)
    for i in range(cfg.dps_start_index, cfg.n_layers):
        schema[f"halt.{i}.weight"] = (d, 1)
        schema[f"halt.{i}.bias"] = (1,)
    for branch, out_ch in (("score", 1), ("offset", 2), ("size", 2)):
        chans = [d, d // 2, d // 4, d // 8]
        for j in range(3):
            p = f"head.{branch}.conv{j}"
            schema[f"{p}.weight"] = (chans[j + 1], chans[j], 3, 3)
            schema[f"{p}.scale"] = (chans[j + 1],)
            schema[f"{p}.shift"] = (chans[j + 1],)
        schema[f"head.{branch}.out.weight"] = (out_ch, chans[3], 1, 1)
        schema[f"head.{branch}.out.bias"] = (out_ch,)
    return schema


class ModelWeights:
    """Immutable name -> float64 tensor map, validated against a schema."""

    def __init__(self, tensors: dict[str, np.ndarray]):
        self._tensors = {}
        for name, arr in tensors.items():
            a = np.asarray(arr, dtype=np.float64)
            a.setflags(write=False)
            self._tensors[name] = a

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._tensors[name]
        except KeyError:
            raise WeightsError(f"missing tensor: {name}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def names(self) -> list[str]:
        return sorted(self._tensors)

    def audit(self, schema: dict[str, tuple[int, ...]]) -> None:
        """Exact name-set and shape match, plus finiteness."""
        unknown = sorted(set(self._tensors) - set(schema))
        if unknown:
            raise WeightsError(f"unknown tensors: {', '.join(unknown)}")
        missing = sorted(set(schema) - set(self._tensors))
        if missing:
            raise WeightsError(f"missing tensors: {', '.join(missing)}")
        for name, shape in schema.items():
            got = self._tensors[name].shape
            if got != shape:
                raise WeightsError(f"{name}: shape {got}, expected {shape}")
            if not np.all(np.isfinite(self._tensors[name])):
                raise WeightsError(f"{name}: non-finite values")

    # -- file format --------------------------------------------------------

    def save(self, path) -> None:
        chunks = [MAGIC, struct.pack("<II", VERSION, len(self._tensors))]
        for name in sorted(self._tensors):
            arr = self._tensors[name].astype(np.float32)
            encoded = name.encode("utf-8")
            chunks.append(struct.pack("<H", len(encoded)))
            chunks.append(encoded)
            chunks.append(struct.pack("<B", arr.ndim))
            chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
            chunks.append(arr.tobytes(order="C"))
        Path(path).write_bytes(b"".join(chunks))

    @classmethod
    def load(cls, path, schema: dict[str, tuple[int, ...]] | None = None) -> "ModelWeights":
        data = Path(path).read_bytes()
        if len(data) < 12:
            raise WeightsError("truncated file: missing header")
        if data[:4] != MAGIC:
            raise WeightsError(f"bad magic {data[:4]!r}")
        version, count = struct.unpack_from("<II", data, 4)
        if version != VERSION:
            raise WeightsError(f"version mismatch: {version}, expected {VERSION}")
        pos = 12
        tensors: dict[str, np.ndarray] = {}
        for _ in range(count):
            if pos + 2 > len(data):
                raise WeightsError("truncated record: name length")
            (name_len,) = struct.unpack_from("<H", data, pos)
            pos += 2
            if pos + name_len + 1 > len(data):
                raise WeightsError("truncated record: name or rank")
            name = data[pos:pos + name_len].decode("utf-8")
            pos += name_len
            rank = data[pos]
            pos += 1
            if pos + 4 * rank > len(data):
                raise WeightsError(f"{name}: truncated dims")
            dims = struct.unpack_from(f"<{rank}I", data, pos)
            pos += 4 * rank
            n = int(np.prod(dims, dtype=np.int64)) if rank else 1
            if pos + 4 * n > len(data):
                raise WeightsError(f"{name}: truncated payload")
            payload = np.frombuffer(data, dtype="<f4", count=n, offset=pos)
            pos += 4 * n
            if name in tensors:
                raise WeightsError(f"duplicate tensor: {name}")
            tensors[name] = payload.reshape(dims).astype(np.float64)
        if pos != len(data):
            raise WeightsError(f"{len(data) - pos} trailing bytes after last tensor")
        weights = cls(tensors)
        if schema is not None:
            weights.audit(schema)
        return weights


def selftest_weights(cfg: TrackerConfig, seed: int, halting_bias: float = 0.0) -> ModelWeights:
    """Shape-correct Xavier-style weights from a seed, for pipeline testing.

    halting_bias shifts every halting predictor's bias, which biases the
    depth controller toward early exits.
    """
    rng = make_rng(seed)
    schema = weight_schema(cfg)
    tensors: dict[str, np.ndarray] = {}
    for name in sorted(schema):
        shape = schema[name]
        leaf = name.rsplit(".", 1)[-1]
        if name.startswith("pos_embed."):
            arr = rng.normal(0.0, 0.02, size=shape)
        elif leaf == "weight":
            if len(shape) == 4:
                fan_in = shape[1] * shape[2] * shape[3]
                fan_out = shape[0] * shape[2] * shape[3]
            else:
                fan_in, fan_out = shape[0], shape[-1]
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            arr = rng.uniform(-limit, limit, size=shape)
        elif leaf in ("gamma", "scale"):
            arr = np.ones(shape)
        elif leaf == "bias" and name.startswith("halt."):
            arr = np.full(shape, halting_bias)
        else:  # beta, shift, bias
            arr = np.zeros(shape)
        # round through f32 so the file round trip is exact
        tensors[name] = arr.astype(np.float32).astype(np.float64)
    weights = ModelWeights(tensors)
    weights.audit(schema)
    return weights
