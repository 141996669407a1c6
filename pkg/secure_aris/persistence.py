"""
Result Persistence
JSON documents with complex numbers as [re, im] pairs, and the flat binary
checkpoint format used for policy parameters
"""
import dataclasses
import json
import struct
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np
from rich.console import Console

from .config import *
from .errors import SecureArisError

console = Console()

CHECKPOINT_MAGIC = b"SARISCK1"


def json_ready(value: Any) -> Any:
    """Recursively convert numpy values; complex entries become [re, im] pairs"""
    if isinstance(value, dict):
        return {str(k): json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_ready(v) for v in value]
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return json_ready(value.__dict__)
    if isinstance(value, np.ndarray):
        if np.iscomplexobj(value):
            return np.stack([value.real, value.imag], axis=-1).tolist()
        return value.tolist()
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.generic):
        return value.item()
    return value


def to_complex(pairs) -> np.ndarray:
    """Inverse of the [re, im] encoding"""
    array = np.asarray(pairs, dtype=float)
    if array.shape[-1:] != (2,):
        raise SecureArisError(f"expected trailing [re, im] pairs, got shape {array.shape}")
    return array[..., 0] + 1j * array[..., 1]


def save_json(path: Union[str, Path], payload: Dict[str, Any], kind: str = "result"):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {"schema_version": RESULTS_SCHEMA_VERSION, "kind": kind,
                "created_at": datetime.now().isoformat()}
    document.update(json_ready(payload))
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=2, ensure_ascii=False)
    console.print(f"💾 Saved {kind} to [cyan]{path}[/cyan]")


def load_json(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise SecureArisError(f"file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


CHANNEL_FIELDS = ("h_SAD", "h_SRD", "h_JRD", "h_JD", "h_SAk", "h_SRk", "h_Jk", "H_JRk",
                  "h_SAk_hat", "h_SRk_hat", "h_Jk_hat", "H_JRk_hat")
RADIUS_FIELDS = ("r_SAk", "r_SRk", "r_Jk", "r_JRk")


def channels_to_dict(channels) -> Dict[str, Any]:
    payload = {name: getattr(channels, name) for name in CHANNEL_FIELDS + RADIUS_FIELDS}
    payload.update(p_src=channels.p_src, p_jam_max=channels.p_jam_max,
                   noise_power=channels.noise_power, aris_enabled=channels.aris_enabled,
                   fixed_ris_enabled=channels.fixed_ris_enabled)
    return payload


def channels_from_dict(payload: Dict[str, Any]):
    from .channel import ChannelSet

    values = {name: to_complex(payload[name]) for name in CHANNEL_FIELDS}
    values.update({name: np.asarray(payload[name], dtype=float) for name in RADIUS_FIELDS})
    return ChannelSet(p_src=float(payload["p_src"]), p_jam_max=float(payload["p_jam_max"]),
                      noise_power=float(payload["noise_power"]),
                      aris_enabled=bool(payload.get("aris_enabled", True)),
                      fixed_ris_enabled=bool(payload.get("fixed_ris_enabled", True)), **values)


# Checkpoint layout (all little-endian):
#   8 bytes magic, uint32 array count, then per array:
#   uint32 rank, rank x uint32 shape, prod(shape) x float64 data (row-major)


def save_checkpoint(path: Union[str, Path], arrays: List[np.ndarray]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", len(arrays)))
        for array in arrays:
            array = np.ascontiguousarray(array, dtype="<f8")
            f.write(struct.pack("<I", array.ndim))
            f.write(struct.pack(f"<{array.ndim}I", *array.shape))
            f.write(array.tobytes(order="C"))


def load_checkpoint(path: Union[str, Path]) -> List[np.ndarray]:
    path = Path(path)
    data = path.read_bytes()
    if data[:8] != CHECKPOINT_MAGIC:
        raise SecureArisError(f"{path} is not a policy checkpoint")
    offset = 8
    (count,) = struct.unpack_from("<I", data, offset)
    offset += 4
    arrays = []
    for _ in range(count):
        (rank,) = struct.unpack_from("<I", data, offset)
        offset += 4
        shape = struct.unpack_from(f"<{rank}I", data, offset)
        offset += 4 * rank
        size = int(np.prod(shape)) if rank else 1
        arrays.append(np.frombuffer(data, dtype="<f8", count=size, offset=offset).reshape(shape).copy())
        offset += 8 * size
    if offset != len(data):
        raise SecureArisError(f"{path} has {len(data) - offset} trailing bytes")
    return arrays
