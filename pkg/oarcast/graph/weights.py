"""
Graph weights file: shape-tagged little-endian float32 tensors plus a JSON
manifest of the dimensions.

Binary layout:

    b"OARW" | u32 tensor count | per tensor:
        u16 name length | name (UTF-8) | u8 ndim | u32 dims... | float32 data
"""

import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np

from ..core.errors import ConfigurationError
from .embedding import EmbeddingTables
from .gcn import GcnLayer, GcnWeights


logger = logging.getLogger(__name__)


MAGIC = b"OARW"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class GraphModel:
    """Embedding tables plus GCN weights, as loaded or generated."""

    tables: EmbeddingTables
    gcn: GcnWeights
    seed: Optional[int] = None

    @classmethod
    def generate(
        cls,
        seed: int = 0,
        q_angle: int = 8,
        d_c: int = 32,
        d_theta: int = 16,
        d_r: int = 16,
        feature_dim: int = 64
    ) -> "GraphModel":
        tables = EmbeddingTables.generate(seed, q_angle, d_c, d_theta, d_r)
        gcn = GcnWeights.generate(seed + 1, tables.node_dim, tables.edge_dim, feature_dim)
        return cls(tables, gcn, seed)

    def manifest(self) -> Dict[str, object]:
        return {
            "format_version": FORMAT_VERSION,
            "d_c": int(self.tables.W_c.shape[1]),
            "d_theta": int(self.tables.W_theta.shape[1]),
            "d_r": int(self.tables.W_r.shape[1]),
            "q_angle": self.tables.q_angle,
            "feature_dim": self.gcn.feature_dim,
            "layers": [
                {
                    "triple": list(layer.triple_w.shape),
                    "projection": list(layer.proj_w.shape),
                }
                for layer in self.gcn.layers
            ],
            "seed": self.seed,
        }

    def tensors(self) -> Dict[str, np.ndarray]:
        out = {
            "W_c": self.tables.W_c,
            "W_theta": self.tables.W_theta,
            "W_r": self.tables.W_r,
        }
        for i, layer in enumerate(self.gcn.layers):
            out[f"gcn.{i}.triple.weight"] = layer.triple_w
            out[f"gcn.{i}.triple.bias"] = layer.triple_b
            out[f"gcn.{i}.proj.weight"] = layer.proj_w
            out[f"gcn.{i}.proj.bias"] = layer.proj_b
        return out


def manifest_path(path: Union[str, Path]) -> Path:
    return Path(path).with_suffix(".json")


def save_weights(model: GraphModel, path: Union[str, Path]) -> Path:
    """Write the binary tensor file and its JSON manifest."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    tensors = model.tensors()
    chunks = [MAGIC, struct.pack("<I", len(tensors))]
    for name, array in tensors.items():
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)) + encoded)
        chunks.append(struct.pack("<B", array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}I", *array.shape))
        chunks.append(np.ascontiguousarray(array, dtype="<f4").tobytes())
    path.write_bytes(b"".join(chunks))

    with open(manifest_path(path), "w", encoding="utf-8") as f:
        json.dump(model.manifest(), f, indent=2)

    logger.info(f"Graph weights saved to {path}")
    return path


def _read_tensors(blob: bytes, path: Path) -> Dict[str, np.ndarray]:
    if blob[:4] != MAGIC:
        raise ConfigurationError(f"{path} is not a weights file")
    pos = 4
    try:
        (count,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        tensors = {}
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", blob, pos)
            pos += 2
            name = blob[pos:pos + name_len].decode("utf-8")
            pos += name_len
            (ndim,) = struct.unpack_from("<B", blob, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}I", blob, pos)
            pos += 4 * ndim
            size = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(blob, dtype="<f4", count=size, offset=pos)
            pos += 4 * size
            tensors[name] = data.astype(np.float64).reshape(shape)
    except (struct.error, ValueError, UnicodeDecodeError) as e:
        raise ConfigurationError(f"Corrupt weights file {path}: {e}") from e
    return tensors


def load_weights(path: Union[str, Path]) -> GraphModel:
    """
    Load a weights file and check it against its manifest.

    Raises:
        ConfigurationError: missing tensors or dimensions that disagree with
        the manifest
    """
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise ConfigurationError(f"Cannot read weights file {path}: {e}") from e

    tensors = _read_tensors(blob, path)

    try:
        tables = EmbeddingTables(tensors["W_c"], tensors["W_theta"], tensors["W_r"])
        layers = []
        i = 0
        while f"gcn.{i}.triple.weight" in tensors:
            layers.append(GcnLayer(
                triple_w=tensors[f"gcn.{i}.triple.weight"],
                triple_b=tensors[f"gcn.{i}.triple.bias"],
                proj_w=tensors[f"gcn.{i}.proj.weight"],
                proj_b=tensors[f"gcn.{i}.proj.bias"],
            ))
            i += 1
    except KeyError as e:
        raise ConfigurationError(f"Weights file {path} lacks tensor {e}") from e

    if len(layers) != 2:
        raise ConfigurationError(f"Expected 2 GCN layers in {path}, found {len(layers)}")
    for layer in layers:
        layer.check()

    model = GraphModel(tables, GcnWeights(tuple(layers)))

    mpath = manifest_path(path)
    if mpath.exists():
        with open(mpath, "r", encoding="utf-8") as f:
            manifest = json.load(f)
        actual = model.manifest()
        for key in ("d_c", "d_theta", "d_r", "q_angle", "feature_dim", "layers"):
            if key in manifest and manifest[key] != actual[key]:
                raise ConfigurationError(
                    f"Manifest {mpath} says {key}={manifest[key]}, tensors give {actual[key]}"
                )
        model = GraphModel(tables, model.gcn, manifest.get("seed"))
    else:
        logger.warning(f"No manifest next to {path}; dimensions taken from the tensors")

    if tables.node_dim != layers[0].d_in or tables.edge_dim != layers[0].d_edge:
        raise ConfigurationError(
            f"Embedding dimensions ({tables.node_dim}, {tables.edge_dim}) do not match "
            f"layer 0 ({layers[0].d_in}, {layers[0].d_edge})"
        )

    logger.info(f"Graph weights loaded from {path}")
    return model
