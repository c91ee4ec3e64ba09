"""Projection tables for categories, angle bins and relation labels."""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..codec.oar_codec import angle_to_bin
from ..core.errors import ConfigurationError
from ..core.oar import Category, OarFrame, RelationLabel


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmbeddingTables:
    """W_c (categories x d_c), W_theta (2^q x d_theta), W_r (labels x d_r)."""

    W_c: np.ndarray
    W_theta: np.ndarray
    W_r: np.ndarray

    def __post_init__(self):
        if self.W_c.ndim != 2 or self.W_c.shape[0] != len(Category):
            raise ConfigurationError(f"W_c must have {len(Category)} rows, got {self.W_c.shape}")
        if self.W_r.ndim != 2 or self.W_r.shape[0] != len(RelationLabel):
            raise ConfigurationError(f"W_r must have {len(RelationLabel)} rows, got {self.W_r.shape}")
        bins = self.W_theta.shape[0]
        if self.W_theta.ndim != 2 or bins & (bins - 1) or bins < 2:
            raise ConfigurationError(f"W_theta rows must be a power of two, got {self.W_theta.shape}")

    @property
    def q_angle(self) -> int:
        return int(self.W_theta.shape[0]).bit_length() - 1

    @property
    def node_dim(self) -> int:
        return self.W_c.shape[1] + self.W_theta.shape[1]

    @property
    def edge_dim(self) -> int:
        return self.W_r.shape[1]

    @classmethod
    def generate(
        cls,
        seed: int = 0,
        q_angle: int = 8,
        d_c: int = 32,
        d_theta: int = 16,
        d_r: int = 16
    ) -> "EmbeddingTables":
        """Seeded standard-normal tables stored at float32 precision."""
        rng = np.random.default_rng(seed)
        draw = lambda rows, cols: rng.standard_normal((rows, cols)).astype(np.float32).astype(np.float64)
        return cls(
            W_c=draw(len(Category), d_c),
            W_theta=draw(1 << q_angle, d_theta),
            W_r=draw(len(RelationLabel), d_r),
        )


def embed(
    frame: OarFrame,
    tables: EmbeddingTables,
    q: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Node and edge vectors of one frame.

    Node 0 is the background: its category row is BACKGROUND and its angle
    part is zero. Node i + 1 is frame.objects[i].

    Args:
        frame: Frame with angles on the q-bit grid
        tables: Projection tables
        q: Angle quantization bits

    Returns:
        (nodes (N+1, d_c+d_theta), edges (K, d_r), edge_index (K, 2) of
        subject/object node indices, relations in sorted order)
    """
    if q != tables.q_angle:
        raise ConfigurationError(
            f"Angle table has {tables.W_theta.shape[0]} rows, q={q} needs {1 << q}"
        )

    d_c = tables.W_c.shape[1]
    nodes = np.zeros((frame.object_count + 1, tables.node_dim))
    nodes[0, :d_c] = tables.W_c[int(Category.BACKGROUND)]

    for i, oid in enumerate(frame.objects, start=1):
        a = frame.attributes[oid]
        cat = int(a.category)
        if not 0 <= cat < tables.W_c.shape[0]:
            raise ConfigurationError(f"Category index {cat} out of range")
        nodes[i, :d_c] = tables.W_c[cat]
        nodes[i, d_c:] = tables.W_theta[angle_to_bin(a.angle, q)]

    index = {oid: i for i, oid in enumerate(frame.nodes())}
    relations = sorted(frame.relations)
    edges = np.zeros((len(relations), tables.edge_dim))
    edge_index = np.zeros((len(relations), 2), dtype=np.int64)
    for k, rel in enumerate(relations):
        label = int(rel.label)
        if not 0 <= label < tables.W_r.shape[0]:
            raise ConfigurationError(f"Relation label index {label} out of range")
        edges[k] = tables.W_r[label]
        edge_index[k] = (index[rel.subject], index[rel.object])

    return nodes, edges, edge_index
