"""Two-layer triple-wise graph propagation over OAR graphs."""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from ..core.errors import ConfigurationError


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GcnLayer:
    """
    triple_w: (2*d_in + d_r, 2*d_in), triple_b: (2*d_in,)
    proj_w: (d_in, d_out), proj_b: (d_out,)
    """

    triple_w: np.ndarray
    triple_b: np.ndarray
    proj_w: np.ndarray
    proj_b: np.ndarray

    @property
    def d_in(self) -> int:
        return self.proj_w.shape[0]

    @property
    def d_out(self) -> int:
        return self.proj_w.shape[1]

    @property
    def d_edge(self) -> int:
        return self.triple_w.shape[0] - 2 * self.d_in

    def check(self):
        d_in = self.d_in
        if self.triple_w.shape[1] != 2 * d_in or self.triple_b.shape != (2 * d_in,):
            raise ConfigurationError(
                f"Triple map {self.triple_w.shape} does not match node dimension {d_in}"
            )
        if self.proj_b.shape != (self.d_out,):
            raise ConfigurationError(f"Projection bias {self.proj_b.shape} != ({self.d_out},)")
        if self.d_edge <= 0:
            raise ConfigurationError(f"Triple map {self.triple_w.shape} leaves no edge columns")


@dataclass(frozen=True)
class GcnWeights:
    layers: Tuple[GcnLayer, ...]

    @property
    def feature_dim(self) -> int:
        return self.layers[-1].d_out

    @classmethod
    def generate(cls, seed: int, node_dim: int, edge_dim: int, feature_dim: int = 64) -> "GcnWeights":
        """Seeded Glorot-uniform weights, zero biases, float32 precision."""
        rng = np.random.default_rng(seed)

        def glorot(fan_in: int, fan_out: int) -> np.ndarray:
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
            return w.astype(np.float32).astype(np.float64)

        layers = []
        d_in = node_dim
        for _ in range(2):
            layers.append(GcnLayer(
                triple_w=glorot(2 * d_in + edge_dim, 2 * d_in),
                triple_b=np.zeros(2 * d_in),
                proj_w=glorot(d_in, feature_dim),
                proj_b=np.zeros(feature_dim),
            ))
            d_in = feature_dim
        return cls(tuple(layers))


def _affine(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Row-wise x @ w + b with a fixed per-row reduction order.

    Each output row depends only on its input row, so results do not change
    when rows are permuted.
    """
    if x.shape[0] == 0:
        return np.zeros((0, w.shape[1]))
    return (x[:, :, None] * w[None, :, :]).sum(axis=1) + b


def _canonical_mean(rows: np.ndarray) -> np.ndarray:
    """Mean of a set of vectors, independent of their order."""
    order = np.lexsort(rows.T[::-1])
    total = np.zeros(rows.shape[1])
    for r in rows[order]:
        total = total + r
    return total / rows.shape[0]


def _layer(h: np.ndarray, edges: np.ndarray, edge_index: np.ndarray, layer: GcnLayer) -> np.ndarray:
    d = layer.d_in
    if edges.shape[0]:
        triples = np.concatenate([h[edge_index[:, 0]], edges, h[edge_index[:, 1]]], axis=1)
        out = np.maximum(_affine(triples, layer.triple_w, layer.triple_b), 0.0)
        cand_s, cand_o = out[:, :d], out[:, d:]
    else:
        cand_s = cand_o = np.zeros((0, d))

    pooled = h.copy()
    for node in range(h.shape[0]):
        rows = [cand_s[edge_index[:, 0] == node], cand_o[edge_index[:, 1] == node]]
        candidates = np.concatenate(rows, axis=0) if edges.shape[0] else np.zeros((0, d))
        if candidates.shape[0]:
            pooled[node] = 0.5 * (h[node] + _canonical_mean(candidates))

    return _affine(pooled, layer.proj_w, layer.proj_b)


def graph_compute(
    nodes: np.ndarray,
    edges: np.ndarray,
    edge_index: np.ndarray,
    weights: GcnWeights
) -> np.ndarray:
    """
    Deep feature per node after two rounds of triple-wise propagation.

    For every (subject, relation, object) triple an affine map plus ReLU over
    concat(f_s, e_r, f_o) yields one candidate for the subject and one for
    the object. A node with candidates becomes P(0.5 * (h + mean)), an
    isolated node P(h), P being the layer's affine projection.

    Args:
        nodes: (N, d_node) node vectors, background first
        edges: (K, d_r) relation vectors
        edge_index: (K, 2) subject / object node indices
        weights: Two-layer weights

    Returns:
        (N, D) features
    """
    h = np.asarray(nodes, dtype=np.float64)
    edges = np.asarray(edges, dtype=np.float64)
    if edges.size == 0:
        edges = np.zeros((0, weights.layers[0].d_edge))
    edge_index = np.asarray(edge_index, dtype=np.int64).reshape(-1, 2)

    if edge_index.size and (edge_index.min() < 0 or edge_index.max() >= h.shape[0]):
        raise ConfigurationError("Relation references a node index outside the graph")
    if edges.shape[0] != edge_index.shape[0]:
        raise ConfigurationError(f"{edges.shape[0]} edge vectors for {edge_index.shape[0]} relations")

    for depth, layer in enumerate(weights.layers):
        layer.check()
        if h.shape[1] != layer.d_in:
            raise ConfigurationError(
                f"Layer {depth} expects node dimension {layer.d_in}, got {h.shape[1]}"
            )
        if edges.shape[1] != layer.d_edge:
            raise ConfigurationError(
                f"Layer {depth} expects edge dimension {layer.d_edge}, got {edges.shape[1]}"
            )
        h = _layer(h, edges, edge_index, layer)

    return h
