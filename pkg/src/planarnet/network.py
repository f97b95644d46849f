"""Planar perceptron networks: per-node incoming weights, clamped linear forward pass.

Each node j computes clamp01(b_j + sum_i w_ij * x_i) over its incoming
neighborhood; nodes are independent, so the forward pass is a masked gather
plus a dot product per node.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import (
    GridPosition,
    PolarGeometry,
    Topology,
    cartesian_topology,
    polar_topology,
)
from .imaging import GrayImage, PolarImage

__all__ = [
    "PlanarNetwork",
    "StructureGraph",
    "init_network",
    "identity_network",
    "shift_network",
    "forward",
    "forward_chain",
    "export_structure",
    "save_network",
    "load_network",
]


class PlanarNetwork:
    """Weights and biases over a topology.

    Per-node weight vectors are stored in one padded (n_nodes, max_degree)
    array; padded slots hold index 0 with weight 0 and are masked out of every
    update, so they never contribute.
    """

    def __init__(self, topology: Topology, seed: Optional[int] = None):
        self.topology = topology
        self.seed = seed
        n = topology.n_nodes
        lengths = np.array([len(h) for h in topology.neighborhoods], dtype=np.int64)
        kmax = int(lengths.max()) if n else 0
        idx = np.zeros((n, kmax), dtype=np.int64)
        mask = np.zeros((n, kmax), dtype=np.float64)
        for j, hood in enumerate(topology.neighborhoods):
            for s, pos in enumerate(hood):
                idx[j, s] = topology.node_index(pos)
                mask[j, s] = 1.0
        self._idx = idx
        self._mask = mask
        self._lengths = lengths
        self._w = np.zeros((n, kmax), dtype=np.float64)
        self._b = np.zeros(n, dtype=np.float64)

    @property
    def n_nodes(self) -> int:
        return self.topology.n_nodes

    @property
    def n_connections(self) -> int:
        return int(self._lengths.sum())

    @property
    def biases(self) -> np.ndarray:
        return self._b

    def weights_of(self, node: int) -> np.ndarray:
        """The node's weight vector, aligned with its neighborhood ordering."""
        return self._w[node, : self._lengths[node]]

    def set_weight(self, node: int, source: GridPosition, value: float) -> None:
        hood = self.topology.neighborhoods[node]
        try:
            slot = hood.index(source)
        except ValueError:
            raise ValueError(f"{source} is not in the neighborhood of node {node}") from None
        self._w[node, slot] = value

    def copy(self) -> "PlanarNetwork":
        dup = PlanarNetwork(self.topology, seed=self.seed)
        dup._w = self._w.copy()
        dup._b = self._b.copy()
        return dup


def init_network(
    topology: Topology,
    init_low: float = -1.0,
    init_high: float = 1.0,
    seed: int = 0,
) -> PlanarNetwork:
    """Fresh network with i.i.d. uniform weights in [init_low, init_high], zero biases."""
    if init_low > init_high:
        raise ValueError(f"init_low {init_low} exceeds init_high {init_high}")
    net = PlanarNetwork(topology, seed=seed)
    rng = np.random.default_rng(seed)
    flat = rng.uniform(init_low, init_high, size=net.n_connections)
    net._w[net._mask.astype(bool)] = flat  # row-major fill follows node order
    return net


def identity_network(topology: Topology) -> PlanarNetwork:
    """Self-weight 1, everything else 0; reproduces the input exactly."""
    net = PlanarNetwork(topology)
    for j in range(topology.n_nodes):
        net.set_weight(j, topology.position(j), 1.0)
    return net


def shift_network(topology: Topology, drow: int, dcol: int) -> PlanarNetwork:
    """Exact integer-shift network: node (r, c) copies input (r + drow, c + dcol).

    Nodes whose source falls outside the grid (or outside their neighborhood)
    keep all-zero weights and output 0.
    """
    net = PlanarNetwork(topology)
    for j in range(topology.n_nodes):
        pos = topology.position(j)
        src = GridPosition(pos.row + drow, pos.col + dcol)
        if 0 <= src.row < topology.height and 0 <= src.col < topology.width:
            if src in topology.neighborhoods[j]:
                net.set_weight(j, src, 1.0)
    return net


def _forward_flat(net: PlanarNetwork, batch: np.ndarray) -> np.ndarray:
    """Forward pass on flattened inputs of shape (B, n_nodes) -> (B, n_nodes)."""
    gathered = batch[:, net._idx]
    pre = net._b + np.einsum("nk,bnk->bn", net._w, gathered)
    return np.clip(pre, 0.0, 1.0)


def _check_input(net: PlanarNetwork, x) -> np.ndarray:
    topology = net.topology
    if isinstance(x, GrayImage):
        if topology.kind != "cartesian":
            raise ValueError("plain image fed to a polar network; convert with to_polar")
        if (x.height, x.width) != (topology.height, topology.width):
            raise ValueError(
                f"input {x.height}x{x.width} does not match network "
                f"{topology.height}x{topology.width}"
            )
        return x.pixels.ravel()
    if isinstance(x, PolarImage):
        if topology.kind != "polar":
            raise ValueError("polar picture fed to a cartesian network")
        if (x.rings, x.wedges) != (topology.height, topology.width):
            raise ValueError(
                f"input {x.rings}x{x.wedges} does not match network "
                f"{topology.height}x{topology.width}"
            )
        return x.sectors.ravel()
    raise TypeError(f"unsupported network input: {type(x).__name__}")


def _wrap_output(net: PlanarNetwork, flat: np.ndarray):
    grid = flat.reshape(net.topology.height, net.topology.width)
    if net.topology.kind == "polar":
        return PolarImage(net.topology.polar, grid)
    return GrayImage(grid)


def forward(net: PlanarNetwork, x):
    """Network output for one image (or polar picture) of matching dimensions."""
    flat = _check_input(net, x)
    return _wrap_output(net, _forward_flat(net, flat[None, :])[0])


def forward_chain(net: PlanarNetwork, x, j: int):
    """j-fold self-composition of forward (j >= 1)."""
    if j < 1:
        raise ValueError(f"chain length must be >= 1, got {j}")
    out = x
    for _ in range(j):
        out = forward(net, out)
    return out


@dataclass
class StructureGraph:
    """Flattened view of a network for rendering: one edge per incoming weight."""

    kind: str
    height: int
    width: int
    edges: list  # (source GridPosition, target GridPosition, weight)
    biases: dict  # GridPosition -> bias
    polar: Optional[PolarGeometry] = None


def export_structure(net: PlanarNetwork) -> StructureGraph:
    """Edge list with positions attached; rejects non-finite weights."""
    if not (np.all(np.isfinite(net._w)) and np.all(np.isfinite(net._b))):
        raise ValueError("network contains non-finite weights")
    topology = net.topology
    edges = []
    biases = {}
    for j in range(topology.n_nodes):
        target = topology.position(j)
        biases[target] = float(net._b[j])
        for src, weight in zip(topology.neighborhoods[j], net.weights_of(j)):
            edges.append((src, target, float(weight)))
    return StructureGraph(
        topology.kind, topology.height, topology.width, edges, biases, polar=topology.polar
    )


def save_network(net: PlanarNetwork, path) -> None:
    """Write a self-describing JSON checkpoint; floats round-trip bit-exactly."""
    topology = net.topology
    record = {
        "kind": topology.kind,
        "height": topology.height,
        "width": topology.width,
        "neighborhood": {
            "radius": topology.neighborhood_spec.radius,
            "dynamic": topology.neighborhood_spec.dynamic,
        },
        "seed": net.seed,
        "weights": [net.weights_of(j).tolist() for j in range(topology.n_nodes)],
        "biases": net._b.tolist(),
    }
    if topology.polar is not None:
        record["polar"] = {
            "source_size": topology.polar.source_size,
            "rings": topology.polar.rings,
            "wedges": topology.polar.wedges,
        }
    with open(path, "w") as fh:
        json.dump(record, fh)


def load_network(path) -> PlanarNetwork:
    """Rebuild a network from a checkpoint written by save_network."""
    with open(path) as fh:
        record = json.load(fh)
    radius = record["neighborhood"]["radius"]
    if record["kind"] == "polar":
        from .geometry import polar_geometry

        p = record["polar"]
        geometry = polar_geometry(p["source_size"], p["rings"], p["wedges"])
        topology = polar_topology(geometry, base_radius=radius)
    else:
        topology = cartesian_topology(record["height"], record["width"], radius)
    net = PlanarNetwork(topology, seed=record.get("seed"))
    weights = record["weights"]
    if len(weights) != topology.n_nodes:
        raise ValueError(
            f"checkpoint has {len(weights)} nodes, topology expects {topology.n_nodes}"
        )
    for j, row in enumerate(weights):
        if len(row) != net._lengths[j]:
            raise ValueError(f"checkpoint node {j} has {len(row)} weights, "
                             f"topology expects {net._lengths[j]}")
        net._w[j, : len(row)] = row
    net._b[:] = record["biases"]
    return net
