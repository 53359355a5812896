"""Motif Correlation Graphs and the attention built on them.

Each feature channel (or each wavelet subband of it) is cut into
non-overlapping 3x3 tiles.  At every tile position the channels of one group
form a directed graph: every node votes for its nearest other node by
Euclidean distance, splitting one unit of vote mass evenly over ties.  The
vote totals weight an average of the tiles (the motif); motifs are stitched
back into a plane, inverse-transformed, and multiplied into the group's
channels.

Vote splits are kept exact: each node hands out ``L / p`` integer units where
``L = lcm(1 .. n - 1)``, so ``sum(votes) == n * L`` holds without rounding.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from enum import Enum
from functools import reduce
from typing import Sequence

import numpy as np

from .core import (
    DTYPE,
    ConfigError,
    DegenerateGroupError,
    DimensionError,
    as_plane,
    as_tensor3,
    parallel_map,
)
from .wavelet import dwt2, idwt2

WINDOW = 3


class Normalization(str, Enum):
    TOTAL_CHANNELS = "total_channels"
    CONVEX_VOTES = "convex_votes"


@dataclass(frozen=True)
class McgaConfig:
    n_groups: int = 8
    window: int = WINDOW
    normalization: Normalization = Normalization.TOTAL_CHANNELS
    levels: int = 2
    self_exclusion: bool = True
    wavelet: bool = True

    def __post_init__(self):
        if self.window != WINDOW:
            raise ConfigError(f"window must be {WINDOW}, got {self.window}")
        if self.n_groups < 1:
            raise ConfigError(f"n_groups must be >= 1, got {self.n_groups}")
        if self.levels < 1:
            raise ConfigError(f"levels must be >= 1, got {self.levels}")
        object.__setattr__(self, "normalization", Normalization(self.normalization))


@dataclass
class MotifGraph:
    """One graph: ``votes / denominator`` are the node weights."""

    distances: np.ndarray
    votes: np.ndarray
    denominator: int
    nearest: list[np.ndarray]
    group: int = 0
    position: int = 0
    subband: str = ""
    sequences: np.ndarray | None = None

    @property
    def node_count(self) -> int:
        return self.distances.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return self.votes.astype(DTYPE) / self.denominator

    def to_dict(self, with_distances: bool = False) -> dict:
        d = {
            "group": self.group,
            "subband": self.subband,
            "position": self.position,
            "node_count": self.node_count,
            "weights": self.weights.tolist(),
            "nearest": [n.tolist() for n in self.nearest],
        }
        if with_distances:
            d["distance_matrix"] = self.distances.tolist()
        return d

    def to_dot(self, name: str | None = None) -> str:
        """Graphviz digraph; node fill darkens with weight, arrows point to nearest nodes."""
        name = name or f"g{self.group}_{self.subband}_p{self.position}"
        w = self.weights
        top = w.max() if w.size and w.max() > 0 else 1.0
        lines = [f"digraph {name} {{", "  node [style=filled, shape=circle];"]
        for c, wc in enumerate(w):
            level = int(round(255 * (1.0 - wc / top)))
            lines.append(
                f'  n{c} [label="{c}\\n{wc:.3g}", fillcolor="#{level:02x}{level:02x}ff"];'
            )
        for c, targets in enumerate(self.nearest):
            for t in targets:
                lines.append(f'  n{c} -> n{int(t)} [label="{self.distances[c, t]:.3g}"];')
        lines.append("}")
        return "\n".join(lines)


# --- distance kernel ---------------------------------------------------------


def pairwise_distances(seqs: np.ndarray) -> np.ndarray:
    """Euclidean distances between the rows of ``seqs`` (``(..., n, L) -> (..., n, n)``).

    Differences are formed explicitly, so the result is exactly symmetric with
    an exactly zero diagonal.
    """
    seqs = np.asarray(seqs, dtype=DTYPE)
    diff = seqs[..., :, None, :] - seqs[..., None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def series_motif_pair(series, length: int) -> tuple[int, int, float]:
    """Closest pair of distinct length-``length`` subsequences of a 1-D series.

    Returns ``(a, b, distance)`` with ``a < b``; the lexicographically first
    pair wins ties.
    """
    t = np.asarray(series, dtype=DTYPE)
    if t.ndim != 1 or not 1 <= length <= t.size - 1:
        raise DimensionError(f"need a 1-D series longer than {length}, got shape {t.shape}")
    subs = np.lib.stride_tricks.sliding_window_view(t, length)
    dist = pairwise_distances(subs)
    dist[np.tril_indices(len(subs))] = np.inf
    a, b = np.unravel_index(np.argmin(dist), dist.shape)
    return int(a), int(b), float(dist[a, b])


# --- voting ------------------------------------------------------------------


def _lcm_upto(n: int) -> int:
    return reduce(math.lcm, range(1, max(n, 1) + 1), 1)


def vote_batch(seqs: np.ndarray, self_exclusion: bool = True):
    """Vectorised voting over a batch of graphs.

    ``seqs`` is ``(k, n, L)``.  Returns ``(distances (k, n, n), tie_mask
    (k, n, n), votes (k, n), denominator)`` where ``tie_mask[j, c]`` marks the
    nodes that node ``c`` votes for in graph ``j``.
    """
    seqs = np.asarray(seqs, dtype=DTYPE)
    k, n, _ = seqs.shape
    if n < 2:
        raise DegenerateGroupError(f"a motif graph needs >= 2 nodes, got {n}")
    dist = pairwise_distances(seqs)
    cand = dist.copy()
    if self_exclusion:
        idx = np.arange(n)
        cand[:, idx, idx] = np.inf
    nearest = cand == cand.min(axis=2, keepdims=True)
    p = nearest.sum(axis=2)
    denom = _lcm_upto(n - 1 if self_exclusion else n)
    if denom * n < 2**62:
        votes = np.einsum("jcd,jc->jd", nearest.astype(np.int64), denom // p)
    else:
        # python ints keep the split exact once int64 would overflow
        share = np.frompyfunc(lambda q: denom // int(q), 1, 1)(p)
        votes = (nearest.astype(object) * share[:, :, None]).sum(axis=1)
    return dist, nearest, votes, denom


def build_graph(
    seqs: Sequence[Sequence[float]],
    cfg: McgaConfig = McgaConfig(),
    *,
    group: int = 0,
    position: int = 0,
    subband: str = "",
) -> MotifGraph:
    seqs = np.asarray(seqs, dtype=DTYPE)
    if seqs.ndim != 2:
        raise DimensionError(f"expected (nodes, length) sequences, got shape {seqs.shape}")
    if seqs.shape[0] < 2:
        raise DegenerateGroupError(f"a motif graph needs >= 2 nodes, got {seqs.shape[0]}")
    dist, nearest, votes, denom = vote_batch(seqs[None], cfg.self_exclusion)
    return MotifGraph(
        distances=dist[0],
        votes=votes[0],
        denominator=denom,
        nearest=[np.flatnonzero(row) for row in nearest[0]],
        group=group,
        position=position,
        subband=subband,
        sequences=seqs,
    )


def _motif_scale(votes, denom: int, node_count: int, cfg: McgaConfig, total_channels: int | None):
    if cfg.normalization is Normalization.CONVEX_VOTES:
        divisor = node_count
    else:
        divisor = total_channels if total_channels is not None else node_count * cfg.n_groups
    return np.asarray(votes, dtype=DTYPE) / denom / divisor


def extract_motif(
    g: MotifGraph, cfg: McgaConfig = McgaConfig(), total_channels: int | None = None
) -> np.ndarray:
    """Vote-weighted sum of the graph's sequences.

    ``total_channels`` divides the weights by the total channel count (defaulting to
    ``node_count * n_groups``); ``convex_votes`` divides by the vote mass,
    giving a convex combination.
    """
    if g.sequences is None:
        raise ValueError("graph was built without its sequences")
    coef = _motif_scale(g.votes, g.denominator, g.node_count, cfg, total_channels)
    return coef @ g.sequences


# --- tiling ------------------------------------------------------------------


def _pad_to_window(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    return np.pad(plane, ((0, -h % WINDOW), (0, -w % WINDOW)), mode="edge")


def tile_patches(plane) -> tuple[np.ndarray, tuple[int, int]]:
    """Cut a plane into row-major 3x3 tiles flattened to length 9.

    Returns ``(tiles (k, 9), (rows, cols))``.
    """
    plane = as_plane(plane)
    if plane.size == 0:
        raise DimensionError(f"cannot tile an empty plane of shape {plane.shape}")
    p = _pad_to_window(plane)
    rows, cols = p.shape[0] // WINDOW, p.shape[1] // WINDOW
    tiles = p.reshape(rows, WINDOW, cols, WINDOW).transpose(0, 2, 1, 3)
    return tiles.reshape(rows * cols, WINDOW * WINDOW), (rows, cols)


def stitch_motifs(motifs, grid: tuple[int, int], size: tuple[int, int] | None = None) -> np.ndarray:
    """Inverse of :func:`tile_patches`; ``size`` crops away the padding."""
    motifs = np.asarray(motifs, dtype=DTYPE)
    rows, cols = grid
    if motifs.ndim != 2 or motifs.shape != (rows * cols, WINDOW * WINDOW):
        raise DimensionError(
            f"expected {rows * cols} motifs of length 9 for a {rows}x{cols} grid, got {motifs.shape}"
        )
    plane = motifs.reshape(rows, cols, WINDOW, WINDOW).transpose(0, 2, 1, 3)
    plane = plane.reshape(rows * WINDOW, cols * WINDOW)
    if size is not None:
        plane = plane[: size[0], : size[1]]
    return plane


# --- attention ---------------------------------------------------------------


def _plane_motif(stack: np.ndarray, cfg: McgaConfig, total: int, group: int, subband: str, graphs):
    """Motif plane for one ``(n, h, w)`` stack of same-position planes."""
    n, h, w = stack.shape
    tiled = [tile_patches(ch) for ch in stack]
    grid = tiled[0][1]
    seqs = np.stack([t for t, _ in tiled], axis=1)  # (k, n, 9)
    dist, nearest, votes, denom = vote_batch(seqs, cfg.self_exclusion)
    coef = _motif_scale(votes, denom, n, cfg, total)
    motifs = np.einsum("kc,kcl->kl", coef, seqs)
    if graphs is not None:
        for j in range(seqs.shape[0]):
            graphs.append(
                MotifGraph(
                    distances=dist[j],
                    votes=votes[j],
                    denominator=denom,
                    nearest=[np.flatnonzero(row) for row in nearest[j]],
                    group=group,
                    position=j,
                    subband=subband,
                    sequences=seqs[j],
                )
            )
    return stitch_motifs(motifs, grid, (h, w))


def group_motif_plane(
    channels: np.ndarray,
    cfg: McgaConfig,
    total_channels: int,
    group: int = 0,
    graphs: list[MotifGraph] | None = None,
) -> np.ndarray:
    """Spatial motif plane for one group of channels ``(n, H, W)``."""
    if not cfg.wavelet:
        return _plane_motif(channels, cfg, total_channels, group, "spatial", graphs)
    pyramids = [dwt2(ch, cfg.levels) for ch in channels]
    motif_bands = {}
    for b, (name, _) in enumerate(pyramids[0].subbands()):
        stack = np.stack([p.subbands()[b][1] for p in pyramids])
        motif_bands[name] = _plane_motif(stack, cfg, total_channels, group, name, graphs)
    return idwt2(pyramids[0].replace(motif_bands))


def motif_planes(
    f, cfg: McgaConfig = McgaConfig(), graphs: list[MotifGraph] | None = None, threads: int = 1
) -> np.ndarray:
    """One motif plane per group: ``(C, H, W) -> (n_groups, H, W)``."""
    f = as_tensor3(f, "features")
    c = f.shape[0]
    if c % cfg.n_groups:
        raise ConfigError(f"{c} channels are not divisible into {cfg.n_groups} groups")
    size = c // cfg.n_groups
    if size < 2:
        raise DegenerateGroupError(
            f"{cfg.n_groups} groups over {c} channels leaves {size} node per graph; need >= 2"
        )

    def run(g: int):
        sink = [] if graphs is not None else None
        plane = group_motif_plane(f[g * size : (g + 1) * size], cfg, c, g, sink)
        return plane, sink

    results = parallel_map(run, range(cfg.n_groups), threads)
    if graphs is not None:
        for _, sink in results:
            graphs.extend(sink)
    return np.stack([plane for plane, _ in results])


def mcga_apply(
    f, cfg: McgaConfig = McgaConfig(), graphs: list[MotifGraph] | None = None, threads: int = 1
) -> np.ndarray:
    """Motif features: every channel times its group's motif plane."""
    f = as_tensor3(f, "features")
    planes = motif_planes(f, cfg, graphs, threads)
    return f * np.repeat(planes, f.shape[0] // cfg.n_groups, axis=0)


def dump_graphs_json(graphs: Sequence[MotifGraph], with_distances: bool = False) -> str:
    return json.dumps([g.to_dict(with_distances) for g in graphs])


def with_groups(cfg: McgaConfig, n_groups: int) -> McgaConfig:
    return replace(cfg, n_groups=n_groups)
