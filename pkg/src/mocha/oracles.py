"""Naive reference implementations, written loop-by-loop and independent of the
vectorised code they check.  Used by ``mocha selftest`` and the test suite."""
from __future__ import annotations

import math
from fractions import Fraction


def haar_block(a: float, b: float, c: float, d: float):
    """(LL, HL, LH, HH) of one 2x2 block ``[[a, b], [c, d]]``."""
    return (a + b + c + d) / 2, (a - b + c - d) / 2, (a + b - c - d) / 2, (a - b - c + d) / 2


def euclid(u, v) -> float:
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(u, v)))


def mcg_votes(seqs, self_exclusion: bool = True):
    """Exact rational node weights and nearest-neighbour sets of one graph.

    Every node distributes one vote evenly over all nodes at its minimum
    distance (ties by exact float equality).
    """
    n = len(seqs)
    dist = [[euclid(seqs[i], seqs[j]) for j in range(n)] for i in range(n)]
    weights = [Fraction(0)] * n
    nearest = []
    for i in range(n):
        others = [j for j in range(n) if j != i or not self_exclusion]
        best = min(dist[i][j] for j in others)
        tied = [j for j in others if dist[i][j] == best]
        for j in tied:
            weights[j] += Fraction(1, len(tied))
        nearest.append(tied)
    return weights, nearest, dist


def weighted_motif(seqs, weights, divisor) -> list[float]:
    length = len(seqs[0])
    return [
        float(sum(Fraction(w) * Fraction(s[l]) for w, s in zip(weights, seqs)) / divisor)
        for l in range(length)
    ]


def series_motif(series, length: int):
    """Brute-force closest pair ``(a, b, dist)`` of distinct subsequences, ``a < b``."""
    m = len(series) - length + 1
    best = (math.inf, -1, -1)
    for a in range(m):
        for b in range(a + 1, m):
            d = euclid(series[a : a + length], series[b : b + length])
            if d < best[0]:
                best = (d, a, b)
    return best[1], best[2], best[0]


def group_corr(f_l, f_r, max_disp: int, groups: int, sign: int = -1):
    """Nested-loop group-wise correlation, returned as nested lists ``[d][h][w][g]``."""
    c, h, w = len(f_l), len(f_l[0]), len(f_l[0][0])
    size = c // groups
    out = [[[[0.0] * groups for _ in range(w)] for _ in range(h)] for _ in range(max_disp)]
    for d in range(max_disp):
        for y in range(h):
            for x in range(w):
                xr = x + sign * d
                if not 0 <= xr < w:
                    continue
                for g in range(groups):
                    acc = 0.0
                    for ch in range(g * size, (g + 1) * size):
                        acc += f_l[ch][y][x] * f_r[ch][y][xr]
                    out[d][y][x][g] = acc / size
    return out


def combine(c_g, c_c):
    return [
        [[sum(a * b for a, b in zip(cg_px, cc_px)) for cg_px, cc_px in zip(cg_row, cc_row)]
         for cg_row, cc_row in zip(cg_d, cc_d)]
        for cg_d, cc_d in zip(c_g, c_c)
    ]


def sequence_loss(d0, preds, gt, gamma: float) -> float:
    """Scalar-per-pixel evaluation over flat lists of equal length."""
    def mean(xs):
        return sum(xs) / len(xs)

    def sl1(x):
        return 0.5 * x * x if abs(x) < 1 else abs(x) - 0.5

    n = len(preds)
    loss = mean([sl1(a - g) for a, g in zip(d0, gt)])
    for k, dk in enumerate(preds, start=1):
        loss += gamma ** (n - k) * mean([abs(a - g) for a, g in zip(dk, gt)])
    return loss
