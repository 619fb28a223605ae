"""Exact conditional inference of hidden spins given a full observed layer.

Sum-product and max-product on the tree, plus a full-enumeration posterior
used as the oracle.  The pairwise factor is theta^{(1 + s s')/2}; the unary
factor at x is E(sigma(x)|s) times the boundary weight z(s, sigma(x)) when x
lies on the outer generation (with the root-degree exponent at depth 0,
mirroring the finite-volume measure).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
from scipy.special import logsumexp

from .model import BilayerConfig, DerivedParams
from .measure import BoundaryLaw, boundary_exponent, CapacityError
from .tree import TreeShape, ball, edges, generation, successors, Vertex

POSTERIOR_LIMIT = 2**22


@dataclass
class InferenceProblem:
    shape: TreeShape
    derived: DerivedParams
    law: BoundaryLaw
    sigma: Dict[Vertex, int]

    def __post_init__(self):
        for x in ball(self.shape):
            if self.sigma.get(x) not in (-1, 1):
                raise ValueError("observed layer not total: vertex %r" % (x,))

    def unary_log_weights(self) -> Dict[Vertex, Dict[int, float]]:
        """log phi_x(s) = log E(sigma(x)|s) + [x outer] * expo * log z(s, sigma(x))."""
        outer = set(generation(self.shape, self.shape.depth))
        expo = boundary_exponent(self.shape)
        out = {}
        for x in ball(self.shape):
            obs = self.sigma[x]
            row = {}
            for s in (-1, 1):
                val = math.log(self.derived.emission_weight(s, obs))
                if x in outer:
                    val += expo * math.log(self.law.z[(s, obs)])
                row[s] = val
            out[x] = row
        return out


@dataclass
class MarginalTable:
    """Per-vertex posterior distribution over the hidden spin."""

    table: Dict[Vertex, Dict[int, float]]

    def prob(self, x: Vertex, s: int) -> float:
        return self.table[x][s]


@dataclass
class PosteriorTable:
    """Full posterior over hidden configurations (enumeration oracle)."""

    vertices: Tuple[Vertex, ...]
    log_probs: np.ndarray  # (2^nv,), normalized; bit b set <=> s(vertices[b]) = +1

    def prob_of(self, hidden: Dict[Vertex, int]) -> float:
        idx = 0
        for b, x in enumerate(self.vertices):
            if hidden[x] == 1:
                idx |= 1 << b
        return float(np.exp(self.log_probs[idx]))

    def vertex_marginal(self, x: Vertex) -> Dict[int, float]:
        b = self.vertices.index(x)
        bit = (np.arange(len(self.log_probs)) >> b) & 1
        p_plus = float(np.exp(logsumexp(self.log_probs[bit == 1])))
        return {1: p_plus, -1: 1.0 - p_plus}

    def argmax(self) -> Dict[Vertex, int]:
        """Maximizer; ties resolved toward +1, then by vertex order."""
        best = float(np.max(self.log_probs))
        ties = np.flatnonzero(self.log_probs >= best - 1e-12)
        # prefer +1 at the earliest vertex: lexicographically largest spin
        # vector in vertex order, i.e. maximal index under bit-reversal
        def rank(idx: int) -> Tuple[int, ...]:
            return tuple((idx >> b) & 1 for b in range(len(self.vertices)))

        winner = max(ties, key=rank)
        return {x: 1 if (winner >> b) & 1 else -1 for b, x in enumerate(self.vertices)}


def exact_posterior(problem: InferenceProblem) -> PosteriorTable:
    """P(s | sigma) by full enumeration of the hidden layer."""
    verts = tuple(ball(problem.shape))
    nv = len(verts)
    if 2**nv > POSTERIOR_LIMIT:
        raise CapacityError("2^%d hidden states exceed the enumeration guard" % nv)
    index = {x: i for i, x in enumerate(verts)}
    idx = np.arange(2**nv, dtype=np.int64)
    bits = ((idx[:, None] >> np.arange(nv)) & 1).astype(np.float64) * 2 - 1

    log_theta = math.log(problem.derived.theta)
    logw = np.zeros(2**nv)
    for x, y in edges(problem.shape):
        logw += 0.5 * log_theta * (1.0 + bits[:, index[x]] * bits[:, index[y]])
    for x, row in problem.unary_log_weights().items():
        mid = 0.5 * (row[1] + row[-1])
        half = 0.5 * (row[1] - row[-1])
        logw += mid + half * bits[:, index[x]]
    return PosteriorTable(vertices=verts, log_probs=logw - logsumexp(logw))


def _levels(shape: TreeShape) -> List[List[Vertex]]:
    return [generation(shape, m) for m in range(shape.depth + 1)]


def bp_marginals(problem: InferenceProblem) -> MarginalTable:
    """Single-vertex posteriors by sum-product message passing (exact on trees)."""
    shape = problem.shape
    theta = problem.derived.theta
    phi = {
        x: {s: math.exp(val) for s, val in row.items()}
        for x, row in problem.unary_log_weights().items()
    }
    pair = {
        (sp, sc): theta ** ((1 + sp * sc) / 2) for sp in (-1, 1) for sc in (-1, 1)
    }
    levels = _levels(shape)

    up: Dict[Vertex, Dict[int, float]] = {}
    for level in reversed(levels[1:]):
        for y in level:
            kids = successors(shape, y) if len(y) < shape.depth else []
            msg = {}
            for sp in (-1, 1):
                total = 0.0
                for sc in (-1, 1):
                    val = pair[(sp, sc)] * phi[y][sc]
                    for child in kids:
                        val *= up[child][sc]
                    total += val
                msg[sp] = total
            norm = msg[1] + msg[-1]
            up[y] = {s: val / norm for s, val in msg.items()}

    down: Dict[Vertex, Dict[int, float]] = {(): {1: 1.0, -1: 1.0}}
    for level in levels[:-1]:
        for x in level:
            kids = successors(shape, x)
            for y in kids:
                msg = {}
                for sc in (-1, 1):
                    total = 0.0
                    for sp in (-1, 1):
                        val = pair[(sp, sc)] * phi[x][sp] * down[x][sp]
                        for sib in kids:
                            if sib != y:
                                val *= up[sib][sp]
                        total += val
                    msg[sc] = total
                norm = msg[1] + msg[-1]
                down[y] = {s: val / norm for s, val in msg.items()}

    table = {}
    for x in ball(shape):
        kids = successors(shape, x) if len(x) < shape.depth else []
        belief = {}
        for s in (-1, 1):
            val = phi[x][s] * down[x][s]
            for child in kids:
                val *= up[child][s]
            belief[s] = val
        norm = belief[1] + belief[-1]
        table[x] = {s: val / norm for s, val in belief.items()}
    return MarginalTable(table=table)


def map_estimate(problem: InferenceProblem) -> Dict[Vertex, int]:
    """Most likely hidden layer by max-product with back-pointers.

    Ties are broken toward s = +1, then by vertex (breadth-first) order.
    """
    shape = problem.shape
    theta = problem.derived.theta
    phi = {
        x: {s: math.exp(val) for s, val in row.items()}
        for x, row in problem.unary_log_weights().items()
    }
    pair = {
        (sp, sc): theta ** ((1 + sp * sc) / 2) for sp in (-1, 1) for sc in (-1, 1)
    }
    levels = _levels(shape)

    up: Dict[Vertex, Dict[int, float]] = {}
    back: Dict[Vertex, Dict[int, int]] = {}
    for level in reversed(levels[1:]):
        for y in level:
            kids = successors(shape, y) if len(y) < shape.depth else []
            msg = {}
            choice = {}
            for sp in (-1, 1):
                best_val = -math.inf
                best_sc = 1
                for sc in (1, -1):  # +1 first so it wins exact ties
                    val = pair[(sp, sc)] * phi[y][sc]
                    for child in kids:
                        val *= up[child][sc]
                    if val > best_val:
                        best_val = val
                        best_sc = sc
                msg[sp] = best_val
                choice[sp] = best_sc
            norm = max(msg[1], msg[-1])
            up[y] = {s: val / norm for s, val in msg.items()}
            back[y] = choice

    root_kids = successors(shape, ()) if shape.depth > 0 else []
    best_val = -math.inf
    best_root = 1
    for s in (1, -1):
        val = phi[()][s]
        for child in root_kids:
            val *= up[child][s]
        if val > best_val:
            best_val = val
            best_root = s
    assignment = {(): best_root}
    for level in levels[1:]:
        for y in level:
            assignment[y] = back[y][assignment[y[:-1]]]
    return assignment


def denoise(problem: InferenceProblem) -> dict:
    """MAP layer, marginals, and the count of vertices where MAP != sigma."""
    hidden = map_estimate(problem)
    marginals = bp_marginals(problem)
    flips = sum(1 for x in ball(problem.shape) if hidden[x] != problem.sigma[x])
    return {"map": hidden, "marginals": marginals, "flips": flips}


def anomaly_scores(
    hidden: Dict[Vertex, int], sigma: Dict[Vertex, int], shape: TreeShape
) -> Tuple[Dict[Tuple[Vertex, Vertex], int], int]:
    """Per-edge mismatch s(x)s(y) - sigma(x)sigma(y) and its total."""
    cfg = BilayerConfig(s=dict(hidden), sigma=dict(sigma))
    cfg.check_total(shape)
    scores = {
        (x, y): hidden[x] * hidden[y] - sigma[x] * sigma[y] for x, y in edges(shape)
    }
    return scores, sum(scores.values())
