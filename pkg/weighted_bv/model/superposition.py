"""
:Title:        WEIGHTED-BV
:Created:      October-2026
:Authors:      weighted_bv developers

Superposition of a derivation by lattice curves. The mass flux of an admissible field is rasterized
on the axis edges of the grid and decomposed greedily into weighted source-to-sink paths and cycles.
"""
import heapq
import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .grid import GridVectorField
from .operators import is_admissible, mu_divergence
from ..utils import InconsistentFluxError, NotAdmissibleError


class CurveKind(str, Enum):
    PATH = "PATH"
    CYCLE = "CYCLE"


@dataclass(eq=False)
class FluxGraph:
    """
    Directed axis edges with non-negative mass flux. The edge of component k at cell j joins j and
    j + e_k, oriented along the sign of the component. Imbalance is outflux - influx per cell.
    """
    measure: object
    tail: np.ndarray
    head: np.ndarray
    flux: np.ndarray
    owner: np.ndarray
    axis: np.ndarray
    sign: np.ndarray
    imbalance: np.ndarray

    @property
    def n_edges(self):
        return self.flux.size

    @property
    def nodes(self):
        """ support cells and the zero-weight cells the flux passes through """
        return np.union1d(self.measure.support_indices, np.union1d(self.tail, self.head))


@dataclass(eq=False)
class Curve:
    kind: CurveKind
    nodes: np.ndarray
    edges: np.ndarray
    weight: float
    spacing: float

    @property
    def length(self):
        return self.spacing * self.edges.size

    @property
    def times(self):
        """ constant speed parametrization over [0, 1] at the nodes """
        return np.linspace(0.0, 1.0, self.nodes.size)


@dataclass(eq=False)
class CurveMeasure:
    curves: list
    residual: np.ndarray
    graph: FluxGraph
    min_weight: float = 0.0
    stuck_edges: list = field(default_factory=list)

    def edge_flux(self):
        """ sum of curve weights per edge """
        total = np.zeros(self.graph.n_edges)
        for curve in self.curves:
            np.add.at(total, curve.edges, curve.weight)
        return total

    def summary(self):
        kinds = [curve.kind for curve in self.curves]
        return {"paths": kinds.count(CurveKind.PATH), "cycles": kinds.count(CurveKind.CYCLE),
                "total_weight": float(sum(curve.weight for curve in self.curves)),
                "residual": float(self.residual.max()) if self.residual.size else 0.0}


def rasterize_flux(v, tol=1e-9):
    """
    Mass flux of an admissible field on the lattice edges

    :param v: vector field, admissible up to tol
    :param tol: admissibility tolerance
    :return graph: flux graph whose imbalance equals div_mu(v) w h^d cellwise
    """
    certificate = is_admissible(v, np.inf, tol)
    if not certificate:
        raise NotAdmissibleError(certificate)
    measure = v.measure
    dim, shape = measure.dim, measure.shape
    active = measure.active_components()
    components = np.where(active, v.components, 0.0)
    flux = measure.weights[..., None] * components * measure.spacing ** (dim - 1)
    flat = np.arange(measure.n_cells).reshape(shape)
    tails, heads, fluxes, owners, axes, signs = [], [], [], [], [], []
    for k in range(dim):
        carrying = active[..., k] & (flux[..., k] != 0)
        cells = flat[carrying]
        values = flux[..., k][carrying]
        neighbours = cells + int(np.prod(shape[k + 1:]))
        forward = values > 0
        tails.append(np.where(forward, cells, neighbours))
        heads.append(np.where(forward, neighbours, cells))
        fluxes.append(np.abs(values))
        owners.append(cells)
        axes.append(np.full(cells.size, k))
        signs.append(np.where(forward, 1, -1))
    tail, head, flux_e = np.concatenate(tails), np.concatenate(heads), np.concatenate(fluxes)
    order = np.lexsort((head, tail))
    tail, head, flux_e = tail[order], head[order], flux_e[order]
    owner, axis, sign = np.concatenate(owners)[order], np.concatenate(axes)[order], np.concatenate(signs)[order]
    n = measure.n_cells
    imbalance = np.bincount(tail, flux_e, minlength=n) - np.bincount(head, flux_e, minlength=n)

    divergence = mu_divergence(v.with_components(components)).div.values.ravel()
    expected = divergence * measure.mass.ravel()
    residual = float(np.abs(imbalance - expected).max())
    scale = max(1.0, float(flux_e.max()) if flux_e.size else 0.0)
    if residual > 1e-10 * scale + tol * measure.cell_volume:
        raise InconsistentFluxError(residual)
    return FluxGraph(measure, tail, head, flux_e, owner, axis, sign, imbalance)


def _widest_paths(starts, residual, out_edges, head, min_weight):
    """ max-bottleneck search from several weighted starts, ties broken by node index """
    best = dict(starts)
    pred = {}
    heap = [(-width, node) for node, width in sorted(starts.items())]
    heapq.heapify(heap)
    done = set()
    while heap:
        width, node = heapq.heappop(heap)
        width = -width
        if node in done:
            continue
        done.add(node)
        for edge in out_edges.get(node, ()):
            if residual[edge] <= min_weight:
                continue
            target = int(head[edge])
            candidate = min(width, residual[edge])
            if candidate > best.get(target, 0.0):
                best[target] = candidate
                pred[target] = edge
                heapq.heappush(heap, (-candidate, target))
    return best, pred


def _trace_back(pred, tail, end):
    """ edges of the search tree from its root to `end` """
    edges = []
    node = end
    while node in pred:
        edge = pred[node]
        edges.append(edge)
        node = int(tail[edge])
    return edges[::-1]


def decompose(g, min_weight=None):
    """
    Greedy decomposition of the edge flux into weighted paths and cycles. Paths are extracted first
    with maximum bottleneck from the sources to the sinks of the imbalance, the remainder as cycles.

    :param g: flux graph
    :param min_weight: smallest extracted weight, 1e-12 of the total flux when None
    :return pi: curve measure with the residual edge flux
    :raise InconsistentFluxError: the imbalance of the graph is not the balance of its edge flux
    """
    n = g.imbalance.size
    balance = np.bincount(g.tail, g.flux, minlength=n) - np.bincount(g.head, g.flux, minlength=n)
    deviation = float(np.abs(balance - g.imbalance).max()) if g.imbalance.size else 0.0
    if deviation > 1e-10 * max(1.0, float(g.flux.max()) if g.n_edges else 0.0):
        raise InconsistentFluxError(deviation)
    residual = g.flux.copy()
    if min_weight is None:
        min_weight = 1e-12 * float(residual.sum())
    excess = g.imbalance.copy()
    out_edges = {}
    for edge in range(g.n_edges):
        out_edges.setdefault(int(g.tail[edge]), []).append(edge)
    curves = []
    spacing = g.measure.spacing

    while True:
        sources = {int(n): float(excess[n]) for n in np.flatnonzero(excess > min_weight)}
        if not sources:
            break
        best, pred = _widest_paths(sources, residual, out_edges, g.head, min_weight)
        sinks = [(min(best[n], -excess[n]), -n) for n in best if excess[n] < -min_weight and n in pred]
        if not sinks:
            logging.warning(f"No sink reachable from {len(sources)} sources, remaining imbalance stays residual")
            break
        width, sink = max(sinks)
        sink = -sink
        if width <= min_weight:
            break
        edges = _trace_back(pred, g.tail, sink)
        residual[edges] -= width
        source = int(g.tail[edges[0]])
        excess[source] -= width
        excess[sink] += width
        nodes = np.array([source] + [int(g.head[e]) for e in edges])
        curves.append(Curve(CurveKind.PATH, nodes, np.array(edges), float(width), spacing))

    stuck = set()
    while True:
        candidates = [e for e in np.flatnonzero(residual > min_weight) if e not in stuck]
        if not candidates:
            break
        first = max(candidates, key=lambda e: (residual[e], -e))
        start, end = int(g.head[first]), int(g.tail[first])
        best, pred = _widest_paths({start: float(residual[first])}, residual, out_edges, g.head, min_weight)
        if end not in pred:
            stuck.add(first)
            continue
        edges = [first] + _trace_back(pred, g.tail, end)
        width = float(min(residual[e] for e in edges))
        residual[edges] -= width
        nodes = np.array([end] + [int(g.head[e]) for e in edges])
        curves.append(Curve(CurveKind.CYCLE, nodes, np.array(edges), width, spacing))

    residual[residual < 0] = 0.0
    logging.info(f"Decomposed {g.n_edges} edges into {len(curves)} curves")
    return CurveMeasure(curves, residual, g, float(min_weight), sorted(int(e) for e in stuck))


def conservation_error(pi):
    """ largest edgewise deviation of curve flux plus residual from the rasterized flux """
    if pi.graph.n_edges == 0:
        return 0.0
    return float(np.abs(pi.edge_flux() + pi.residual - pi.graph.flux).max())


def reconstruct_field(pi):
    """
    Vector field carried by the curves: every edge returns its weight to the component that owns it

    :param pi: curve measure
    :return v: vector field on the support
    """
    graph = pi.graph
    measure = graph.measure
    dim = measure.dim
    flux = np.zeros(measure.n_cells * dim)
    np.add.at(flux, graph.owner * dim + graph.axis, graph.sign * pi.edge_flux())
    weights = np.repeat(measure.weights.ravel(), dim)
    components = np.where(weights > 0, flux / np.where(weights > 0, weights, 1.0), 0.0)
    return GridVectorField(components / measure.spacing ** (dim - 1), measure)


def verify_marginals(pi, b, test_pairs):
    """
    Superposition identities on test pairs (g, f). f and g are linear along every segment, so the curve
    integrals are exact per segment with g taken as the mean of its end values:

        err1 = |sum g b(f) w h^d - sum_curves weight sum_segments (g(tail) + g(head)) / 2 (f(head) - f(tail))|
        err2 = |sum g |b| w h^d - sum_curves weight sum_segments (g(tail) + g(head)) / 2 h|

    :param pi: curve measure
    :param b: derivation of the decomposed field
    :param test_pairs: iterable of grid function pairs (g, f)
    :return err1: largest deviation of the first identity
    :return err2: largest deviation of the second identity
    """
    from .derivations import apply

    graph = pi.graph
    mass = graph.measure.mass
    weights = pi.edge_flux()
    err1, err2 = 0.0, 0.0
    for g, f in test_pairs:
        g_values, f_values = g.values.ravel(), f.values.ravel()
        g_segment = 0.5 * (g_values[graph.tail] + g_values[graph.head])
        lhs1 = float(np.sum(g.values * apply(b, f).values * mass))
        rhs1 = float(np.sum(weights * g_segment * (f_values[graph.head] - f_values[graph.tail])))
        lhs2 = float(np.sum(g.values * b.bound_field.values * mass))
        rhs2 = float(np.sum(weights * g_segment * graph.measure.spacing))
        err1 = max(err1, abs(lhs1 - rhs1))
        err2 = max(err2, abs(lhs2 - rhs2))
    return err1, err2
