"""
:Title:        WEIGHTED-BV
:Created:      October-2026
:Authors:      weighted_bv developers

Total variation of a grid function with respect to a weighted measure, in four formulations:
the dual supremum over admissible vector fields (DUAL), the same supremum read on derivations
(DERIVATION), and the relaxations of the integrated asymptotic Lipschitz constant (RELAX_LIP) and
of the integrated gradient norm of smooth approximations (RELAX_SMOOTH).
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy import ndimage, sparse
from tqdm import tqdm

from .derivations import phi
from .grid import GridVectorField, box_mask
from .operators import asymptotic_lipschitz, flux_matrix, grid_gradient, mollify, tangency_rows
from .solvers import ConicProgram, PrimalDualSolver
from ..utils import EmptyRegionError


class TVFormulation(str, Enum):
    DUAL = "DUAL"
    DERIVATION = "DERIVATION"
    RELAX_LIP = "RELAX_LIP"
    RELAX_SMOOTH = "RELAX_SMOOTH"


@dataclass
class TVReport:
    formulation: TVFormulation
    value: float
    converged: bool
    upper_bound: Optional[float] = None
    gap: Optional[float] = None
    iterations: int = 0
    M: Optional[float] = None
    trace: list = field(default_factory=list)
    vector_field: Optional[GridVectorField] = None
    warm_start: Optional[np.ndarray] = field(default=None, repr=False)

    def summary(self):
        """ json-ready summary """
        return {"formulation": self.formulation.value, "value": self.value, "converged": self.converged,
                "upper_bound": self.upper_bound, "gap": self.gap, "iterations": self.iterations, "M": self.M,
                "trace": self.trace}


@dataclass(frozen=True)
class OpenRegion:
    """
    Union of boxes of cells (half-open index ranges per axis); fields on the region vanish outside
    the region eroded by `margin` cells
    """
    boxes: tuple
    margin: int = 1

    def mask(self, measure):
        mask = np.zeros(measure.shape, dtype=bool)
        for box in self.boxes:
            mask |= box_mask(measure.shape, box)
        return mask

    def eroded(self, measure):
        return erode(self.mask(measure), self.margin)


def erode(mask, margin):
    """ cells at Chebyshev distance more than `margin` cells from the complement, the grid edge included """
    if margin <= 0:
        return mask.copy()
    structure = ndimage.generate_binary_structure(mask.ndim, mask.ndim)
    return ndimage.binary_erosion(mask, structure=structure, iterations=margin, border_value=0)


def dilate_box(box, cells, shape):
    return tuple((max(lo - cells, 0), min(hi + cells, n)) for (lo, hi), n in zip(box, shape))


def edge_window(measure, reach):
    """
    Open box of the cells whose stencil, a forward neighbour and a kernel of `reach` cells around it,
    stays inside the grid

    :param measure: grid measure
    :param reach: kernel reach in cells
    :return region: open region without margin, None when the grid is too small
    """
    box = tuple((reach, n - reach - 1) for n in measure.shape)
    if any(hi <= lo for lo, hi in box):
        return None
    return OpenRegion((box,), margin=0)


@dataclass(eq=False)
class DualProgram:
    program: ConicProgram
    variables: np.ndarray
    measure: object

    def to_field(self, x):
        components = np.zeros(self.measure.n_cells * self.measure.dim)
        components[self.variables] = x
        return GridVectorField(components, self.measure)


def dual_program(f, M, cell_mask=None):
    """
    Assembles the dual total variation as a conic program over the flux-carrying components

    maximize sum_i f_i div(v)_i w_i h^d  subject to  |v_i| <= 1, tangency, |div v| <= M

    Components pinned to zero by a single-variable tangency row are removed beforehand.

    :param f: grid function
    :param M: divergence bound
    :param cell_mask: optional mask of cells where the field may be nonzero
    :return program: dual program with the variable map
    """
    measure = f.measure
    dim = measure.dim
    active = measure.active_components()
    if cell_mask is not None:
        active = active & cell_mask[..., None]
    variables = np.flatnonzero(active.ravel())

    row_vars, heads, _ = tangency_rows(measure)
    kept = np.isin(row_vars, variables)
    row_vars, heads = row_vars[kept], heads[kept]
    counts = np.bincount(heads, minlength=measure.n_cells)
    pinned = row_vars[counts[heads] == 1]
    variables = np.setdiff1d(variables, pinned)

    matrix = flux_matrix(measure)[:, variables].tocsr()
    support = measure.support.ravel()
    weights = measure.weights.ravel()
    objective = -measure.cell_volume * (matrix[support].T @ f.values.ravel()[support])

    eq_matrix = matrix[~support]
    eq_matrix = eq_matrix[np.diff(eq_matrix.indptr) > 0]
    box_matrix = sparse.diags(1.0 / weights[support]) @ matrix[support]
    box_matrix = box_matrix.tocsr()
    box_matrix = box_matrix[np.diff(box_matrix.indptr) > 0]
    _, groups = np.unique(variables // dim, return_inverse=True)

    row_norms = np.asarray(eq_matrix.multiply(eq_matrix).sum(axis=1)).ravel()

    def project_eq(x):
        if eq_matrix.shape[0] == 0:
            return x.copy()
        return x - eq_matrix.T @ ((eq_matrix @ x) / row_norms)

    program = ConicProgram(objective, groups, eq_matrix, box_matrix, np.full(box_matrix.shape[0], float(M)), project_eq)
    return DualProgram(program, variables, measure)


def _solve_dual(f, M, cell_mask=None, gap_tol=1e-6, solver_options=None, warm_start=None):
    dual = dual_program(f, M, cell_mask)
    solver = PrimalDualSolver(dual.program, gap_tol=gap_tol, **(solver_options or {}))
    result = solver.solve(warm_start)
    return TVReport(TVFormulation.DUAL, result.value, result.converged, result.upper_bound, result.gap,
                    result.iterations, float(M), vector_field=dual.to_field(result.x), warm_start=result.x)


def tv_dual(f, M, gap_tol=1e-6, solver_options=None, warm_start=None):
    """
    Dual total variation: sup of sum f div(v) w h^d over admissible fields with |div v| <= M

    :param f: grid function
    :param M: divergence bound
    :param gap_tol: relative gap tolerance of the solver
    :param solver_options: keyword arguments of the primal-dual solver
    :param warm_start: optional reduced primal point of an earlier solve of the same program
    :return report: certified value (the best feasible objective), bracket and the optimal field
    """
    return _solve_dual(f, M, None, gap_tol, solver_options, warm_start)


def tv_localized(f, M, region, gap_tol=1e-6, solver_options=None):
    """
    Dual total variation on an open region: fields vanish outside the region eroded by its margin

    :param f: grid function
    :param M: divergence bound
    :param region: open region
    :return report: TV report
    """
    measure = f.measure
    cells = region.eroded(measure)
    if not np.any(cells & measure.support):
        raise EmptyRegionError(region.margin)
    return _solve_dual(f, M, cells, gap_tol, solver_options)


def tv_measure_on_box(f, M, box, shrink_schedule=(4, 2, 1), gap_tol=1e-6, solver_options=None):
    """
    |D_mu f|(B) as the infimum of the localized variation over neighbourhoods of the box; the
    neighbourhoods are the box dilated by the cells of the shrink schedule

    :param f: grid function
    :param M: divergence bound
    :param box: half-open index ranges per axis
    :param shrink_schedule: decreasing dilations in cells
    :return value: stabilized infimum
    :return trace: list of (dilation, value)
    """
    measure = f.measure
    whole = all(lo <= 0 and hi >= n for (lo, hi), n in zip(box, measure.shape))
    if whole:
        report = tv_dual(f, M, gap_tol, solver_options)
        return report.value, [(0, report.value)]
    trace = []
    for cells in shrink_schedule:
        region = OpenRegion((dilate_box(box, cells, measure.shape),), margin=1)
        report = tv_localized(f, M, region, gap_tol, solver_options)
        trace.append((int(cells), report.value))
        logging.info(f"Box {box} dilated by {cells} cells: localized variation {report.value:.8g}")
    return min(value for _, value in trace), trace


def bv_membership(f, M_schedule, stab_tol=1e-2, gap_tol=1e-6, solver_options=None):
    """
    Sweeps the divergence bound; f is declared of bounded variation when the dual value stabilizes

    :param f: grid function
    :param M_schedule: increasing divergence bounds
    :param stab_tol: relative increment of the last two values
    :return member: whether the sweep stabilized
    :return report: report of the largest bound, the sweep in its trace
    """
    report, warm_start, trace = None, None, []
    for M in tqdm(M_schedule, desc="divergence bound sweep", disable=None):
        report = tv_dual(f, M, gap_tol, solver_options, warm_start)
        warm_start = report.warm_start
        trace.append({"M": float(M), "value": report.value, "gap": report.gap, "converged": report.converged})
    report.trace = trace
    if len(trace) < 2:
        return report.converged, report
    previous, last = trace[-2]["value"], trace[-1]["value"]
    member = (last - previous) <= stab_tol * max(1.0, abs(last))
    logging.info(f"Divergence bound sweep {'stabilized' if member else 'did not stabilize'} at {last:.8g}")
    return bool(member), report


def tv_derivation(f, M, fibers, dual_report=None, gap_tol=1e-6, solver_options=None):
    """
    Total variation as a supremum over derivations with |b| <= 1 and |div b| <= M: the optimal
    field is carried to a derivation and the value is read on the derivation side

    :param f: grid function
    :param M: divergence bound
    :param fibers: fiber field of the measure
    :param dual_report: optional DUAL report for the same bound
    :return report: TV report of the DERIVATION formulation
    """
    if dual_report is None:
        dual_report = tv_dual(f, M, gap_tol, solver_options)
    derivation = phi(dual_report.vector_field, fibers)
    value = float(np.sum(f.values * derivation.divergence.values * f.measure.mass))
    return TVReport(TVFormulation.DERIVATION, value, dual_report.converged, dual_report.upper_bound,
                    dual_report.gap, dual_report.iterations, float(M), vector_field=dual_report.vector_field)


def tv_relaxed(f, mode, eps_schedule, trace_tol=1e-2, region=None):
    """
    Relaxed total variation along a mollification schedule. The value is the minimum over the last
    third of the trace; it is converged when the tail varies by at most trace_tol (1 + value)

    :param f: grid function
    :param mode: RELAX_LIP or RELAX_SMOOTH
    :param eps_schedule: strictly decreasing mollification scales, at least h
    :param trace_tol: relative tolerance of the tail
    :param region: optional open region restricting the integral
    :return report: TV report with the trace (eps, value, L1 distance to f)
    """
    mode = TVFormulation(mode)
    assert mode in (TVFormulation.RELAX_LIP, TVFormulation.RELAX_SMOOTH), f"{mode} is not a relaxed formulation"
    assert all(a > b for a, b in zip(eps_schedule, eps_schedule[1:])), f"Schedule {eps_schedule} is not decreasing"
    measure = f.measure
    mass = measure.mass
    if region is not None:
        mass = np.where(region.mask(measure), mass, 0.0)
    trace = []
    for eps in eps_schedule:
        smooth = mollify(f, eps)
        if mode is TVFormulation.RELAX_LIP:
            integrand = asymptotic_lipschitz(smooth).values
        else:
            integrand = grid_gradient(smooth).norms()
        value = float(np.sum(integrand * mass))
        distance = float(np.sum(np.abs(smooth.values - f.values) * mass))
        trace.append({"eps": float(eps), "value": value, "l1_distance": distance})
    tail = [entry["value"] for entry in trace[-max(1, math.ceil(len(trace) / 3)):]]
    value = min(tail)
    converged = (max(tail) - value) <= trace_tol * (1 + abs(value))
    return TVReport(mode, value, bool(converged), trace=trace)
