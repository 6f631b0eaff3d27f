"""
:Title:        WEIGHTED-BV
:Created:      October-2026
:Authors:      weighted_bv developers

Tangent bundle of a grid measure. A family of admissible vector fields is generated by regularized
least squares against bump targets; the fiber at a cell is the span of the family evaluated there,
read off a cellwise singular value decomposition.
"""
import itertools
import logging
import time
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg
from tqdm import tqdm

from .grid import DomainFlag, GridVectorField
from .operators import MollifierKernel, flux_matrix, grid_gradient, is_admissible, mu_divergence, project_tangent
from ..utils import SolverDivergedError


@dataclass(frozen=True, eq=False)
class VectorFieldFamily:
    """
    Admissible vector fields with |v| <= 1 and their divergence bounds
    """
    measure: object
    members: list
    div_bounds: np.ndarray
    labels: list

    def __len__(self):
        return len(self.members)


@dataclass(frozen=True, eq=False)
class FiberField:
    """
    Cellwise tangent spaces: ranks, singular values and orthonormal bases (columns) of the fibers
    """
    measure: object
    ranks: np.ndarray
    singular_values: np.ndarray
    bases: np.ndarray
    tau: float

    def projectors(self):
        """ orthogonal projectors onto the fibers, array of shape (*shape, d, d) """
        dim = self.measure.dim
        keep = np.arange(dim) < self.ranks[..., None]
        basis = self.bases * keep[..., None, :]
        return np.einsum("...ic,...jc->...ij", basis, basis)


def bump_centers(shape, stride):
    """ cell indices of the bump lattice, every `stride` cells along each axis """
    axes = []
    for n in shape:
        ticks = np.arange(stride // 2, n, stride)
        axes.append(ticks if ticks.size else np.array([n // 2]))
    return [tuple(int(i) for i in c) for c in itertools.product(*axes)]


def _normal_matrix(measure, variables, div_penalty):
    """ normal equations of ||T v||^2 + lambda ||div v||^2 + ||v - t||^2, all in L^2(mu) scaling """
    weights = measure.weights.ravel()
    support = measure.support.ravel()
    volume = measure.cell_volume
    flux = flux_matrix(measure)[:, variables]
    mean_weight = weights[support].mean()
    tangency = flux[~support] * np.sqrt(volume / mean_weight)
    divergence = sparse.diags(np.sqrt(div_penalty * volume / weights[support])) @ flux[support]
    fidelity = weights[variables // measure.dim] * volume
    normal = tangency.T @ tangency + divergence.T @ divergence + sparse.diags(fidelity)
    return normal.tocsc(), fidelity


def generate_family(measure, bump_radius_cells=3.0, stride_cells=4, div_penalty=1.0, method="direct",
                    max_iterations=5000, tol=1e-9):
    """
    Generates the admissible vector field family spanning the tangent bundle

    :param measure: grid measure
    :param bump_radius_cells: radius of the bump targets in cells
    :param stride_cells: spacing of the bump lattice in cells
    :param div_penalty: weight lambda of the divergence penalty
    :param method: "direct" (sparse factorization) or "cg" (conjugate gradients with an iteration cap)
    :param max_iterations: iteration cap of the conjugate gradient solve
    :param tol: admissibility tolerance of the members
    :return family: vector field family
    """
    start = time.perf_counter()
    dim = measure.dim
    active = measure.active_components().ravel()
    variables = np.flatnonzero(active)
    members, bounds, labels = [], [], []
    if variables.size == 0:
        logging.info("Measure has no flux-carrying components, the tangent family is empty")
        return VectorFieldFamily(measure, members, np.zeros(0), labels)

    normal, fidelity = _normal_matrix(measure, variables, div_penalty)
    if method == "direct":
        solve = splinalg.factorized(normal)
    else:
        def solve(rhs):
            solution, info = splinalg.cg(normal, rhs, rtol=1e-12, maxiter=max_iterations)
            if info != 0:
                raise SolverDivergedError(f"conjugate gradients returned {info} after {max_iterations} iterations")
            return solution

    centers = measure.centers
    cells = variables // dim
    axes = variables % dim
    radius = bump_radius_cells * measure.spacing
    targets = [(k, c) for c in bump_centers(measure.shape, stride_cells) for k in range(dim)]
    for axis, center in tqdm(targets, desc="tangent family", disable=None):
        distance = np.linalg.norm(centers - centers[center], axis=-1).ravel()
        target = np.where(axes == axis, MollifierKernel.profile(distance[cells] / radius), 0.0)
        if not np.any(target > 0):
            continue
        solution = np.zeros(measure.n_cells * dim)
        solution[variables] = solve(fidelity * target)
        member = project_tangent(GridVectorField(solution, measure))
        sup = member.sup_norm()
        if sup == 0:
            continue
        member = member.scaled(1.0 / sup)
        bound = float(np.abs(mu_divergence(member).div.values).max())
        certificate = is_admissible(member, bound, tol)
        assert certificate, f"Family member for axis {axis} at {center} is not admissible: {certificate}"
        members.append(member)
        bounds.append(bound)
        labels.append((axis, center))
    logging.info(f"Generated {len(members)} admissible fields in {time.perf_counter() - start:.2f} seconds")
    return VectorFieldFamily(measure, members, np.array(bounds), labels)


def compute_fibers(family, tau=1e-6):
    """
    Fibers of the tangent bundle from the family: at every support cell the singular value
    decomposition of [v^1(x), ..., v^m(x)]; the rank counts singular values above tau times the
    leading singular value over all cells

    :param family: vector field family
    :param tau: relative rank threshold
    :return fibers: fiber field
    """
    measure = family.measure
    dim = measure.dim
    ranks = np.zeros(measure.shape, dtype=int)
    singular_values = np.zeros((*measure.shape, dim))
    bases = np.zeros((*measure.shape, dim, dim))
    bases[...] = np.eye(dim)
    if len(family) == 0:
        return FiberField(measure, ranks, singular_values, bases, tau)

    stack = np.stack([member.components for member in family.members], axis=-1)
    support = measure.support
    u, s, _ = np.linalg.svd(stack[support], full_matrices=False)
    # deterministic signs: largest entry of every basis vector is positive
    pivot = np.take_along_axis(u, np.abs(u).argmax(axis=-2)[..., None, :], axis=-2)
    u = u * np.where(pivot < 0, -1.0, 1.0)
    leading = s.max()
    if leading > 0:
        ranks[support] = (s > tau * leading).sum(axis=-1)
    width = s.shape[-1]
    singular_values[support, :width] = s
    bases[support, :, :width] = u
    logging.info(f"Fiber ranks: {np.bincount(ranks[support], minlength=dim + 1).tolist()} cells of rank 0..{dim}")
    return FiberField(measure, ranks, singular_values, bases, tau)


def tangential_gradient(f, fibers):
    """
    Projection of the grid gradient onto the fibers, defined on the support

    :param f: grid function
    :param fibers: fiber field of the measure
    :return gradient: vector field on the support
    """
    gradient = grid_gradient(f).components
    projected = np.einsum("...ij,...j->...i", fibers.projectors(), gradient)
    return GridVectorField(projected, f.measure, DomainFlag.SUPPORT_ONLY)


def leibniz_check(f, g, fibers):
    """
    Largest cellwise norm of grad_mu(fg) - (g grad_mu f + f grad_mu g) on the support

    :param f: grid function
    :param g: grid function
    :param fibers: fiber field
    :return residual: float
    """
    product = tangential_gradient(f * g, fibers).components
    expansion = (g.values[..., None] * tangential_gradient(f, fibers).components
                 + f.values[..., None] * tangential_gradient(g, fibers).components)
    residual = np.linalg.norm(product - expansion, axis=-1)[f.measure.support]
    return float(residual.max()) if residual.size else 0.0


def fiber_angle(fibers, direction):
    """
    Angle in degrees between a direction and the leading basis vector of each fiber

    :param fibers: fiber field
    :param direction: unit vector
    :return angles: array of the grid shape, nan on cells of rank 0
    """
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    cosine = np.abs(np.einsum("...i,i->...", fibers.bases[..., :, 0], direction))
    angles = np.degrees(np.arccos(np.clip(cosine, 0.0, 1.0)))
    return np.where(fibers.ranks > 0, angles, np.nan)
