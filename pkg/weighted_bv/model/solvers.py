"""
:Title:        WEIGHTED-BV
:Created:      October-2026
:Authors:      weighted_bv developers

First-order primal-dual splitting for the conic programs behind the dual total variation:

    maximize c.x  subject to  |x_g| <= 1 for every group g,  E x = 0,  |B x| <= u

Every check reports a certified bracket: the lower bound comes from a feasible point obtained by
projecting and rescaling the iterate, the upper bound from weak duality at the dual iterate.
"""
import logging
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import psutil
from scipy import sparse

from ..utils import NotConvergedWarning


@dataclass(eq=False)
class ConicProgram:
    """
    Data of a ball-constrained linear program. Groups are integer ids 0..n_groups-1, one per variable.
    """
    objective: np.ndarray
    groups: np.ndarray
    eq_matrix: sparse.csr_matrix
    box_matrix: sparse.csr_matrix
    box_bounds: np.ndarray
    project_eq: Optional[Callable] = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        self.groups = np.asarray(self.groups, dtype=int)
        n = self.objective.size
        assert self.groups.size == n, f"Expected {n} group ids, got {self.groups.size}"
        assert self.eq_matrix.shape[1] == n and self.box_matrix.shape[1] == n, "Constraint matrices do not match the variables"
        assert self.box_matrix.shape[0] == len(self.box_bounds), "One bound per box row is required"
        assert np.all(np.asarray(self.box_bounds) >= 0), "Box bounds must be non-negative"
        self.box_bounds = np.asarray(self.box_bounds, dtype=float)

    @property
    def n_variables(self):
        return self.objective.size

    @property
    def n_groups(self):
        return int(self.groups.max()) + 1 if self.groups.size else 0

    def group_norms(self, x):
        return np.sqrt(np.bincount(self.groups, weights=x ** 2, minlength=self.n_groups))

    def project_ball(self, x):
        norms = self.group_norms(x)
        return x / np.maximum(1.0, norms)[self.groups]

    def feasible_point(self, x):
        """
        Feasible point near x: exact projection onto E x = 0, then a rescaling into the balls and the box

        :param x: primal point
        :return point: feasible point
        """
        point = self.project_eq(x) if self.project_eq is not None else x.copy()
        scale = 1.0
        norms = self.group_norms(point)
        if norms.size and norms.max() > 1:
            scale = 1.0 / norms.max()
        residual = np.abs(self.box_matrix @ point)
        active = residual > 0
        if np.any(active):
            scale = min(scale, float(np.min(self.box_bounds[active] / residual[active])))
        return point * scale

    def lower_bound(self, x):
        point = self.feasible_point(x)
        value = float(self.objective @ point)
        if value < 0:
            return 0.0, np.zeros_like(point)
        return value, point

    def upper_bound(self, y_eq, y_box):
        """ weak duality: c.x <= sum_g |c - K^T y|_g + u.|y_box| for every feasible x """
        reduced = self.objective - self.eq_matrix.T @ y_eq - self.box_matrix.T @ y_box
        return float(self.group_norms(reduced).sum() + self.box_bounds @ np.abs(y_box))


@dataclass
class SolverResult:
    value: float
    upper_bound: float
    gap: float
    iterations: int
    converged: bool
    x: np.ndarray
    history: list = field(default_factory=list)


def _row_normalized(matrix, bounds=None):
    if matrix.shape[0] == 0:
        return matrix.tocsr(), bounds
    norms = np.sqrt(np.asarray(matrix.multiply(matrix).sum(axis=1)).ravel())
    keep = norms > 0
    scale = sparse.diags(1.0 / norms[keep])
    scaled = (scale @ matrix[keep]).tocsr()
    if bounds is None:
        return scaled, None
    return scaled, bounds[keep] / norms[keep]


def power_method(operator, n_iterations=100):
    """
    Estimate of the spectral norm of a sparse operator

    :param operator: sparse matrix K
    :param n_iterations: number of iterations on K^T K
    :return norm: estimate of ||K||_2
    """
    x = np.linspace(1.0, 2.0, operator.shape[1])
    x /= np.linalg.norm(x)
    norm = 0.0
    for _ in range(n_iterations):
        y = operator.T @ (operator @ x)
        norm = np.linalg.norm(y)
        if norm == 0:
            return 0.0
        x = y / norm
    return float(np.sqrt(norm))


class PrimalDualSolver:
    """
    Chambolle-Pock iteration with ergodic averaging, adaptive restarts and certified gaps
    """

    def __init__(self, program, gap_tol=1e-6, max_iterations=100000, check_every=50, power_iterations=100,
                 theta=1.0, restart_factor=0.5):
        """
        :param program: conic program
        :param gap_tol: relative gap tolerance, converged iff gap <= gap_tol (1 + value)
        :param max_iterations: iteration cap
        :param check_every: iterations between certificate evaluations
        :param power_iterations: iterations of the operator norm estimate
        :param theta: extrapolation parameter
        :param restart_factor: restart from the averaged iterate once its gap dropped below this fraction
        """
        self.program = program
        self.gap_tol = gap_tol
        self.max_iterations = int(max_iterations)
        self.check_every = int(check_every)
        self.power_iterations = power_iterations
        self.theta = theta
        self.restart_factor = restart_factor

        # row normalization leaves the feasible set unchanged
        self.eq_matrix, _ = _row_normalized(program.eq_matrix)
        self.box_matrix, self.box_bounds = _row_normalized(program.box_matrix, program.box_bounds)
        self.operator = sparse.vstack([self.eq_matrix, self.box_matrix]).tocsr()
        self.n_eq = self.eq_matrix.shape[0]

    def _certificate(self, x, y):
        lower, point = self.program.lower_bound(x)
        reduced = self.program.objective - self.operator.T @ y
        upper = float(self.program.group_norms(reduced).sum() + self.box_bounds @ np.abs(y[self.n_eq:]))
        return lower, upper, point

    def solve(self, x0=None):
        """
        Runs the iteration

        :param x0: optional warm start, its feasible point seeds the lower bound
        :return result: solver result with the best certified bracket
        """
        program = self.program
        n = program.n_variables
        start = time.perf_counter()
        if n == 0 or not np.any(program.objective):
            logging.info("Objective vanishes on the feasible variables, value 0 is exact")
            return SolverResult(0.0, 0.0, 0.0, 0, True, np.zeros(n))

        norm = power_method(self.operator, self.power_iterations) if self.operator.shape[0] else 0.0
        step = 0.99 / (1.02 * norm) if norm > 0 else 1.0
        tau = sigma = step

        x = program.project_ball(np.zeros(n) if x0 is None else np.asarray(x0, dtype=float))
        y = np.zeros(self.operator.shape[0])
        best_lower, best_point = program.lower_bound(x)
        best_upper = np.inf
        x_sum, y_sum, n_sum = np.zeros(n), np.zeros_like(y), 0
        gap_at_restart = np.inf
        history = []
        converged = False
        iteration = 0
        bounds = self.box_bounds

        while iteration < self.max_iterations:
            iteration += 1
            x_new = program.project_ball(x - tau * (self.operator.T @ y - program.objective))
            x_bar = x_new + self.theta * (x_new - x)
            y_tilde = y + sigma * (self.operator @ x_bar)
            y_new = y_tilde.copy()
            box = y_tilde[self.n_eq:]
            y_new[self.n_eq:] = box - sigma * np.clip(box / sigma, -bounds, bounds)
            x, y = x_new, y_new
            x_sum += x
            y_sum += y
            n_sum += 1

            if iteration % self.check_every and iteration != self.max_iterations:
                continue
            x_avg, y_avg = x_sum / n_sum, y_sum / n_sum
            lower, upper, point = self._certificate(x, y)
            lower_avg, upper_avg, point_avg = self._certificate(x_avg, y_avg)
            if lower_avg > lower:
                lower, point = lower_avg, point_avg
            if lower > best_lower:
                best_lower, best_point = lower, point
            best_upper = min(best_upper, upper, upper_avg)
            gap = best_upper - best_lower
            history.append((iteration, best_lower, best_upper))
            if gap <= self.gap_tol * (1 + abs(best_lower)):
                converged = True
                break
            # restart on sufficient decay of the averaged gap
            gap_avg = upper_avg - lower_avg
            if gap_avg <= self.restart_factor * gap_at_restart:
                gap_at_restart = gap_avg
                x, y = x_avg, y_avg
                x_sum, y_sum, n_sum = np.zeros(n), np.zeros_like(y), 0

        gap = best_upper - best_lower
        memory = psutil.Process().memory_info().rss / 1024 ** 2
        logging.info(f"Primal-dual solve: value {best_lower:.8g}, gap {gap:.3e} after {iteration} iterations "
                     f"({time.perf_counter() - start:.2f} seconds, {memory:.0f} MB)")
        if not converged:
            warnings.warn(f"Primal-dual solve stopped at the iteration cap {self.max_iterations} with gap {gap:.3e}",
                          NotConvergedWarning)
        return SolverResult(best_lower, best_upper, gap, iteration, converged, best_point, history)
