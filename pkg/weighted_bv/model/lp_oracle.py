"""
:Title:        WEIGHTED-BV
:Created:      October-2026
:Authors:      weighted_bv developers

Dense linear programming oracle for small dual total variation instances. In two dimensions the unit
balls are replaced by circumscribed polygons refined with cutting planes until the bracket is narrower
than the gap tolerance; in one dimension they are exact intervals. The programs are built with
linopy and solved with HiGHS.
"""
import logging
from dataclasses import dataclass

import linopy as lp
import numpy as np
import pandas as pd
import xarray as xr
from scipy import sparse

from .total_variation import dual_program
from ..utils import SolverDivergedError


@dataclass(frozen=True)
class OracleBounds:
    lower: float
    upper: float
    rounds: int = 0


def linexpr_from_sparse(matrix, variables, model, dim="row"):
    """
    Linear expression with one entry per matrix row, built directly from coefficients and variable labels

    :param matrix: sparse matrix over the flat variables
    :param variables: linopy variable holding the flat variables
    :param model: linopy model
    :param dim: name of the row dimension
    :return expression: linopy linear expression
    """
    matrix = sparse.csr_matrix(matrix)
    n_rows = matrix.shape[0]
    width = max(int(np.diff(matrix.indptr).max()) if n_rows else 1, 1)
    labels = variables.labels.data.ravel()
    coeffs = np.zeros((n_rows, width))
    terms = np.full((n_rows, width), -1, dtype=int)
    for row in range(n_rows):
        start, stop = matrix.indptr[row], matrix.indptr[row + 1]
        coeffs[row, :stop - start] = matrix.data[start:stop]
        terms[row, :stop - start] = labels[matrix.indices[start:stop]]
    coords = {dim: pd.RangeIndex(n_rows, name=dim)}
    xr_ds = xr.Dataset({"coeffs": xr.DataArray(coeffs, coords=coords, dims=[dim, "_term"]),
                        "vars": xr.DataArray(terms, coords=coords, dims=[dim, "_term"])})
    return lp.LinearExpression(xr_ds, model)


def _rhs(values, dim):
    values = np.atleast_1d(np.asarray(values, dtype=float))
    return xr.DataArray(values, coords={dim: pd.RangeIndex(values.size, name=dim)}, dims=[dim])


class DualOracle:
    """
    Outer polygonal relaxation of the dual program, refined by cutting planes: every round adds the
    tangent facet at the direction of each group outside the unit ball. The relaxation gives the upper
    bound, its solution scaled back into the unit balls the lower bound.
    """

    def __init__(self, f, M, facets=64, solver_name="highs", max_cells=100):
        """
        :param f: grid function
        :param M: divergence bound
        :param facets: number of initial polygon facets in two dimensions
        :param solver_name: linopy solver name
        :param max_cells: largest number of support cells accepted
        """
        measure = f.measure
        assert measure.dim <= 2, f"The dense oracle handles one and two dimensions, got {measure.dim}"
        n_support = int(measure.support.sum())
        assert n_support <= max_cells, f"The dense oracle handles at most {max_cells} support cells, got {n_support}"
        self.dual = dual_program(f, M)
        self.dim = measure.dim
        self.facets = facets
        self.solver_name = solver_name
        angles = 2 * np.pi * np.arange(facets) / facets
        n_groups = self.dual.program.n_groups
        self.cuts = [(group, angle) for group in range(n_groups) for angle in angles] if self.dim == 2 else []

    def construct_optimization_problem(self):
        """
        :return model: linopy model of the current outer relaxation
        """
        program = self.dual.program
        model = lp.Model()
        n = program.n_variables
        variables = model.add_variables(lower=-1.0, upper=1.0, coords=[pd.RangeIndex(n, name="var")], name="v")
        if program.eq_matrix.shape[0]:
            model.add_constraints(linexpr_from_sparse(program.eq_matrix, variables, model, "eq"), "=",
                                  _rhs(np.zeros(program.eq_matrix.shape[0]), "eq"), name="tangency")
        if program.box_matrix.shape[0]:
            expression = linexpr_from_sparse(program.box_matrix, variables, model, "div")
            model.add_constraints(expression, "<=", _rhs(program.box_bounds, "div"), name="divergence_upper")
            expression = linexpr_from_sparse(program.box_matrix, variables, model, "div")
            model.add_constraints(expression, ">=", _rhs(-program.box_bounds, "div"), name="divergence_lower")
        if self.cuts:
            polygon = self._cut_matrix()
            model.add_constraints(linexpr_from_sparse(polygon, variables, model, "facet"), "<=",
                                  _rhs(np.ones(polygon.shape[0]), "facet"), name="unit_ball")
        objective = linexpr_from_sparse(sparse.csr_matrix(-program.objective[None, :]), variables, model, "objective")
        model.add_objective(objective.sum())
        return model

    def _cut_matrix(self):
        """ rows a . v_g for every cut (g, angle) with a = (cos angle, sin angle) """
        program = self.dual.program
        component = self.dual.variables % 2
        members = [np.flatnonzero(program.groups == group) for group in range(program.n_groups)]
        rows, cols, data = [], [], []
        for row, (group, angle) in enumerate(self.cuts):
            for var in members[group]:
                rows.append(row)
                cols.append(var)
                data.append(np.cos(angle) if component[var] == 0 else np.sin(angle))
        return sparse.csr_matrix((data, (rows, cols)), shape=(len(self.cuts), program.n_variables))

    def _group_components(self, solution):
        """ components (v_1, v_2) of every group of the solution """
        program = self.dual.program
        component = self.dual.variables % 2
        first = np.bincount(program.groups, solution * (component == 0), minlength=program.n_groups)
        second = np.bincount(program.groups, solution * (component == 1), minlength=program.n_groups)
        return first, second

    def _solve_relaxation(self):
        model = self.construct_optimization_problem()
        # disable logger temporarily
        logging.disable(logging.WARNING)
        model.solve(solver_name=self.solver_name)
        # enable logger
        logging.disable(logging.NOTSET)
        if model.termination_condition != "optimal":
            raise SolverDivergedError(f"the dense oracle finished with {model.termination_condition}")
        return model.solution["v"].values

    def solve(self, gap_tol=1e-6, max_rounds=40):
        """
        Solves the outer relaxation and adds cuts until the bracket is narrower than gap_tol (1 + upper)

        :param gap_tol: relative width of the bracket
        :param max_rounds: largest number of solves
        :return bounds: oracle bounds, equal in one dimension
        """
        program = self.dual.program
        if program.n_variables == 0 or not np.any(program.objective):
            return OracleBounds(0.0, 0.0)
        logging.info(f"\n--- Solve dense oracle using {self.solver_name} ---\n")
        for rounds in range(1, max_rounds + 1):
            solution = self._solve_relaxation()
            upper = float(program.objective @ solution)
            if self.dim == 1:
                return OracleBounds(upper, upper, rounds)
            first, second = self._group_components(solution)
            norms = np.hypot(first, second)
            lower = upper / max(1.0, float(norms.max()))
            if upper - lower <= gap_tol * (1 + abs(upper)):
                break
            outside = np.flatnonzero(norms > 1 + 0.1 * gap_tol)
            self.cuts += [(int(group), float(np.arctan2(second[group], first[group]))) for group in outside]
            logging.info(f"Oracle round {rounds}: bracket [{lower:.9f}, {upper:.9f}], {outside.size} new cuts")
        else:
            logging.warning(f"Dense oracle bracket [{lower:.9f}, {upper:.9f}] wider than {gap_tol} after "
                            f"{max_rounds} rounds")
        return OracleBounds(min(lower, upper), upper, rounds)


def dual_oracle(f, M, facets=64, solver_name="highs", max_cells=100, gap_tol=1e-6):
    """
    Bracket of the dual total variation from the dense relaxation with cutting planes

    :param f: grid function with at most max_cells support cells, in one or two dimensions
    :param M: divergence bound
    :param gap_tol: relative width of the bracket
    :return bounds: oracle bounds
    """
    return DualOracle(f, M, facets, solver_name, max_cells).solve(gap_tol)
