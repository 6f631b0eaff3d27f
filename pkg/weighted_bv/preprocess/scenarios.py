"""
:Title:        WEIGHTED-BV
:Created:      October-2026
:Authors:      weighted_bv developers

Builtin scenarios: a measure, a function f, a second function g for product and superposition
checks, a vector field and optionally an open region, all built from documents.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .extract_input_data import field_expression, load_function, load_measure
from ..model.grid import GridVectorField
from ..model.operators import project_tangent
from ..model.total_variation import OpenRegion


@dataclass(eq=False)
class Scenario:
    name: str
    description: str
    measure: object
    f: object
    g: object
    vector_field: GridVectorField
    region: Optional[OpenRegion] = None
    box: Optional[tuple] = None

    @property
    def full_support(self):
        return bool(self.measure.support.all())


def _documents(name, n):
    """ measure document, function documents, field expression, region and box of a scenario """
    h = 1.0 / n
    square = {"shape": [n, n], "spacing": h}
    quarter = ((n // 4, 3 * n // 4), (n // 4, 3 * n // 4))
    if name == "uniform-square":
        return ({**square, "weight_expr": {"name": "uniform"}},
                {"expr": {"name": "indicator_halfspace", "axis": 0, "threshold": 0.5}},
                {"expr": {"name": "smooth_bump", "center": [0.5, 0.5], "radius": 0.3}},
                {"name": "constant", "direction": [1.0, 0.0]}, None, quarter,
                "uniform measure on the unit square, indicator of a half plane")
    if name == "thin-strip":
        return ({**square, "weight_expr": {"name": "strip", "axis": 1, "index": n // 2}},
                {"expr": {"name": "coordinate", "axis": 1}},
                {"expr": {"name": "coordinate", "axis": 0}},
                {"name": "constant", "direction": [1.0, 0.0]}, None, ((n // 4, 3 * n // 4), (0, n)),
                "one cell wide horizontal strip, transverse coordinate")
    if name == "atomic-cloud":
        cells = [[i, j] for i in range(1, n, 4) for j in range(1, n, 4)]
        return ({**square, "weight_expr": {"name": "atoms", "cells": cells}},
                {"expr": {"name": "gaussian_bump", "center": [0.5, 0.5], "width": 0.2}},
                {"expr": {"name": "coordinate", "axis": 0}},
                {"name": "constant", "direction": [1.0, 0.0]}, None, quarter,
                "isolated atoms on a coarse lattice")
    if name == "two-box":
        terms = [{"name": "smooth_bump", "center": [0.25, 0.25], "radius": 0.15},
                 {"name": "smooth_bump", "center": [0.75, 0.75], "radius": 0.15}]
        region = OpenRegion((((0, n // 2), (0, n // 2)), ((n // 2, n), (n // 2, n))), margin=1)
        return ({**square, "weight_expr": {"name": "uniform"}},
                {"expr": {"name": "sum", "terms": terms}},
                {"expr": {"name": "coordinate", "axis": 0}},
                {"name": "constant", "direction": [1.0, 0.0]}, region, ((0, n // 2), (0, n // 2)),
                "uniform measure, two bumps localized in two boxes")
    if name == "plaquette":
        # the four central cells, the whole grid at resolution 2
        c = max(n // 2 - 1, 0)
        cells = [[c, c], [c + 1, c], [c + 1, c + 1], [c, c + 1]]
        return ({**square, "weight_expr": {"name": "uniform"}},
                {"expr": {"name": "coordinate", "axis": 0}},
                {"expr": {"name": "coordinate", "axis": 1}},
                {"name": "circulation", "cells": cells, "value": 1 / np.sqrt(2)},
                None, ((c, c + 2), (c, c + 2)), "unit circulation around four cells")
    if name == "1d-strip":
        return ({"shape": [4 * n], "spacing": 1.0 / (4 * n), "weight_expr": {"name": "uniform"}},
                {"expr": {"name": "hat", "center": [(2 * n + 0.5) / (4 * n)], "radius": 0.25}},
                {"expr": {"name": "constant", "value": 1.0}},
                {"name": "constant", "direction": [1.0]}, None, ((n, 3 * n),),
                "uniform measure on the unit interval, hat function")
    if name == "2d-e1":
        return ({**square, "weight_expr": {"name": "uniform"}},
                {"expr": {"name": "coordinate", "axis": 0}},
                {"expr": {"name": "coordinate", "axis": 1}},
                {"name": "constant", "direction": [1.0, 0.0]}, None, quarter,
                "uniform measure on the unit square, constant unit field")
    raise KeyError(f"Unknown scenario '{name}', choose one of {SCENARIOS}")


SCENARIOS = ("uniform-square", "thin-strip", "atomic-cloud", "two-box", "plaquette", "1d-strip", "2d-e1")


def build_scenario(name, resolution=32):
    """
    Builds a builtin scenario

    :param name: scenario name
    :param resolution: cells per axis of the unit square (the interval has four times as many)
    :return scenario: scenario
    """
    measure_doc, f_doc, g_doc, field_expr, region, box, description = _documents(name, resolution)
    measure = load_measure(measure_doc)
    f = load_function(f_doc, measure)
    g = load_function(g_doc, measure)
    field = project_tangent(GridVectorField(field_expression(field_expr, measure), measure))
    sup = field.sup_norm()
    if sup > 1:
        field = field.scaled(1.0 / sup)
    return Scenario(name, description, measure, f, g, field, region, box)
