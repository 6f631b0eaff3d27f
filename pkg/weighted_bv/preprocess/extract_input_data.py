"""
:Title:        WEIGHTED-BV
:Created:      October-2026
:Authors:      weighted_bv developers

Reading of measure and function documents. A document is a json object; the weights or values are
given as a flat row-major list or as a builtin expression.
"""
import json
import os
from typing import Optional

import numpy as np
from pydantic import BaseModel, ValidationError, model_validator

from ..model.grid import GridFunction, GridMeasure, box_mask
from ..model.operators import MollifierKernel
from ..utils import MalformedSpecError


class Expression(BaseModel, extra="allow"):
    name: str


class MeasureDocument(BaseModel, extra="forbid"):
    dim: Optional[int] = None
    shape: list[int]
    spacing: float
    origin: Optional[list[float]] = None
    weights: Optional[list[float]] = None
    weight_expr: Optional[Expression] = None

    @model_validator(mode="after")
    def _one_source(self):
        assert (self.weights is None) != (self.weight_expr is None), "give exactly one of weights and weight_expr"
        return self


class FunctionDocument(BaseModel, extra="forbid"):
    values: Optional[list[float]] = None
    expr: Optional[Expression] = None

    @model_validator(mode="after")
    def _one_source(self):
        assert (self.values is None) != (self.expr is None), "give exactly one of values and expr"
        return self


def _read_document(document):
    if isinstance(document, (str, os.PathLike)):
        if not os.path.exists(document):
            raise FileNotFoundError(f"Document {document} does not exist")
        with open(document, "r") as f:
            try:
                return json.load(f)
            except json.JSONDecodeError as error:
                raise MalformedSpecError(f"{document} is not valid json: {error}")
    return document


def _parse(model, document):
    try:
        return model(**_read_document(document))
    except (ValidationError, TypeError) as error:
        raise MalformedSpecError(str(error))


def _field(expr, key, default=None):
    extra = expr.model_extra or {}
    if key not in extra:
        if default is None:
            raise MalformedSpecError(f"expression '{expr.name}' needs the key '{key}'")
        return default
    return extra[key]


def weight_expression(expr, shape, spacing, origin):
    """
    Evaluates a builtin weight expression

    :param expr: expression with a name and its keys
    :param shape: grid shape
    :param spacing: grid spacing
    :param origin: grid origin
    :return weights: array of the grid shape
    """
    value = float(_field(expr, "value", 1.0))
    index = np.indices(shape)
    if expr.name == "uniform":
        return np.full(shape, value)
    if expr.name == "box":
        box = list(zip(_field(expr, "lo"), _field(expr, "hi")))
        return np.where(box_mask(shape, box), value, 0.0)
    if expr.name == "strip":
        # cells with index along `axis` in [index, index + width)
        axis = int(_field(expr, "axis"))
        start = int(_field(expr, "index"))
        width = int(_field(expr, "width", 1))
        return np.where((index[axis] >= start) & (index[axis] < start + width), value, 0.0)
    if expr.name == "segment":
        start = np.array(_field(expr, "start"), dtype=float)
        end = np.array(_field(expr, "end"), dtype=float)
        thickness = float(_field(expr, "thickness", spacing / 2))
        centers = np.stack([o + (i + 0.5) * spacing for o, i in zip(origin, index)], axis=-1)
        direction = end - start
        length2 = float(direction @ direction)
        t = np.clip(((centers - start) @ direction) / length2, 0.0, 1.0) if length2 > 0 else 0.0
        nearest = start + np.asarray(t)[..., None] * direction
        distance = np.linalg.norm(centers - nearest, axis=-1)
        return np.where(distance <= thickness * (1 + 1e-12), value, 0.0)
    if expr.name == "atoms":
        cells = [tuple(int(i) for i in c) for c in _field(expr, "cells")]
        masses = _field(expr, "masses", [value] * len(cells))
        if len(masses) != len(cells):
            raise MalformedSpecError("atoms need one mass per cell")
        weights = np.zeros(shape)
        for cell, mass in zip(cells, masses):
            if len(cell) != len(shape) or any(not 0 <= i < n for i, n in zip(cell, shape)):
                raise MalformedSpecError(f"atom {cell} lies outside the grid {shape}")
            weights[cell] = float(mass)
        return weights
    raise MalformedSpecError(f"unknown weight expression '{expr.name}'")


def function_expression(expr, measure):
    """
    Evaluates a builtin function expression at the cell centers

    :param expr: expression with a name and its keys, or a plain dict
    :param measure: grid measure
    :return values: array of the grid shape
    """
    if isinstance(expr, dict):
        try:
            expr = Expression(**expr)
        except ValidationError as error:
            raise MalformedSpecError(str(error))
    centers = measure.centers
    if expr.name == "constant":
        return np.full(measure.shape, float(_field(expr, "value")))
    if expr.name == "coordinate":
        axis = int(_field(expr, "axis"))
        if not 0 <= axis < measure.dim:
            raise MalformedSpecError(f"coordinate axis {axis} outside 0..{measure.dim - 1}")
        return centers[..., axis].copy()
    if expr.name == "indicator_halfspace":
        axis = int(_field(expr, "axis"))
        threshold = float(_field(expr, "threshold"))
        side = _field(expr, "side", "below")
        if side not in ("below", "above"):
            raise MalformedSpecError(f"side must be below or above, got {side}")
        inside = centers[..., axis] < threshold if side == "below" else centers[..., axis] > threshold
        return inside.astype(float)
    if expr.name == "gaussian_bump":
        center = np.array(_field(expr, "center"), dtype=float)
        width = float(_field(expr, "width"))
        height = float(_field(expr, "height", 1.0))
        return height * np.exp(-np.sum((centers - center) ** 2, axis=-1) / (2 * width ** 2))
    if expr.name == "distance":
        point = np.array(_field(expr, "point"), dtype=float)
        return np.linalg.norm(centers - point, axis=-1)
    if expr.name == "hat":
        center = np.array(_field(expr, "center"), dtype=float)
        radius = float(_field(expr, "radius"))
        return np.clip(radius - np.linalg.norm(centers - center, axis=-1), 0.0, None)
    if expr.name == "smooth_bump":
        center = np.array(_field(expr, "center"), dtype=float)
        radius = float(_field(expr, "radius"))
        height = float(_field(expr, "height", 1.0))
        return height * MollifierKernel.profile(np.linalg.norm(centers - center, axis=-1) / radius)
    if expr.name == "sum":
        return sum(function_expression(term, measure) for term in _field(expr, "terms"))
    raise MalformedSpecError(f"unknown function expression '{expr.name}'")


def load_measure(document):
    """
    Reads a measure document

    :param document: dict or path of a json file
    :return measure: grid measure
    """
    parsed = _parse(MeasureDocument, document)
    shape = tuple(parsed.shape)
    if parsed.dim is not None and parsed.dim != len(shape):
        raise MalformedSpecError(f"dim {parsed.dim} does not match the shape {shape}")
    origin = tuple(parsed.origin) if parsed.origin is not None else (0.0,) * len(shape)
    if len(origin) != len(shape):
        raise MalformedSpecError(f"origin {origin} does not match the shape {shape}")
    if parsed.spacing <= 0:
        raise MalformedSpecError(f"spacing must be positive, got {parsed.spacing}")
    if parsed.weights is not None:
        weights = np.array(parsed.weights, dtype=float)
    else:
        weights = weight_expression(parsed.weight_expr, shape, parsed.spacing, origin)
    return GridMeasure(shape, parsed.spacing, origin, weights)


def emit_measure(measure):
    """ measure document with flat row-major weights """
    return {"shape": list(measure.shape), "spacing": measure.spacing, "origin": list(measure.origin),
            "weights": [float(w) for w in measure.weights.ravel()]}


def load_function(document, measure):
    """
    Reads a function document on a measure

    :param document: dict or path of a json file
    :param measure: grid measure
    :return f: grid function
    """
    parsed = _parse(FunctionDocument, document)
    if parsed.values is not None:
        return GridFunction(np.array(parsed.values, dtype=float), measure)
    return GridFunction(function_expression(parsed.expr, measure), measure)


def emit_function(f):
    return {"values": [float(x) for x in f.values.ravel()]}


def field_expression(expr, measure):
    """
    Builtin vector field expressions: constant direction, or a circulation on a cycle of cells

    :param expr: dict with a name and its keys
    :param measure: grid measure
    :return components: array of shape (*shape, d)
    """
    name = expr.get("name")
    dim = measure.dim
    if name == "constant":
        direction = np.array(expr["direction"], dtype=float)
        if direction.size != dim:
            raise MalformedSpecError(f"direction {direction} does not match the dimension {dim}")
        return np.broadcast_to(direction, (*measure.shape, dim)).copy()
    if name == "circulation":
        # oriented cycle of axis-neighbouring cells
        cells = [tuple(int(i) for i in c) for c in expr["cells"]]
        weight = float(expr.get("value", 1.0))
        components = np.zeros((*measure.shape, dim))
        for a, b in zip(cells, cells[1:] + cells[:1]):
            step = np.subtract(b, a)
            if np.abs(step).sum() != 1:
                raise MalformedSpecError(f"cells {a} and {b} of a circulation are not axis neighbours")
            axis = int(np.flatnonzero(step)[0])
            if step[axis] > 0:
                components[a + (axis,)] += weight
            else:
                components[b + (axis,)] -= weight
        return components
    raise MalformedSpecError(f"unknown field expression '{name}'")
