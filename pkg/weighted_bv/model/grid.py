"""
:Title:        WEIGHTED-BV
:Created:      October-2026
:Authors:      weighted_bv developers

Weighted grid measures and the grid functions and vector fields living on them.
A measure is a regular box lattice of side h with one non-negative weight per cell; cell i has its
center at origin + (i + 1/2) h and carries the mass w_i h^d. Cells are stored row-major.
"""
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..utils import MalformedSpecError, NegativeWeightError, ZeroTotalMassError


class DomainFlag(str, Enum):
    """ where a vector field is defined """
    SUPPORT_ONLY = "support_only"
    ALL_CELLS = "all_cells"


def _readonly(array, dtype=float):
    array = np.array(array, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


def box_mask(shape, box):
    """ boolean mask of a box of cells

    :param shape: grid shape
    :param box: sequence of half-open index ranges (lo, hi), one per axis
    :return mask: boolean array of the grid shape """
    assert len(box) == len(shape), f"Box {box} does not match the grid dimension {len(shape)}"
    mask = np.zeros(shape, dtype=bool)
    slices = tuple(slice(max(int(lo), 0), min(int(hi), n)) for (lo, hi), n in zip(box, shape))
    mask[slices] = True
    return mask


@dataclass(frozen=True, eq=False)
class GridMeasure:
    """
    A weighted Euclidean measure sampled on a regular grid
    """
    shape: tuple
    spacing: float
    origin: tuple
    weights: np.ndarray

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        if len(shape) == 0 or any(n < 1 for n in shape):
            raise MalformedSpecError(f"shape must hold at least one positive axis length, got {self.shape}")
        if not np.isfinite(self.spacing) or self.spacing <= 0:
            raise MalformedSpecError(f"spacing must be positive and finite, got {self.spacing}")
        origin = tuple(float(x) for x in self.origin)
        if len(origin) != len(shape):
            raise MalformedSpecError(f"origin {self.origin} does not match the dimension {len(shape)}")
        weights = np.asarray(self.weights, dtype=float)
        if weights.size != int(np.prod(shape)):
            raise MalformedSpecError(f"expected {int(np.prod(shape))} weights, got {weights.size}")
        weights = weights.reshape(shape)
        if not np.all(np.isfinite(weights)):
            raise MalformedSpecError("weights must be finite")
        if np.any(weights < 0):
            first = np.argwhere(weights < 0)[0]
            raise NegativeWeightError(tuple(int(i) for i in first), float(weights[tuple(first)]))
        if not np.any(weights > 0):
            raise ZeroTotalMassError()
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "spacing", float(self.spacing))
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "weights", _readonly(weights))

    @property
    def dim(self):
        return len(self.shape)

    @property
    def n_cells(self):
        return int(np.prod(self.shape))

    @property
    def cell_volume(self):
        return self.spacing ** self.dim

    @property
    def support(self):
        """ cells with positive weight """
        return self.weights > 0

    @property
    def support_indices(self):
        return np.flatnonzero(self.support)

    @property
    def zero_indices(self):
        return np.flatnonzero(~self.support)

    @property
    def mass(self):
        """ cell masses w_i h^d """
        return self.weights * self.cell_volume

    @property
    def total_mass(self):
        return float(self.mass.sum())

    @property
    def centers(self):
        """ cell centers, array of shape (*shape, d) """
        idx = np.indices(self.shape, dtype=float)
        centers = np.stack([o + (i + 0.5) * self.spacing for o, i in zip(self.origin, idx)], axis=-1)
        return centers

    def coordinate(self, axis):
        """ the coordinate function x_axis sampled at the cell centers """
        return self.centers[..., axis]

    def upper_face(self, axis):
        """ cells on the upper face of the axis, their forward neighbour lies outside the grid """
        index = np.indices(self.shape)[axis]
        return index == self.shape[axis] - 1

    def active_components(self):
        """ vector field components that carry flux: support cells off the upper face of their axis

        :return mask: boolean array of shape (*shape, d) """
        return np.stack([self.support & ~self.upper_face(k) for k in range(self.dim)], axis=-1)

    def interior(self, width):
        """ cells at least `width` cells away from every face of the grid """
        idx = np.indices(self.shape)
        mask = np.ones(self.shape, dtype=bool)
        for k, n in enumerate(self.shape):
            mask &= (idx[k] >= width) & (idx[k] <= n - 1 - width)
        return mask

    def with_weights(self, weights):
        return GridMeasure(self.shape, self.spacing, self.origin, weights)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """
    A real function sampled at the cell centers of a measure
    """
    values: np.ndarray
    measure: GridMeasure

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.size != self.measure.n_cells:
            raise MalformedSpecError(f"expected {self.measure.n_cells} values, got {values.size}")
        values = values.reshape(self.measure.shape)
        if not np.all(np.isfinite(values)):
            raise MalformedSpecError("function values must be finite")
        object.__setattr__(self, "values", _readonly(values))

    def with_values(self, values):
        return GridFunction(values, self.measure)

    def _other(self, other):
        if isinstance(other, GridFunction):
            assert other.measure is self.measure or other.measure.shape == self.measure.shape, \
                "Grid functions live on different grids"
            return other.values
        return other

    def __add__(self, other):
        return self.with_values(self.values + self._other(other))

    def __sub__(self, other):
        return self.with_values(self.values - self._other(other))

    def __mul__(self, other):
        return self.with_values(self.values * self._other(other))

    def __truediv__(self, other):
        return self.with_values(self.values / self._other(other))

    __radd__ = __add__
    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def l1_norm(self):
        return l1_norm(self)


@dataclass(frozen=True, eq=False)
class GridVectorField:
    """
    A vector field on the cells of a measure, components stored in the last axis
    """
    components: np.ndarray
    measure: GridMeasure
    domain: DomainFlag = DomainFlag.SUPPORT_ONLY

    def __post_init__(self):
        components = np.asarray(self.components, dtype=float)
        expected = (*self.measure.shape, self.measure.dim)
        if components.size != int(np.prod(expected)):
            raise MalformedSpecError(f"expected components of shape {expected}, got {components.shape}")
        components = components.reshape(expected)
        if not np.all(np.isfinite(components)):
            raise MalformedSpecError("vector field components must be finite")
        domain = DomainFlag(self.domain)
        if domain is DomainFlag.SUPPORT_ONLY:
            components = np.where(self.measure.support[..., None], components, 0.0)
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "components", _readonly(components))

    def with_components(self, components):
        return GridVectorField(components, self.measure, self.domain)

    def norms(self):
        """ cellwise Euclidean norm """
        return np.sqrt(np.sum(self.components ** 2, axis=-1))

    def sup_norm(self):
        return sup_norm_on_support(self)

    def dot(self, other):
        """ cellwise inner product with another field """
        return np.sum(self.components * other.components, axis=-1)

    def scaled(self, factor):
        return self.with_components(self.components * factor)


@dataclass(frozen=True)
class BallStencil:
    """
    Lattice offsets o with |o| h <= radius
    """
    radius: float
    spacing: float
    dim: int
    offsets: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        assert self.radius >= 0, f"Stencil radius must be non-negative, got {self.radius}"
        reach = int(np.floor(self.radius / self.spacing * (1 + 1e-12)))
        grid = np.indices((2 * reach + 1,) * self.dim).reshape(self.dim, -1).T - reach
        # squared integer norms compare exactly
        inside = (grid ** 2).sum(axis=1) * self.spacing ** 2 <= self.radius ** 2 * (1 + 1e-12)
        object.__setattr__(self, "offsets", grid[inside])

    def __len__(self):
        return len(self.offsets)


def l1_norm(f):
    """ ||f||_{L^1(mu)} = sum_i |f_i| w_i h^d """
    return float(np.sum(np.abs(f.values) * f.measure.mass))


def sup_norm_on_support(v):
    """ max over support cells of |v_i| """
    norms = v.norms()[v.measure.support]
    return float(norms.max()) if norms.size else 0.0
