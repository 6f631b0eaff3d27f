"""
:Title:        WEIGHTED-BV
:Created:      October-2026
:Authors:      weighted_bv developers

Discrete calculus on weighted grids: forward gradient, mu-divergence as the negative weighted adjoint
of the gradient, tangency projection, admissibility, mollification and local Lipschitz constants.
"""
import functools
from dataclasses import dataclass

import numpy as np
from scipy import ndimage, sparse

from .grid import BallStencil, DomainFlag, GridFunction, GridVectorField
from ..utils import EpsTooSmallError, MalformedSpecError, RadiusTooSmallError

# relative slack on radii so that lattice points on the sphere are kept
RADIUS_SLACK = 1e-6


def _forward_difference(values, axis, spacing):
    """ (f_{i+e_k} - f_i) / h, zero on the upper face """
    diff = np.zeros_like(values)
    upper = [slice(None)] * values.ndim
    lower = [slice(None)] * values.ndim
    upper[axis] = slice(1, None)
    lower[axis] = slice(None, -1)
    diff[tuple(lower)] = (values[tuple(upper)] - values[tuple(lower)]) / spacing
    return diff


def _gradient_adjoint(flux, spacing):
    """ G^T F for a flux array of shape (*shape, d) """
    dim = flux.shape[-1]
    out = np.zeros(flux.shape[:-1])
    for k in range(dim):
        component = flux[..., k].copy()
        last = [slice(None)] * dim
        last[k] = -1
        component[tuple(last)] = 0.0
        out -= component
        head = [slice(None)] * dim
        tail = [slice(None)] * dim
        head[k] = slice(1, None)
        tail[k] = slice(None, -1)
        out[tuple(head)] += component[tuple(tail)]
    return out / spacing


def grid_gradient(f):
    """
    Forward-difference gradient of a grid function

    :param f: grid function
    :return gradient: vector field on all cells
    """
    measure = f.measure
    components = np.stack([_forward_difference(f.values, k, measure.spacing) for k in range(measure.dim)], axis=-1)
    return GridVectorField(components, measure, DomainFlag.ALL_CELLS)


@dataclass(frozen=True, eq=False)
class DivergenceResult:
    div: GridFunction
    tangency_residual: float


def flux_divergence(v):
    """ G^T (w v), the weighted adjoint of the gradient applied to a field """
    measure = v.measure
    flux = measure.weights[..., None] * v.components
    return _gradient_adjoint(flux, measure.spacing)


def mu_divergence(v, mu=None):
    """
    mu-divergence of a vector field, defined on the support by
    sum (G phi) . v w h^d = - sum phi div(v) w h^d for every grid function phi

    :param v: vector field
    :param mu: measure on the grid of the field, the measure of the field when None
    :return result: divergence on the support (zero elsewhere) and the tangency residual,
        the largest flux imbalance on a zero-weight cell
    """
    if mu is not None and mu is not v.measure:
        if tuple(mu.shape) != tuple(v.measure.shape) or mu.spacing != v.measure.spacing:
            raise MalformedSpecError(f"measure on {mu.shape} cells of size {mu.spacing} does not carry a field "
                                     f"on {v.measure.shape} cells of size {v.measure.spacing}")
        v = GridVectorField(v.components, mu, v.domain)
    measure = v.measure
    adjoint = flux_divergence(v)
    support = measure.support
    weights = np.where(support, measure.weights, 1.0)
    div = np.where(support, -adjoint / weights, 0.0)
    off_support = np.abs(adjoint[~support])
    residual = float(off_support.max()) if off_support.size else 0.0
    return DivergenceResult(GridFunction(div, measure), residual)


@functools.lru_cache(maxsize=32)
def flux_matrix(measure):
    """
    Sparse matrix A with A x = G^T (w v) for the flat variable vector x[cell * d + k] = v_{cell, k}

    :param measure: grid measure
    :return matrix: csr matrix of shape (n_cells, n_cells * d)
    """
    dim, shape, h = measure.dim, measure.shape, measure.spacing
    flat = np.arange(measure.n_cells).reshape(shape)
    rows, cols, data = [], [], []
    active = measure.active_components()
    for k in range(dim):
        cells = flat[active[..., k]]
        heads = cells + int(np.prod(shape[k + 1:]))
        coefficient = measure.weights.ravel()[cells] / h
        rows += [cells, heads]
        cols += [cells * dim + k, cells * dim + k]
        data += [-coefficient, coefficient]
    rows = np.concatenate(rows) if rows else np.zeros(0, dtype=int)
    cols = np.concatenate(cols) if cols else np.zeros(0, dtype=int)
    data = np.concatenate(data) if data else np.zeros(0)
    matrix = sparse.csr_matrix((data, (rows, cols)), shape=(measure.n_cells, measure.n_cells * dim))
    return matrix


@functools.lru_cache(maxsize=32)
def tangency_rows(measure):
    """
    Tangency constraints: for each zero-weight cell z, sum_k w_{z-e_k} v_{z-e_k,k} = 0 over lower
    neighbours with positive weight. Each variable enters at most one row.

    :param measure: grid measure
    :return variables: flat variable indices cell * d + k
    :return heads: zero-weight cell owning the row of each variable
    :return coefficients: weights w_{z-e_k}
    """
    dim, shape = measure.dim, measure.shape
    flat = np.arange(measure.n_cells).reshape(shape)
    weights = measure.weights.ravel()
    active = measure.active_components()
    variables, heads, coefficients = [], [], []
    for k in range(dim):
        cells = flat[active[..., k]]
        head = cells + int(np.prod(shape[k + 1:]))
        into_zero = weights[head] == 0
        variables.append(cells[into_zero] * dim + k)
        heads.append(head[into_zero])
        coefficients.append(weights[cells[into_zero]])
    return np.concatenate(variables), np.concatenate(heads), np.concatenate(coefficients)


def project_tangent_flat(values, measure):
    """
    Exact orthogonal projection of a flat variable vector onto the tangency null-space.
    Rows with a single variable set it to exactly zero.

    :param values: flat array of length n_cells * d
    :param measure: grid measure
    :return projected: flat array
    """
    variables, heads, coefficients = tangency_rows(measure)
    projected = np.array(values, dtype=float, copy=True)
    if variables.size == 0:
        return projected
    n = measure.n_cells
    dots = np.bincount(heads, weights=coefficients * projected[variables], minlength=n)
    norms = np.bincount(heads, weights=coefficients ** 2, minlength=n)
    counts = np.bincount(heads, minlength=n)
    projected[variables] -= coefficients * dots[heads] / norms[heads]
    projected[variables[counts[heads] == 1]] = 0.0
    return projected


def project_tangent(v):
    """
    Canonical tangent representative of a field: inert components are zeroed and the flux balance
    on zero-weight cells is enforced exactly

    :param v: vector field
    :return projected: vector field on the support
    """
    measure = v.measure
    components = np.where(measure.active_components(), v.components, 0.0)
    projected = project_tangent_flat(components.ravel(), measure)
    return GridVectorField(projected.reshape(components.shape), measure, DomainFlag.SUPPORT_ONLY)


@dataclass(frozen=True)
class AdmissibilityCertificate:
    admissible: bool
    sup_norm: float
    tangency_residual: float
    max_divergence: float
    div_bound: float
    tol: float

    def __bool__(self):
        return self.admissible


def is_admissible(v, div_bound, tol=1e-9):
    """
    Checks |v| <= 1 on the support, the tangency residual and |div_mu v| <= div_bound, all up to tol

    :param v: vector field
    :param div_bound: bound M on the divergence, may be infinite
    :param tol: absolute tolerance
    :return certificate: admissibility certificate, truthy iff admissible
    """
    result = mu_divergence(v)
    sup_norm = v.sup_norm()
    divergence = np.abs(result.div.values[v.measure.support])
    max_divergence = float(divergence.max()) if divergence.size else 0.0
    admissible = (sup_norm <= 1 + tol and result.tangency_residual <= tol
                  and max_divergence <= div_bound + tol)
    return AdmissibilityCertificate(bool(admissible), sup_norm, result.tangency_residual,
                                    max_divergence, float(div_bound), tol)


@dataclass(frozen=True, eq=False)
class MollifierKernel:
    """
    Radial polynomial bump rho(x) = (1 - |x / eps|^2)^3 sampled on the lattice, taps summing to one
    """
    epsilon: float
    spacing: float
    dim: int
    offsets: np.ndarray
    taps: np.ndarray

    @staticmethod
    def profile(radius):
        return np.clip(1.0 - np.asarray(radius, dtype=float) ** 2, 0.0, None) ** 3

    @classmethod
    def build(cls, epsilon, spacing, dim):
        if epsilon < spacing * (1 - 1e-12):
            raise EpsTooSmallError(epsilon, spacing)
        offsets = BallStencil(epsilon, spacing, dim).offsets
        taps = cls.profile(np.sqrt((offsets ** 2).sum(axis=1)) * spacing / epsilon)
        keep = taps > 0
        offsets, taps = offsets[keep], taps[keep]
        return cls(epsilon, spacing, dim, offsets, taps / taps.sum())

    @property
    def reach(self):
        return int(np.abs(self.offsets).max()) if self.offsets.size else 0

    def dense(self):
        """ taps as a dense (2 reach + 1)^d array centered at the origin """
        reach = self.reach
        kernel = np.zeros((2 * reach + 1,) * self.dim)
        kernel[tuple((self.offsets + reach).T)] = self.taps
        return kernel


def mollify(f, epsilon):
    """
    Convolution of a grid function with the mollifier of scale epsilon. Near the edge of the grid
    the clipped kernel is renormalized, so constants are reproduced exactly.

    :param f: grid function
    :param epsilon: mollification scale, at least the grid spacing
    :return f_eps: mollified grid function
    """
    measure = f.measure
    kernel = MollifierKernel.build(epsilon, measure.spacing, measure.dim).dense()
    numerator = ndimage.correlate(f.values, kernel, mode="constant", cval=0.0)
    normalization = ndimage.correlate(np.ones(measure.shape), kernel, mode="constant", cval=0.0)
    return f.with_values(numerator / normalization)


def _shifted(values, offset):
    """ g[x] = values[x + offset] where x + offset is in the grid, nan elsewhere """
    out = np.full(values.shape, np.nan)
    target, source = [], []
    for o, n in zip(offset, values.shape):
        o = int(o)
        target.append(slice(max(-o, 0), min(n - o, n)))
        source.append(slice(max(o, 0), min(n + o, n)))
    out[tuple(target)] = values[tuple(source)]
    return out


def local_lipschitz(f, radius):
    """
    Lip(f; B_r(x)) at every cell: the largest slope |f(y) - f(z)| / |y - z| over pairs of cells y, z
    in the ball of radius r around x, clipped to the grid

    :param f: grid function
    :param radius: ball radius, at least h sqrt(d)
    :return lip: grid function
    """
    measure = f.measure
    minimum = measure.spacing * np.sqrt(measure.dim)
    if radius < minimum * (1 - 1e-12):
        raise RadiusTooSmallError(radius, minimum)
    offsets = BallStencil(radius, measure.spacing, measure.dim).offsets
    shifted = [_shifted(f.values, o) for o in offsets]
    lip = np.zeros(measure.shape)
    with np.errstate(invalid="ignore"):
        for a in range(len(offsets)):
            for b in range(a + 1, len(offsets)):
                distance = np.sqrt(((offsets[b] - offsets[a]) ** 2).sum()) * measure.spacing
                slope = np.abs(shifted[b] - shifted[a]) / distance
                lip = np.fmax(lip, slope)
    return f.with_values(lip)


def asymptotic_lipschitz(f):
    """ local_lipschitz at the smallest legal radius h sqrt(d) (1 + delta) """
    measure = f.measure
    return local_lipschitz(f, measure.spacing * np.sqrt(measure.dim) * (1 + RADIUS_SLACK))


def lipschitz_constant(f):
    """ largest slope between neighbouring cells, the grid stand-in for Lip(f) """
    return float(asymptotic_lipschitz(f).values.max())
