"""
:Title:        WEIGHTED-BV
:Created:      October-2026
:Authors:      weighted_bv developers

Derivations induced by admissible vector fields: b(f) = v . grad_mu f. The map from fields to
derivations keeps the divergence and the pointwise norm.
"""
from dataclasses import dataclass

import numpy as np

from .grid import GridFunction, GridVectorField
from .operators import MollifierKernel, grid_gradient, is_admissible, lipschitz_constant, mu_divergence
from .tangent_bundle import tangential_gradient
from ..utils import NotAdmissibleError


@dataclass(frozen=True, eq=False)
class Derivation:
    """
    A derivation with divergence, stored through its representing field
    """
    vector_field: GridVectorField
    divergence: GridFunction
    bound_field: GridFunction
    fibers: object

    @property
    def measure(self):
        return self.vector_field.measure


def phi(v, fibers, tol=1e-9):
    """
    Derivation of an admissible vector field

    :param v: vector field with |v| <= 1 and exact tangency up to tol
    :param fibers: fiber field of the measure
    :param tol: admissibility tolerance
    :return derivation: derivation with div(b) = div_mu(v) and |b| = |v|
    """
    certificate = is_admissible(v, np.inf, tol)
    if not certificate:
        raise NotAdmissibleError(certificate)
    measure = v.measure
    canonical = v.with_components(np.where(measure.active_components(), v.components, 0.0))
    divergence = mu_divergence(canonical).div
    return Derivation(canonical, divergence, GridFunction(canonical.norms(), measure), fibers)


def apply(b, f):
    """
    b(f) = v . grad_mu f on the support

    :param b: derivation
    :param f: grid function
    :return value: grid function
    """
    gradient = tangential_gradient(f, b.fibers)
    return GridFunction(b.vector_field.dot(gradient), b.measure)


def probe_dictionary(measure, budget=64, seed=7, vector_field=None):
    """
    Grid functions with |grad f| <= 1 on every cell: signed coordinates, linear functions along the
    field directions, random linear functions and distance functions

    :param measure: grid measure
    :param budget: number of probes, at least 2 d
    :param seed: seed of the random directions
    :param vector_field: optional field whose directions are probed first
    :return probes: list of grid functions
    """
    dim = measure.dim
    assert budget >= 2 * dim, f"The probe budget must be at least {2 * dim}, got {budget}"
    rng = np.random.default_rng(seed)
    centers = measure.centers
    directions = [sign * np.eye(dim)[k] for k in range(dim) for sign in (1.0, -1.0)]
    n_distance = (budget - 2 * dim) // 4
    if vector_field is not None:
        norms = vector_field.norms().ravel()
        order = np.argsort(-norms, kind="stable")
        seen = set()
        limit = 2 * dim + (budget - 2 * dim) // 2
        for cell in order:
            if len(directions) >= limit or norms[cell] == 0:
                break
            direction = vector_field.components.reshape(-1, dim)[cell] / norms[cell]
            key = tuple(np.round(direction, 12))
            if key not in seen:
                seen.add(key)
                directions.append(direction)
    while len(directions) < budget - n_distance:
        direction = rng.normal(size=dim)
        directions.append(direction / np.linalg.norm(direction))

    probes = [GridFunction(centers @ u, measure) for u in directions]
    low = np.array(measure.origin)
    high = low + np.array(measure.shape) * measure.spacing
    for _ in range(budget - len(probes)):
        point = rng.uniform(low, high)
        probes.append(GridFunction(np.linalg.norm(centers - point, axis=-1), measure))
    normalized = []
    for probe in probes:
        steepest = float(grid_gradient(probe).norms().max())
        normalized.append(probe / max(1.0, steepest))
    return normalized


def derivation_modulus(b, probe_budget=64, seed=7):
    """
    Empirical |b|: cellwise maximum of |b(f)| over the probe dictionary

    :param b: derivation
    :param probe_budget: number of probes
    :param seed: seed of the probe dictionary
    :return modulus: grid function, bounded by |b| cellwise
    """
    probes = probe_dictionary(b.measure, probe_budget, seed, b.vector_field)
    modulus = np.zeros(b.measure.shape)
    for probe in probes:
        modulus = np.maximum(modulus, np.abs(apply(b, probe).values))
    return GridFunction(np.where(b.measure.support, modulus, 0.0), b.measure)


def box_bump(measure, box, margin):
    """ cutoff equal to 1 on the box, decaying to 0 within `margin` cells outside it """
    index = np.indices(measure.shape)
    gaps = [np.maximum(np.maximum(lo - index[k], index[k] - (hi - 1)), 0) for k, (lo, hi) in enumerate(box)]
    distance = np.sqrt(sum(gap.astype(float) ** 2 for gap in gaps))
    return GridFunction(MollifierKernel.profile(distance / max(margin, 1e-12)), measure)


def pairing_Lf(f, b, box, bump_margin=2):
    """
    L_f(b)(B) = - sum f div(eta b) w h^d with a cutoff eta of the box, where div(eta b) is expanded
    as b(eta) + eta div(b)

    :param f: grid function
    :param b: derivation
    :param box: half-open index ranges per axis
    :param bump_margin: decay width of the cutoff in cells
    :return value: float
    """
    eta = box_bump(b.measure, box, bump_margin)
    divergence = apply(b, eta).values + eta.values * b.divergence.values
    return float(-np.sum(f.values * divergence * b.measure.mass))


def leibniz_div_residual(b, eta):
    """ largest deviation between div(eta v) and b(eta) + eta div(b) on the support """
    direct = mu_divergence(b.vector_field.with_components(eta.values[..., None] * b.vector_field.components)).div
    expansion = apply(b, eta).values + eta.values * b.divergence.values
    residual = np.abs(direct.values - expansion)[b.measure.support]
    return float(residual.max()) if residual.size else 0.0


def leibniz_div_bound(b, eta):
    """
    Bound of leibniz_div_residual for weights constant on the support:
    h sum_k (Lip(v_k) Lip(eta) + sup |v_k| Lip(d_k eta))

    :param b: derivation
    :param eta: grid function
    :return bound: float
    """
    measure = b.measure
    components = np.where(measure.active_components(), b.vector_field.components, 0.0)
    slopes = grid_gradient(eta).components
    lip_eta = lipschitz_constant(eta)
    total = 0.0
    for k in range(measure.dim):
        component = GridFunction(components[..., k], measure)
        total += lipschitz_constant(component) * lip_eta
        total += float(np.abs(components[..., k]).max()) * lipschitz_constant(GridFunction(slopes[..., k], measure))
    return measure.spacing * total
