"""
:Title:        WEIGHTED-BV
:Created:      October-2026
:Authors:      weighted_bv developers

Tests of the tangent bundle, the derivations and the Sobolev calculus.
"""
import numpy as np
import pytest

from weighted_bv.model.derivations import (apply, box_bump, derivation_modulus, leibniz_div_bound,
                                           leibniz_div_residual, pairing_Lf, phi, probe_dictionary)
from weighted_bv.model.grid import GridFunction, GridVectorField
from weighted_bv.model.operators import grid_gradient, lipschitz_constant, mu_divergence
from weighted_bv.model.sobolev import (SlopeKind, closability_probe, extended_tangential_gradient, relaxed_slope,
                                       w11_inclusion_check, w11_norm)
from weighted_bv.model.tangent_bundle import (compute_fibers, fiber_angle, generate_family, leibniz_check,
                                              tangential_gradient)
from weighted_bv.preprocess.scenarios import build_scenario
from weighted_bv.utils import NotAdmissibleError, NotStabilizedError


# fixtures
##########


@pytest.fixture(scope="module")
def uniform():
    """
    :return: 2d-e1 scenario on 12 x 12 cells and its fibers
    """
    scenario = build_scenario("2d-e1", 12)
    return scenario, compute_fibers(generate_family(scenario.measure))


@pytest.fixture(scope="module")
def strip():
    """
    :return: thin strip scenario on 16 x 16 cells and its fibers
    """
    scenario = build_scenario("thin-strip", 16)
    return scenario, compute_fibers(generate_family(scenario.measure))


@pytest.fixture(scope="module")
def atoms():
    """
    :return: atomic cloud scenario on 12 x 12 cells and its family
    """
    scenario = build_scenario("atomic-cloud", 12)
    return scenario, generate_family(scenario.measure)


# tangent bundle
################


def test_family_is_admissible(uniform):
    scenario, _ = uniform
    family = generate_family(scenario.measure, stride_cells=6)
    assert len(family) > 0
    for member, bound in zip(family.members, family.div_bounds):
        assert member.sup_norm() == pytest.approx(1.0)
        assert mu_divergence(member).tangency_residual <= 1e-12
        assert np.abs(mu_divergence(member).div.values).max() <= bound + 1e-12


def test_family_with_conjugate_gradients(strip):
    scenario, fibers = strip
    family = generate_family(scenario.measure, method="cg")
    cg_fibers = compute_fibers(family)
    inside = scenario.measure.support & scenario.measure.interior(1)
    assert np.all(cg_fibers.ranks[inside] == fibers.ranks[inside])


def test_full_support_has_full_rank(uniform):
    scenario, fibers = uniform
    inside = scenario.measure.interior(1)
    assert np.all(fibers.ranks[inside] == 2)
    projectors = fibers.projectors()[inside]
    assert np.allclose(projectors, np.eye(2), atol=1e-10)


def test_strip_has_rank_one_along_strip(strip):
    scenario, fibers = strip
    inside = scenario.measure.support & scenario.measure.interior(1)
    assert np.all(fibers.ranks[inside] == 1)
    assert np.nanmax(fiber_angle(fibers, [1.0, 0.0])[inside]) <= 5.0
    # no fiber off the support
    assert np.all(fibers.ranks[~scenario.measure.support] == 0)


def test_atoms_have_rank_zero(atoms):
    scenario, family = atoms
    fibers = compute_fibers(family)
    assert len(family) == 0
    assert np.all(fibers.ranks == 0)
    gradient = tangential_gradient(scenario.f, fibers)
    assert np.all(gradient.components == 0)


def test_strip_projectors_are_idempotent(strip):
    scenario, fibers = strip
    inside = scenario.measure.support & scenario.measure.interior(1)
    projectors = fibers.projectors()[inside]
    assert np.allclose(projectors @ projectors, projectors, atol=1e-10)
    basis = fibers.bases[inside][:, :, 0]
    assert np.allclose(np.einsum("nij,nj->ni", projectors, basis), basis, atol=1e-9)


def test_tangential_gradient_on_full_support(uniform):
    scenario, fibers = uniform
    gradient = tangential_gradient(scenario.f, fibers).components
    inside = scenario.measure.interior(1)
    assert np.allclose(gradient[inside], grid_gradient(scenario.f).components[inside], atol=1e-10)


def test_strip_forgets_transverse_gradient(strip):
    scenario, fibers = strip
    gradient = tangential_gradient(scenario.f, fibers)
    assert np.abs(gradient.components[scenario.measure.support]).max() <= 1e-10


def test_leibniz_rule(uniform):
    scenario, fibers = uniform
    h = scenario.measure.spacing
    x1 = scenario.f
    # the forward difference of x1 x1 carries the extra term h |grad x1|^2
    residual = leibniz_check(x1, x1, fibers)
    assert 0.5 * h <= residual <= 8 * h
    assert leibniz_check(x1, scenario.g, fibers) <= 1e-10


def test_leibniz_residual_is_first_order():
    residuals = []
    for n in (16, 32):
        scenario = build_scenario("2d-e1", n)
        fibers = compute_fibers(generate_family(scenario.measure))
        residuals.append(leibniz_check(scenario.f, scenario.f, fibers))
    assert 1.6 <= residuals[0] / residuals[1] <= 2.4


# derivations
#############


def test_phi_is_isometric(uniform):
    scenario, fibers = uniform
    b = phi(scenario.vector_field, fibers)
    assert np.array_equal(b.bound_field.values, scenario.vector_field.norms())
    assert np.array_equal(b.divergence.values, mu_divergence(scenario.vector_field).div.values)
    inside = scenario.measure.interior(1)
    assert np.allclose(apply(b, scenario.f).values[inside], 1.0)


def test_phi_rejects_long_fields(uniform):
    scenario, fibers = uniform
    with pytest.raises(NotAdmissibleError):
        phi(scenario.vector_field.scaled(2.0), fibers)


def test_probe_dictionary(uniform):
    scenario, _ = uniform
    probes = probe_dictionary(scenario.measure, 32, 7, scenario.vector_field)
    assert len(probes) == 32
    for probe in probes:
        assert grid_gradient(probe).norms().max() <= 1 + 1e-12
    again = probe_dictionary(scenario.measure, 32, 7, scenario.vector_field)
    assert all(np.array_equal(a.values, b.values) for a, b in zip(probes, again))


def test_derivation_modulus(uniform):
    scenario, fibers = uniform
    b = phi(scenario.vector_field, fibers)
    modulus = derivation_modulus(b, 32, 7).values
    assert np.all(modulus <= b.bound_field.values + 1e-12)
    inside = scenario.measure.interior(1)
    assert np.allclose(modulus[inside], b.bound_field.values[inside], atol=1e-6)


def test_pairing_on_box(uniform):
    scenario, fibers = uniform
    b = phi(scenario.vector_field, fibers)
    box = ((4, 8), (4, 8))
    eta = box_bump(scenario.measure, box, 2)
    assert np.all(eta.values[4:8, 4:8] == 1.0)
    # for a linear f the pairing reduces to the integral of the cutoff
    value = pairing_Lf(scenario.f, b, box, 2)
    assert value == pytest.approx(float(np.sum(eta.values * scenario.measure.mass)), rel=1e-9)


def test_pairing_is_additive_over_boxes():
    defects = []
    for n in (16, 32):
        scenario = build_scenario("uniform-square", n)
        fibers = compute_fibers(generate_family(scenario.measure))
        b = phi(scenario.vector_field, fibers)
        q = n // 16
        lower, upper = ((4 * q, 12 * q), (2 * q, 8 * q)), ((4 * q, 12 * q), (8 * q, 14 * q))
        union = ((4 * q, 12 * q), (2 * q, 14 * q))
        # the two cutoffs overlap on two rows next to the common face
        defect = abs(pairing_Lf(scenario.f, b, lower) + pairing_Lf(scenario.f, b, upper)
                     - pairing_Lf(scenario.f, b, union))
        assert defect <= 4 * scenario.measure.spacing
        defects.append(defect)
    assert defects[1] <= 0.6 * defects[0]


def test_leibniz_divergence_is_first_order():
    residuals = []
    for n in (16, 32):
        scenario = build_scenario("2d-e1", n)
        fibers = compute_fibers(generate_family(scenario.measure))
        b = phi(scenario.vector_field, fibers)
        # radius 0.3 at every resolution
        eta = build_scenario("uniform-square", n).g
        residual = leibniz_div_residual(b, eta)
        assert residual <= leibniz_div_bound(b, eta) + 1e-9
        residuals.append(residual)
    assert 1.6 <= residuals[0] / residuals[1] <= 2.4


# sobolev
#########


def test_w11_norm_of_constant(uniform):
    scenario, fibers = uniform
    one = GridFunction(np.ones(scenario.measure.shape), scenario.measure)
    assert w11_norm(one, fibers) == pytest.approx(1.0)


def test_inclusion_on_full_support(uniform):
    scenario, fibers = uniform
    measure = scenario.measure
    h = measure.spacing
    bump = build_scenario("uniform-square", 12).g
    report = w11_inclusion_check(bump, fibers, [3 * h, 2 * h, h])
    assert report.violation == 0.0
    assert report.incl_tol > 0
    assert report.pointwise_ok
    # no neighbour pair sees the full slope sqrt(5) / 2 of an off-diagonal linear function
    tilted = scenario.f + 0.5 * measure.coordinate(1)
    strict = w11_inclusion_check(tilted, fibers, [3 * h, 2 * h, h], incl_tol=1e-3)
    assert strict.violation > 0.0
    assert not strict.pointwise_ok


def test_strip_separates_the_slopes(strip):
    scenario, fibers = strip
    h = scenario.measure.spacing
    schedule = [3 * h, 2 * h]
    rs = relaxed_slope(scenario.f, SlopeKind.RS, schedule, raise_on_failure=False)
    trs = relaxed_slope(scenario.f, SlopeKind.TRS, schedule, fibers=fibers, raise_on_failure=False)
    support = scenario.measure.support
    assert np.all(rs.slope.values[support] >= 0.9)
    assert np.abs(trs.slope.values[support]).max() <= 1e-10
    assert trs.stabilized


def test_atoms_have_no_tangential_slope(atoms):
    scenario, family = atoms
    h = scenario.measure.spacing
    trs = relaxed_slope(scenario.f, SlopeKind.TRS, [3 * h, 2 * h, h], fibers=compute_fibers(family),
                        raise_on_failure=False)
    assert np.all(trs.slope.values == 0.0)


def test_tangential_slope_matches_the_gradient():
    errors = []
    for n in (16, 32):
        scenario = build_scenario("2d-e1", n)
        measure = scenario.measure
        h = measure.spacing
        fibers = compute_fibers(generate_family(measure))
        bump = build_scenario("uniform-square", n).g
        trs = relaxed_slope(bump, SlopeKind.TRS, [2 * h, 1.5 * h, h], fibers=fibers, raise_on_failure=False)
        gradient = tangential_gradient(bump, fibers).norms()
        error = float(np.sum(np.abs(trs.slope.values - gradient) * measure.mass))
        assert error <= 4 * h * np.sum(gradient * measure.mass)
        errors.append(error)
    assert errors[1] <= errors[0]


def test_slope_minimum_is_stable():
    scenario = build_scenario("2d-e1", 32)
    measure = scenario.measure
    h = measure.spacing
    fibers = compute_fibers(generate_family(measure))
    bump = build_scenario("uniform-square", 32).g

    def trs(schedule):
        return relaxed_slope(bump, SlopeKind.TRS, schedule, fibers=fibers, raise_on_failure=False).slope.values

    lower = np.minimum(trs([3 * h, 2 * h]), trs([2.5 * h, 1.5 * h]))
    refined = trs([3 * h, 2.5 * h, 2 * h, 1.5 * h, h])
    deficit = float(np.sum(np.maximum(refined - lower, 0.0) * measure.mass))
    assert deficit <= 2 * h * lipschitz_constant(bump) * measure.total_mass


def test_tangential_slope_needs_fibers(uniform):
    scenario, _ = uniform
    with pytest.raises(ValueError):
        relaxed_slope(scenario.f, SlopeKind.TRS, [0.25, 0.2])


def test_slopes_not_stabilized(uniform):
    scenario, fibers = uniform
    h = scenario.measure.spacing
    step = build_scenario("uniform-square", 12).f
    with pytest.raises(NotStabilizedError):
        relaxed_slope(step, SlopeKind.RS, [4 * h, 3 * h, 2 * h, h], trace_tol=1e-12)
    with pytest.warns(UserWarning):
        estimate = relaxed_slope(step, SlopeKind.RS, [4 * h, 3 * h, 2 * h, h], trace_tol=1e-12,
                                 raise_on_failure=False)
    assert not estimate.stabilized
    assert len(estimate.trace) == 2


def test_closability(uniform):
    scenario, fibers = uniform
    h = scenario.measure.spacing
    mass = scenario.measure.mass
    bump = build_scenario("uniform-square", 12).g
    schedule = [3 * h, 2 * h, h]
    reference = relaxed_slope(bump, SlopeKind.TRS, schedule, fibers=fibers, raise_on_failure=False)
    reference = float(np.sum(reference.slope.values * mass))
    probe = closability_probe(bump, fibers, schedule)
    assert reference > 0
    assert np.sum(probe.slope.values * mass) <= 1e-2 * reference
    # the slope of f_n decays like 1 / n: doubling the sequence halves the tail average
    shorter = closability_probe(bump, fibers, schedule, terms=256)
    ratio = np.sum(shorter.slope.values * mass) / np.sum(probe.slope.values * mass)
    assert 1.9 <= ratio <= 2.1


def test_direction_field_is_not_closable(uniform):
    scenario, fibers = uniform
    h = scenario.measure.spacing
    mass = scenario.measure.mass
    bump = build_scenario("uniform-square", 12).g

    def direction(f, fibers):
        v = tangential_gradient(f, fibers)
        norms = v.norms()[..., None]
        return v.with_components(np.divide(v.components, norms, out=np.zeros_like(v.components),
                                           where=norms > 1e-12 * np.abs(f.values).max()))

    reference = float(np.sum(tangential_gradient(bump, fibers).norms() * mass))
    probe = closability_probe(bump, fibers, [3 * h, 2 * h, h], gradient=direction)
    # a unit slope does not see that f_n tends to zero
    assert np.sum(probe.slope.values * mass) >= 10 * 1e-2 * max(reference, 1.0)


def test_extended_tangential_gradient(uniform):
    scenario, fibers = uniform
    h = scenario.measure.spacing
    bump = build_scenario("uniform-square", 12).g
    gradient, trace = extended_tangential_gradient(bump, fibers, [3 * h, 2 * h, h])
    assert len(trace) == 2
    assert isinstance(gradient, GridVectorField)
    # the limit stays close to the gradient of the function itself
    distance = np.sum(np.linalg.norm(gradient.components - tangential_gradient(bump, fibers).components, axis=-1)
                      * scenario.measure.mass)
    assert distance <= 0.5 * np.sum(tangential_gradient(bump, fibers).norms() * scenario.measure.mass)
