"""
:Title:        WEIGHTED-BV
:Created:      October-2026
:Authors:      weighted_bv developers

Tests of the primal-dual solver and the total variation formulations.
"""
import numpy as np
import pytest
from scipy import sparse

from weighted_bv.model.grid import GridFunction
from weighted_bv.model.operators import grid_gradient, is_admissible, mu_divergence
from weighted_bv.model.solvers import ConicProgram, PrimalDualSolver, power_method
from weighted_bv.model.tangent_bundle import compute_fibers, generate_family
from weighted_bv.model.total_variation import (OpenRegion, TVFormulation, bv_membership, dual_program, erode,
                                               tv_derivation, tv_dual, tv_localized, tv_measure_on_box, tv_relaxed)
from weighted_bv.postprocess.comparisons import compare_formulations, relative_gap
from weighted_bv.preprocess.scenarios import build_scenario
from weighted_bv.utils import EmptyRegionError, NotConvergedWarning


# fixtures
##########


@pytest.fixture(scope="module")
def half_plane():
    """
    :return: uniform square with the indicator of a half plane on 8 x 8 cells
    """
    return build_scenario("uniform-square", 8)


@pytest.fixture(scope="module")
def half_plane_dual(half_plane):
    """
    :return: dual total variation of the half plane indicator with M = 8
    """
    return tv_dual(half_plane.f, 8.0)


@pytest.fixture
def solver_options():
    """
    :return: solver options of the short solves
    """
    return {"max_iterations": 20000, "check_every": 50}


def discrete_tv(f):
    """ sum of |grad f| w h^d """
    return float(np.sum(grid_gradient(f).norms() * f.measure.mass))


# solver
########


def test_power_method():
    operator = sparse.diags([1.0, 3.0, 2.0]).tocsr()
    assert power_method(operator, 200) == pytest.approx(3.0, rel=1e-6)


def test_ball_program():
    empty = sparse.csr_matrix((0, 2))
    program = ConicProgram(np.array([1.0, 1.0]), np.array([0, 0]), empty, empty, np.zeros(0))
    result = PrimalDualSolver(program).solve()
    assert result.converged
    assert result.value == pytest.approx(np.sqrt(2))
    assert result.upper_bound >= result.value


def test_iteration_cap_warns(half_plane):
    with pytest.warns(NotConvergedWarning):
        report = tv_dual(half_plane.f, 8.0, solver_options={"max_iterations": 10, "check_every": 5})
    assert not report.converged
    assert report.upper_bound >= report.value


# dual formulation
##################


def test_half_plane_dual(half_plane, half_plane_dual):
    report = half_plane_dual
    assert report.formulation is TVFormulation.DUAL
    assert report.value == pytest.approx(1.0, abs=1e-4)
    assert report.value <= report.upper_bound + 1e-12
    assert is_admissible(report.vector_field, 8.0, 1e-9)


def test_dual_below_discrete_tv():
    scenario = build_scenario("2d-e1", 6)
    rng = np.random.default_rng(2)
    f = GridFunction(rng.normal(size=(6, 6)), scenario.measure)
    report = tv_dual(f, 4.0, solver_options={"max_iterations": 2000})
    assert report.value <= discrete_tv(f) + 1e-9
    assert report.value <= report.upper_bound + 1e-12

def test_scale_covariance(half_plane, half_plane_dual):
    c = -2.5
    scaled = half_plane.f * c
    report = tv_dual(scaled, 8.0)
    assert abs(report.value - abs(c) * half_plane_dual.value) <= report.gap + abs(c) * half_plane_dual.gap + 1e-9
    h = half_plane.measure.spacing
    for mode in (TVFormulation.RELAX_LIP, TVFormulation.RELAX_SMOOTH):
        relaxed = tv_relaxed(half_plane.f, mode, [2 * h, h])
        assert tv_relaxed(scaled, mode, [2 * h, h]).value == pytest.approx(abs(c) * relaxed.value, rel=1e-10)


def test_admissible_fields_stay_below_the_bound(half_plane, half_plane_dual):
    measure = half_plane.measure
    family = generate_family(measure)
    assert len(family) > 0
    for member, bound in zip(family.members, family.div_bounds):
        v = member.scaled(min(1.0, 8.0 / bound)) if bound > 0 else member
        assert is_admissible(v, 8.0, 1e-9)
        for field in (v, v.scaled(-1.0)):
            value = float(np.sum(half_plane.f.values * mu_divergence(field).div.values * measure.mass))
            assert value <= half_plane_dual.upper_bound + 1e-8


def test_hat_on_interval():
    scenario = build_scenario("1d-strip", 8)
    # the hat rises by 0.25 and falls by 0.25, the switch of sign needs |div| >= 2 / h
    report = tv_dual(scenario.f, 128.0)
    assert report.value == pytest.approx(0.5, abs=1e-3)


def test_atoms_have_no_variation():
    scenario = build_scenario("atomic-cloud", 8)
    program = dual_program(scenario.f, 8.0)
    # every flux component points into a zero-weight cell and is removed
    assert program.variables.size == 0
    report = tv_dual(scenario.f, 8.0)
    assert report.value == 0.0
    assert report.converged


def test_strip_has_no_variation_along_transverse_function():
    scenario = build_scenario("thin-strip", 8)
    report = tv_dual(scenario.f, 8.0)
    assert report.value == 0.0


def test_membership_sweep_is_monotone(half_plane, solver_options):
    member, report = bv_membership(half_plane.f, [1.0, 2.0, 4.0, 8.0], 1e-2, 1e-6, solver_options)
    values = [entry["value"] for entry in report.trace]
    assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))
    assert member
    assert report.M == 8.0


# localization
##############


def test_erode_treats_the_edge_as_complement():
    mask = np.ones((6, 6), dtype=bool)
    eroded = erode(mask, 1)
    assert eroded.sum() == 16
    assert not eroded[0].any()
    assert np.array_equal(erode(mask, 0), mask)


def test_empty_region(half_plane):
    region = OpenRegion((((2, 4), (2, 4)),), margin=1)
    with pytest.raises(EmptyRegionError):
        tv_localized(half_plane.f, 8.0, region)


def test_localized_below_global(half_plane, half_plane_dual, solver_options):
    region = OpenRegion((((0, 8), (0, 4)),), margin=1)
    report = tv_localized(half_plane.f, 8.0, region, solver_options=solver_options)
    assert report.value <= half_plane_dual.upper_bound + 1e-9
    assert report.value > 0


def test_localized_is_additive_and_monotone(solver_options):
    scenario = build_scenario("two-box", 16)
    f = scenario.f
    lower, upper = ((0, 8), (0, 8)), ((8, 16), (8, 16))
    first = tv_localized(f, 16.0, OpenRegion((lower,), margin=1), solver_options=solver_options)
    second = tv_localized(f, 16.0, OpenRegion((upper,), margin=1), solver_options=solver_options)
    both = tv_localized(f, 16.0, OpenRegion((lower, upper), margin=1), solver_options=solver_options)
    # the eroded boxes are two cells apart, the program splits into two independent ones
    assert abs(both.value - first.value - second.value) <= both.gap + first.gap + second.gap + 1e-9
    assert first.value > 0 and second.value > 0
    larger = tv_localized(f, 16.0, OpenRegion((((0, 12), (0, 12)),), margin=1), solver_options=solver_options)
    assert first.value <= larger.upper_bound + 1e-9


def test_measure_of_whole_grid(half_plane, half_plane_dual):
    value, trace = tv_measure_on_box(half_plane.f, 8.0, ((0, 8), (0, 8)))
    assert value == pytest.approx(half_plane_dual.value, abs=1e-6)
    assert trace[0][0] == 0


def test_measure_of_box(half_plane, half_plane_dual, solver_options):
    value, trace = tv_measure_on_box(half_plane.f, 8.0, ((2, 6), (2, 6)), (2, 1), solver_options=solver_options)
    assert [cells for cells, _ in trace] == [2, 1]
    assert value == min(v for _, v in trace)
    assert value <= half_plane_dual.upper_bound + 1e-9


# derivation and relaxed formulations
#####################################


def test_derivation_matches_dual(half_plane, half_plane_dual):
    fibers = compute_fibers(generate_family(half_plane.measure))
    report = tv_derivation(half_plane.f, 8.0, fibers, half_plane_dual)
    assert report.formulation is TVFormulation.DERIVATION
    assert relative_gap(report.value, half_plane_dual.value) <= 1e-6


def test_smooth_relaxation_of_half_plane():
    scenario = build_scenario("uniform-square", 16)
    h = scenario.measure.spacing
    report = tv_relaxed(scenario.f, "RELAX_SMOOTH", [4 * h, 3 * h, 2 * h])
    # every row of the mollified step stays monotone across the interface
    assert 1.0 - 1e-9 <= report.value <= 1.05
    assert report.converged
    assert [entry["eps"] for entry in report.trace] == pytest.approx([4 * h, 3 * h, 2 * h])


def test_lip_relaxation_bias():
    scenario = build_scenario("uniform-square", 16)
    h = scenario.measure.spacing
    eps = [6 * h, 5 * h, 4 * h]
    lip = tv_relaxed(scenario.f, TVFormulation.RELAX_LIP, eps)
    smooth = tv_relaxed(scenario.f, TVFormulation.RELAX_SMOOTH, eps)
    assert lip.value >= smooth.value - 1e-9
    assert relative_gap(lip.value, smooth.value) <= 0.05 + 1.25 * h / eps[-1]


def test_relaxed_needs_decreasing_schedule(half_plane):
    with pytest.raises(AssertionError):
        tv_relaxed(half_plane.f, "RELAX_SMOOTH", [0.25, 0.5])


def test_compare_formulations(half_plane, half_plane_dual):
    h = half_plane.measure.spacing
    smooth = tv_relaxed(half_plane.f, "RELAX_SMOOTH", [2 * h, h])
    table, gaps = compare_formulations({"DUAL": half_plane_dual, "RELAX_SMOOTH": smooth})
    assert list(table["formulation"]) == ["DUAL", "RELAX_SMOOTH"]
    assert len(gaps) == 1
    assert gaps["relative_gap"].iloc[0] == pytest.approx(relative_gap(half_plane_dual.value, smooth.value))


def test_relaxed_on_region():
    scenario = build_scenario("uniform-square", 16)
    h = scenario.measure.spacing
    eps = [3 * h, 2 * h]
    # the half plane jumps at x1 = 0.5, the region keeps the lower quarter only
    region = OpenRegion((((0, 4), (0, 16)),), margin=0)
    report = tv_relaxed(scenario.f, "RELAX_SMOOTH", eps, region=region)
    assert report.value <= 1e-12
    whole = tv_relaxed(scenario.f, "RELAX_SMOOTH", eps)
    assert whole.value > 0.9
