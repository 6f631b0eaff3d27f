"""
:Title:        WEIGHTED-BV
:Created:      October-2026
:Authors:      weighted_bv developers

Tests of the rasterized flux and its decomposition into lattice curves.
"""
from dataclasses import replace

import numpy as np
import pytest

from weighted_bv.model.derivations import phi
from weighted_bv.model.grid import GridFunction
from weighted_bv.model.superposition import (CurveKind, conservation_error, decompose, rasterize_flux,
                                             reconstruct_field, verify_marginals)
from weighted_bv.model.tangent_bundle import compute_fibers, generate_family
from weighted_bv.preprocess.scenarios import build_scenario
from weighted_bv.utils import InconsistentFluxError, NotAdmissibleError


# fixtures
##########


@pytest.fixture(scope="module")
def uniform():
    """
    :return: 2d-e1 scenario on 12 x 12 cells, its fibers and the curve measure of its field
    """
    scenario = build_scenario("2d-e1", 12)
    fibers = compute_fibers(generate_family(scenario.measure))
    return scenario, fibers, decompose(rasterize_flux(scenario.vector_field))


@pytest.fixture(scope="module")
def plaquette():
    """
    :return: plaquette scenario on 2 x 2 cells, its fibers and the curve measure of the circulation
    """
    scenario = build_scenario("plaquette", 2)
    fibers = compute_fibers(generate_family(scenario.measure))
    return scenario, fibers, decompose(rasterize_flux(scenario.vector_field))


# rasterization
###############


def test_flux_of_constant_field(uniform):
    scenario, _, pi = uniform
    graph = pi.graph
    h = scenario.measure.spacing
    # eleven edges per row, the upper face is inert
    assert graph.n_edges == 12 * 11
    assert np.allclose(graph.flux, h)
    assert np.all(graph.axis == 0)
    assert np.all(graph.sign == 1)
    assert graph.imbalance.sum() == pytest.approx(0.0, abs=1e-12)


def test_rasterize_rejects_long_fields(uniform):
    scenario, _, _ = uniform
    with pytest.raises(NotAdmissibleError):
        rasterize_flux(scenario.vector_field.scaled(2.0))


# decomposition
###############


def test_constant_field_decomposes_into_rows(uniform):
    scenario, _, pi = uniform
    h = scenario.measure.spacing
    summary = pi.summary()
    assert summary["paths"] == 12
    assert summary["cycles"] == 0
    for curve in pi.curves:
        assert curve.kind is CurveKind.PATH
        assert curve.edges.size == 11
        assert curve.weight == pytest.approx(h)
        assert curve.length == pytest.approx(11 * h)
        assert curve.times[0] == 0.0 and curve.times[-1] == 1.0
    assert conservation_error(pi) <= 1e-12
    assert np.abs(pi.residual).max() <= 1e-12


def test_reconstruct_constant_field(uniform):
    scenario, _, pi = uniform
    assert np.allclose(reconstruct_field(pi).components, scenario.vector_field.components, atol=1e-12)


def test_marginals_of_constant_field(uniform):
    scenario, fibers, pi = uniform
    measure = scenario.measure
    b = phi(scenario.vector_field, fibers)
    inside = measure.interior(1).astype(float)
    one = GridFunction(np.ones(measure.shape), measure)
    pairs = [(scenario.g * inside, scenario.f), (one * inside, scenario.g)]
    err1, err2 = verify_marginals(pi, b, pairs)
    assert err1 <= 1e-10
    assert err2 <= 1e-10


def test_marginals_along_the_flux():
    errors = []
    for n in (16, 32):
        scenario = build_scenario("2d-e1", n)
        measure = scenario.measure
        fibers = compute_fibers(generate_family(measure))
        b = phi(scenario.vector_field, fibers)
        pi = decompose(rasterize_flux(scenario.vector_field))
        rows = np.zeros(measure.shape)
        rows[:, 1:-1] = 1.0
        x1 = scenario.f
        # g grows along the rows, the segment integrals see its mean and the cells its left value
        err1, _ = verify_marginals(pi, b, [(x1 * rows, x1)])
        h = measure.spacing
        assert 0.25 * h <= err1 <= 0.75 * h
        errors.append(err1)
    assert 1.6 <= errors[0] / errors[1] <= 2.4


def test_plaquette_is_one_cycle(plaquette):
    scenario, _, pi = plaquette
    summary = pi.summary()
    assert summary["paths"] == 0
    assert summary["cycles"] == 1
    cycle = pi.curves[0]
    assert cycle.edges.size == 4
    assert cycle.weight == pytest.approx(0.5 / np.sqrt(2))
    # a cycle closes on its first node
    assert cycle.nodes[0] == cycle.nodes[-1]
    assert conservation_error(pi) <= 1e-12
    assert np.allclose(reconstruct_field(pi).components, scenario.vector_field.components, atol=1e-12)


def test_plaquette_marginals(plaquette):
    scenario, fibers, pi = plaquette
    measure = scenario.measure
    b = phi(scenario.vector_field, fibers)
    one = GridFunction(np.ones(measure.shape), measure)
    err1, err2 = verify_marginals(pi, b, [(one, scenario.f)])
    assert err1 <= 1e-10
    # the corner cell has |v| = 1 but carries two lattice edges of weight 1 / sqrt(2)
    assert err2 == pytest.approx(1 / np.sqrt(2) - 0.25 * (1 + np.sqrt(2)), abs=1e-10)


def test_interval_is_one_path():
    scenario = build_scenario("1d-strip", 2)
    pi = decompose(rasterize_flux(scenario.vector_field))
    assert pi.summary()["paths"] == 1
    assert pi.summary()["cycles"] == 0
    # in one dimension the flux through a face carries no spacing factor
    assert pi.curves[0].weight == pytest.approx(1.0)
    assert pi.curves[0].edges.size == 7
    assert conservation_error(pi) <= 1e-12


def test_plaquette_on_a_larger_grid():
    scenario = build_scenario("plaquette", 8)
    pi = decompose(rasterize_flux(scenario.vector_field))
    assert pi.summary()["cycles"] == 1
    assert pi.summary()["paths"] == 0
    cycle = pi.curves[0]
    # the central cells 3 and 4 of each axis
    assert sorted(set(cycle.nodes.tolist())) == [3 * 8 + 3, 3 * 8 + 4, 4 * 8 + 3, 4 * 8 + 4]
    assert cycle.weight == pytest.approx(0.125 / np.sqrt(2))


def test_decompose_rejects_inconsistent_imbalance(uniform):
    _, _, pi = uniform
    graph = pi.graph
    imbalance = graph.imbalance.copy()
    imbalance[0] += 1e-3
    broken = replace(graph, imbalance=imbalance)
    with pytest.raises(InconsistentFluxError):
        decompose(broken)
