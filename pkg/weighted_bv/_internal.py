"""
:Title:        WEIGHTED-BV
:Created:      October-2026
:Authors:      weighted_bv developers

Runs a command of the pipeline on a builtin scenario or on measure and function documents.
"""
import importlib.metadata
import logging
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .model.derivations import derivation_modulus, leibniz_div_bound, leibniz_div_residual, pairing_Lf, phi
from .model.grid import GridFunction, GridVectorField
from .model.operators import MollifierKernel, grid_gradient, lipschitz_constant, local_lipschitz, mollify
from .model.sobolev import closability_probe, extended_tangential_gradient, w11_inclusion_check, w11_norm
from .model.superposition import conservation_error, decompose, rasterize_flux, reconstruct_field, verify_marginals
from .model.tangent_bundle import compute_fibers, fiber_angle, generate_family, leibniz_check, tangential_gradient
from .model.total_variation import (TVFormulation, bv_membership, edge_window, tv_derivation, tv_localized,
                                    tv_measure_on_box, tv_relaxed)
from .postprocess.comparisons import CheckSuite, compare_formulations, relative_gap
from .postprocess.postprocess import Postprocess, grid_table
from .preprocess.extract_input_data import load_function, load_measure
from .preprocess.scenarios import Scenario, build_scenario
from .utils import StringUtils, setup_logger

# we setup the logger here
setup_logger()

COMMANDS = ("tv", "fibers", "w11", "derivation", "superpose", "equivalence-report")

# exit status of a run whose numerical checks failed
CHECK_FAILURE = 2

# scenarios whose superposition identities hold up to rounding
CLOSED_FORM = ("plaquette", "thin-strip", "1d-strip")


@dataclass(eq=False)
class Run:
    """
    State shared by the stages of a run
    """
    config: object
    scenario: Scenario
    checks: CheckSuite
    results: dict
    tables: dict
    fibers: object = None
    dual_report: object = None

    @property
    def measure(self):
        return self.scenario.measure

    @property
    def solver_options(self):
        solver = self.config.solver
        return {"max_iterations": solver.max_iterations, "check_every": solver.check_every,
                "power_iterations": solver.power_iterations, "theta": solver.theta,
                "restart_factor": solver.restart_factor}

    def get_fibers(self):
        if self.fibers is None:
            bundle = self.config.bundle
            StringUtils.print_stage("Tangent bundle")
            family = generate_family(self.measure, bundle.bump_radius_cells, bundle.stride_cells, bundle.div_penalty,
                                     bundle.lstsq_method, bundle.lstsq_max_iterations, self.config.tolerances.tol)
            self.fibers = compute_fibers(family, bundle.svd_threshold)
            self.results["family_size"] = len(family)
        return self.fibers


def _load_run(config):
    """ builds the scenario of a run from the builtin registry or from documents """
    analysis = config.analysis
    if analysis.measure is not None:
        assert analysis.function is not None, "A measure document needs a function document"
        measure = load_measure(analysis.measure)
        f = load_function(analysis.function, measure)
        g = GridFunction(np.ones(measure.shape), measure)
        field = GridVectorField(np.zeros((*measure.shape, measure.dim)), measure)
        name = os.path.splitext(os.path.basename(str(analysis.measure)))[0]
        return Scenario(name, "documents", measure, f, g, field)
    return build_scenario(analysis.scenario, analysis.resolution)


def run_tv(run):
    """ total variation in the four formulations and their comparison """
    config, f = run.config, run.scenario.f
    tolerances = config.tolerances
    h = run.measure.spacing
    StringUtils.print_stage("Dual total variation")
    member, dual = bv_membership(f, config.schedules.M_schedule, tolerances.stab_tol, tolerances.gap_tol,
                                 run.solver_options)
    run.dual_report = dual
    StringUtils.print_stage("Derivation total variation")
    derivation = tv_derivation(f, dual.M, run.get_fibers(), dual)
    StringUtils.print_stage("Relaxed total variation")
    eps_schedule = config.eps_schedule(h)
    lip = tv_relaxed(f, TVFormulation.RELAX_LIP, eps_schedule, tolerances.trace_tol)
    smooth = tv_relaxed(f, TVFormulation.RELAX_SMOOTH, eps_schedule, tolerances.trace_tol)
    reports = {"DUAL": dual, "DERIVATION": derivation, "RELAX_LIP": lip, "RELAX_SMOOTH": smooth}
    table, gaps = compare_formulations(reports)
    run.results["tv"] = {name: report.summary() for name, report in reports.items()}
    run.results["tv"]["bounded_variation"] = member
    run.results["tv_comparison"] = gaps.to_dict(orient="records")
    run.tables["tv_comparison"] = table
    run.tables["tv_field"] = grid_table(run.measure, f=f, v=dual.vector_field)

    run.checks.add("derivation_matches_dual", relative_gap(derivation.value, dual.value), 1e-6)
    run.results["tv"]["relaxations_compared"] = False
    if run.scenario.full_support:
        # fields cut at the window edge need the largest divergence bound
        _compare_on_window(run, max(config.schedules.M_schedule), eps_schedule)
    if run.scenario.region is not None:
        localized = tv_localized(f, dual.M, run.scenario.region, tolerances.gap_tol, run.solver_options)
        run.results["tv_localized"] = localized.summary()
        run.checks.add("localized_below_global", localized.value - dual.upper_bound, tolerances.tol)
    if run.scenario.box is not None:
        value, trace = tv_measure_on_box(f, dual.M, run.scenario.box, config.schedules.shrink_schedule,
                                         tolerances.gap_tol, run.solver_options)
        run.results["tv_on_box"] = {"box": run.scenario.box, "value": value, "trace": trace}
    if run.scenario.name == "atomic-cloud":
        run.checks.add("isolated_support_has_no_variation", dual.value, 1e-8)


def _compare_on_window(run, M, eps_schedule):
    """ the four formulations on the cells out of reach of the grid edge for the widest mollifier """
    config, f = run.config, run.scenario.f
    tolerances = config.tolerances
    measure = run.measure
    reach = MollifierKernel.build(eps_schedule[0], measure.spacing, measure.dim).reach
    window = edge_window(measure, reach)
    if window is None:
        logging.warning(f"No cell lies {reach} cells away from the grid edge, the relaxations are not compared")
        return
    dual = tv_localized(f, M, window, tolerances.gap_tol, run.solver_options)
    reports = {"DUAL": dual, "DERIVATION": tv_derivation(f, M, run.get_fibers(), dual),
               "RELAX_LIP": tv_relaxed(f, TVFormulation.RELAX_LIP, eps_schedule, tolerances.trace_tol, window),
               "RELAX_SMOOTH": tv_relaxed(f, TVFormulation.RELAX_SMOOTH, eps_schedule, tolerances.trace_tol, window)}
    table, gaps = compare_formulations(reports)
    run.results["tv"]["relaxations_compared"] = True
    run.results["tv_window"] = {"box": window.boxes[0], **{name: report.value for name, report in reports.items()}}
    run.results["tv_window_comparison"] = gaps.to_dict(orient="records")
    run.tables["tv_window_comparison"] = table
    # the lattice Lipschitz constant overestimates the gradient norm by O(h / eps)
    lip_tol = tolerances.equivalence_rel_tol + tolerances.lip_bias_factor * measure.spacing / eps_schedule[-1]
    for first, second, gap in gaps[["first", "second", "relative_gap"]].itertuples(index=False):
        lip = "RELAX_LIP" in (first, second)
        run.checks.add(f"window_{first.lower()}_vs_{second.lower()}", gap,
                       lip_tol if lip else tolerances.equivalence_rel_tol)


def run_fibers(run):
    """ tangent bundle ranks and directions """
    fibers = run.get_fibers()
    measure = run.measure
    support = measure.support
    ranks = fibers.ranks[support]
    run.results["fibers"] = {"rank_histogram": np.bincount(ranks, minlength=measure.dim + 1).tolist(),
                             "tau": fibers.tau}
    # basis matrix entries in row-major order, columns beyond the rank of the cell are zero
    bases = {f"basis{k + 1}{j + 1}": np.where(fibers.ranks > j, fibers.bases[..., k, j], 0.0)
             for k in range(measure.dim) for j in range(measure.dim)}
    run.tables["fibers"] = grid_table(measure, rank=fibers.ranks, sigma=fibers.singular_values, **bases)
    name = run.scenario.name
    if name == "atomic-cloud":
        run.checks.add("atoms_have_rank_zero", int(ranks.max()), 0)
    elif name == "thin-strip":
        interior = support & measure.interior(1)
        run.checks.add("strip_rank_one", int(np.abs(fibers.ranks[interior] - 1).max()), 0)
        angles = fiber_angle(fibers, np.eye(measure.dim)[0])[interior]
        run.checks.add("strip_fiber_angle_degrees", float(np.nanmax(angles)), 5.0)
    elif run.scenario.full_support and np.any(measure.interior(1)):
        interior = measure.interior(1)
        run.checks.add("full_support_full_rank", int(np.abs(fibers.ranks[interior] - measure.dim).max()), 0)


def run_w11(run):
    """ Sobolev norm, relaxed slopes, their inclusion and the tangential Leibniz rule """
    config = run.config
    tolerances = config.tolerances
    fibers = run.get_fibers()
    f, g = run.scenario.f, run.scenario.g
    measure = run.measure
    h = measure.spacing
    eps_schedule = config.eps_schedule(h)
    inclusion = w11_inclusion_check(f, fibers, eps_schedule, config.schedules.stages, tolerances.incl_tol,
                                    tolerances.trace_tol)
    leibniz = leibniz_check(f, g, fibers)
    leibniz_bound = tolerances.leibniz_factor * h * lipschitz_constant(f) * lipschitz_constant(g) + tolerances.tol
    probe = closability_probe(f, fibers, eps_schedule, stages=config.schedules.stages, trace_tol=tolerances.trace_tol)
    reference = float(np.sum(inclusion.tangential.slope.values * measure.mass))
    _, extended_trace = extended_tangential_gradient(f, fibers, eps_schedule)
    run.results["w11"] = {"norm": w11_norm(f, fibers), "pointwise_ok": inclusion.pointwise_ok,
                          "inclusion_violation": inclusion.violation,
                          "incl_tol": inclusion.incl_tol, "leibniz_residual": leibniz,
                          "relaxed_slope_trace": inclusion.relaxed.trace,
                          "tangential_slope_trace": inclusion.tangential.trace,
                          "closability_slope": float(np.sum(probe.slope.values * measure.mass)),
                          "extended_gradient_trace": extended_trace}
    run.tables["slopes"] = grid_table(measure, f=f, rs=inclusion.relaxed.slope, trs=inclusion.tangential.slope,
                                      grad_mu=tangential_gradient(f, fibers))
    run.checks.add("trs_below_rs", inclusion.violation, 0.0)
    run.checks.add("tangential_leibniz", leibniz, leibniz_bound)
    run.checks.add("closability", float(np.sum(probe.slope.values * measure.mass)),
                   tolerances.trace_tol * max(reference, 1.0))
    if run.scenario.name == "thin-strip":
        strip = measure.support & measure.interior(1)
        if np.any(strip):
            gap = inclusion.relaxed.slope.values[strip] - inclusion.tangential.slope.values[strip]
            run.checks.add("strip_slope_gap", 0.5 - float(gap.min()), 0.0)


def _field(run):
    """ vector field of the derivation and superposition stages """
    field = run.scenario.vector_field
    if field.sup_norm() == 0 and run.scenario.description == "documents":
        if run.dual_report is None:
            run_tv(run)
        field = run.dual_report.vector_field
    return field


def run_derivation(run):
    """ isometry of the field-to-derivation map, empirical modulus and the pairing on a box """
    config = run.config
    tolerances = config.tolerances
    fibers = run.get_fibers()
    measure = run.measure
    field = _field(run)
    b = phi(field, fibers, tolerances.tol)
    modulus = derivation_modulus(b, config.derivation.probe_budget, config.analysis.seed)
    residual = leibniz_div_residual(b, run.scenario.g)
    bound = tolerances.leibniz_factor * leibniz_div_bound(b, run.scenario.g) + tolerances.tol
    run.results["derivation"] = {"sup_norm": float(b.bound_field.values.max()), "leibniz_div_residual": residual,
                                 "leibniz_div_bound": bound}
    if run.scenario.box is not None:
        run.results["derivation"]["pairing"] = pairing_Lf(run.scenario.f, b, run.scenario.box,
                                                          config.derivation.bump_margin)
    run.tables["derivation"] = grid_table(measure, v=b.vector_field, div=b.divergence, norm=b.bound_field,
                                          modulus=modulus)
    canonical = field.with_components(np.where(measure.active_components(), field.components, 0.0))
    run.checks.add("isometry", float(np.abs(b.bound_field.values - canonical.norms()).max()), 0.0)
    run.checks.add("leibniz_div", residual, bound)
    full = measure.support & (fibers.ranks == measure.dim) & measure.interior(1)
    excess = (modulus.values - b.bound_field.values)[measure.support]
    run.checks.add("modulus_below_norm", float(excess.max()) if excess.size else 0.0, tolerances.tol)
    if np.any(full):
        deficit = (b.bound_field.values - modulus.values)[full]
        run.checks.add("modulus_attains_norm", float(deficit.max()), 1e-6)


def run_superpose(run):
    """ rasterized flux, its decomposition into curves and the superposition identities """
    config = run.config
    tolerances = config.tolerances
    fibers = run.get_fibers()
    measure = run.measure
    field = _field(run)
    b = phi(field, fibers, tolerances.tol)
    graph = rasterize_flux(b.vector_field, tolerances.tol)
    total = float(graph.flux.sum())
    pi = decompose(graph, config.superposition.min_weight_rel * total)
    ones = GridFunction(np.ones(measure.shape), measure)
    pairs = [(run.scenario.g, run.scenario.f), (ones, run.scenario.f), (ones, run.scenario.g)]
    err1, err2 = verify_marginals(pi, b, pairs)
    _, length_err = verify_marginals(pi, b, pairs[1:2])
    rebuilt = reconstruct_field(pi)
    scale = max(1.0, total)
    run.results["superposition"] = {**pi.summary(), "edges": graph.n_edges, "err1": err1, "err2": err2,
                                    "length_err": length_err,
                                    "curves": [{"kind": c.kind, "weight": c.weight, "nodes": c.nodes,
                                                "length": c.length} for c in pi.curves]}
    run.checks.add("flux_conservation", conservation_error(pi), 1e-12 * scale)
    # midpoint defect of g along the segments and partial fibers at the window edge
    slack = 3 * measure.spacing
    closed_form = run.scenario.name in CLOSED_FORM
    run.checks.add("superposition_err1", err1, (tolerances.marginal_tol + (0.0 if closed_form else slack)) * scale)
    run.checks.add("superposition_err2", err2, (tolerances.marginal_tol + slack) * scale)
    axis_aligned = np.count_nonzero(b.vector_field.components, axis=-1).max() <= 1
    if axis_aligned:
        run.checks.add("curve_length", length_err, tolerances.marginal_tol * scale)
    run.checks.add("field_round_trip", float(np.abs(rebuilt.components - b.vector_field.components).max()),
                   1e-9 * max(1.0, field.sup_norm()))


def _random_hat(rng, measure):
    center = rng.uniform(0.35, 0.65, size=measure.dim)
    radius = rng.uniform(0.1, 0.2)
    height = rng.uniform(-1.0, 1.0)
    distance = np.linalg.norm(measure.centers - center, axis=-1)
    return GridFunction(height * np.clip(1 - distance / radius, 0.0, None), measure), abs(height) / radius


def run_mollification_checks(run, n_functions=20):
    """ support growth, uniform closeness and gradient bounds of mollified Lipschitz functions """
    measure = run.measure
    h = measure.spacing
    rng = np.random.default_rng(run.config.analysis.seed)
    growth, closeness, gradient = 0.0, 0.0, 0.0
    for _ in range(n_functions):
        f, lip = _random_hat(rng, measure)
        eps = h * rng.choice([2.0, 3.0])
        smooth = mollify(f, eps)
        reach = int(math.ceil(eps / h))
        grown = ndimage.binary_dilation(f.values != 0, iterations=reach,
                                        structure=ndimage.generate_binary_structure(measure.dim, measure.dim))
        growth = max(growth, float(np.abs(smooth.values[~grown]).max(initial=0.0)))
        closeness = max(closeness, float((np.abs(smooth.values - f.values) - lip * eps).max()))
        interior = measure.interior(reach + 1)
        steepest = np.abs(grid_gradient(smooth).components).max(axis=-1)
        bound = local_lipschitz(f, 2 * eps).values
        gradient = max(gradient, float((steepest - bound)[interior].max(initial=0.0)))
    run.results["mollification"] = {"support_growth": growth, "closeness_excess": closeness,
                                    "gradient_excess": gradient}
    run.checks.add("mollified_support", growth, 0.0)
    run.checks.add("mollified_closeness", closeness, 1e-12)
    run.checks.add("mollified_gradient", gradient, 1e-9)


def run_oracle_check(run):
    """ dense oracle bracket against the primal-dual value on a coarse copy of the scenario """
    config = run.config
    try:
        from .model.lp_oracle import dual_oracle
    except ImportError as error:
        logging.warning(f"Dense oracle skipped: {error}")
        run.results["oracle"] = "skipped"
        return
    from .model.total_variation import tv_dual
    if run.scenario.description == "documents":
        scenario = run.scenario
    else:
        scenario = build_scenario(run.scenario.name, 8)
    if scenario.measure.support.sum() > config.solver.oracle_max_cells or scenario.measure.dim > 2:
        run.results["oracle"] = "skipped"
        return
    M = config.schedules.M_schedule[-1]
    gap_tol = config.tolerances.gap_tol
    report = tv_dual(scenario.f, M, gap_tol, run.solver_options)
    bounds = dual_oracle(scenario.f, M, config.solver.oracle_facets, config.solver.oracle_solver,
                         config.solver.oracle_max_cells, gap_tol)
    run.results["oracle"] = {"value": report.value, "gap": report.gap, "lower": bounds.lower, "upper": bounds.upper,
                             "rounds": bounds.rounds}
    run.checks.add("oracle_bracket", bounds.upper - bounds.lower, gap_tol * (1 + abs(bounds.upper)))
    run.checks.add("oracle_upper", report.value - bounds.upper, gap_tol * (1 + abs(bounds.upper)))
    run.checks.add("oracle_lower", bounds.lower - report.value, report.gap + gap_tol * (1 + abs(bounds.lower)))


def run_equivalence_report(run):
    """ the full check suite """
    run_tv(run)
    run_fibers(run)
    run_w11(run)
    run_derivation(run)
    run_superpose(run)
    run_mollification_checks(run)
    run_oracle_check(run)


HANDLERS = {"tv": run_tv, "fibers": run_fibers, "w11": run_w11, "derivation": run_derivation,
            "superpose": run_superpose, "equivalence-report": run_equivalence_report}


def main(config):
    """
    This function runs a command of weighted_bv,
    it is executed in the __main__.py script

    :param config: A config instance used for the run
    :return status: 0 if all checks passed, 2 otherwise
    """
    try:
        version = importlib.metadata.version("weighted_bv")
    except importlib.metadata.PackageNotFoundError:
        version = "unknown"
    logging.info(f"Running weighted_bv version: {version}")

    analysis = config.analysis
    command = analysis.command
    assert command in HANDLERS, f"Unknown command '{command}', choose one of {COMMANDS}"
    scenario = _load_run(config)
    logging.info(f"Command {command} on {scenario.name}: {scenario.description}, grid {scenario.measure.shape}")
    run = Run(config, scenario, CheckSuite(), {}, {})
    HANDLERS[command](run)

    measure = scenario.measure
    report = {"command": command, "scenario": scenario.name, "resolution": analysis.resolution,
              "seed": analysis.seed,
              "grid": {"shape": measure.shape, "spacing": measure.spacing, "origin": measure.origin,
                       "total_mass": measure.total_mass, "support_cells": int(measure.support.sum())},
              "results": run.results, "checks": run.checks.checks,
              "status": "pass" if run.checks.passed else "fail"}
    out_folder = StringUtils.setup_output_folder(analysis)
    postprocess = Postprocess(out_folder, analysis.output_format, analysis.overwrite_output)
    postprocess.write_file("report", report)
    if analysis.write_csv:
        for name, table in run.tables.items():
            postprocess.write_table(name, table)

    StringUtils.print_stage("Checks")
    for check in run.checks.checks:
        logging.info(f"{'PASS' if check['passed'] else 'FAIL'} {check['name']}: "
                     f"{check['residual']:.6e} (threshold {check['threshold']:.6e})")
    if not run.checks.passed:
        return CHECK_FAILURE
    return 0
