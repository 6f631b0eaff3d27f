"""
:Title:        WEIGHTED-BV
:Created:      October-2026
:Authors:      weighted_bv developers

Sobolev W^{1,1} calculus on weighted grids: the W^{1,1} norm with the tangential gradient, the
relaxed slope (from asymptotic Lipschitz constants) and the tangential relaxed slope (from
tangential gradients) of mollified approximations, and the inclusion between the two.
"""
import logging
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .grid import GridFunction, l1_norm
from .operators import asymptotic_lipschitz, lipschitz_constant, mollify
from .tangent_bundle import tangential_gradient
from ..utils import NotStabilizedError


class SlopeKind(str, Enum):
    RS = "RS"
    TRS = "TRS"


@dataclass
class SlopeEstimate:
    slope: GridFunction
    kind: SlopeKind
    schedule: list
    stabilized: bool
    trace: list = field(default_factory=list)


@dataclass
class InclusionReport:
    violation: float
    incl_tol: float
    relaxed: SlopeEstimate
    tangential: SlopeEstimate

    @property
    def pointwise_ok(self):
        """ TRS stays below RS + incl_tol on every support cell """
        return self.violation == 0.0


def w11_norm(f, fibers):
    """ ||f||_{L^1(mu)} + ||grad_mu f||_{L^1(mu)} """
    gradient = tangential_gradient(f, fibers)
    return l1_norm(f) + float(np.sum(gradient.norms() * f.measure.mass))


def _slope(f, kind, fibers):
    if kind is SlopeKind.RS:
        return asymptotic_lipschitz(f).values
    return tangential_gradient(f, fibers).norms()


def _averaged_slopes(slopes, measure, kind, stages, trace_tol, raise_on_failure, schedule):
    """ tail averages of the slopes per stage, uniform weights over the last half of the stage """
    n = len(slopes)
    stages = max(1, min(int(stages), n))
    averages, trace = [], []
    for stage in range(1, stages + 1):
        end = math.ceil(stage * n / stages)
        begin = end // 2
        average = np.mean(slopes[begin:end], axis=0)
        entry = {"stage": stage, "indices": [begin, end], "weight": 1.0 / (end - begin)}
        if averages:
            entry["l1_change"] = float(np.sum(np.abs(average - averages[-1]) * measure.mass))
        averages.append(average)
        trace.append(entry)
    slope = GridFunction(np.where(measure.support, averages[-1], 0.0), measure)
    stabilized = True
    if len(trace) > 1:
        change = trace[-1]["l1_change"]
        tolerance = trace_tol * (1 + l1_norm(slope))
        stabilized = change <= tolerance
        if not stabilized:
            if raise_on_failure:
                raise NotStabilizedError(change, tolerance)
            warnings.warn(f"{kind.value} slope not stabilized: L1 change {change:.3e} above {tolerance:.3e}")
    return SlopeEstimate(slope, kind, list(schedule), stabilized, trace)


def relaxed_slope(f, kind, eps_schedule, stages=2, fibers=None, trace_tol=1e-2, raise_on_failure=True):
    """
    Relaxed slope of f along the mollifications f_eps: the slopes are averaged over the tail of every
    stage until the averages are Cauchy in L^1(mu) within trace_tol

    :param f: grid function
    :param kind: RS (asymptotic Lipschitz constant) or TRS (norm of the tangential gradient)
    :param eps_schedule: strictly decreasing mollification scales
    :param stages: number of nested prefixes of the schedule
    :param fibers: fiber field, required for TRS
    :param trace_tol: relative tolerance of the Cauchy check
    :param raise_on_failure: raise NotStabilizedError instead of warning
    :return estimate: slope estimate
    """
    kind = SlopeKind(kind)
    if kind is SlopeKind.TRS and fibers is None:
        raise ValueError("The tangential relaxed slope needs the fibers of the measure")
    sequence = [mollify(f, eps) for eps in eps_schedule]
    slopes = [_slope(f_eps, kind, fibers) for f_eps in sequence]
    return _averaged_slopes(slopes, f.measure, kind, stages, trace_tol, raise_on_failure, eps_schedule)


def closability_probe(f0, fibers, eps_schedule, terms=512, stages=2, trace_tol=1e-2, gradient=tangential_gradient):
    """
    Tangential relaxed slope of the vanishing sequence f_n = mollify(f0, eps_n) / n, n = 1, ..., terms;
    the schedule is held at its last scale once exhausted. Closability of the gradient means the
    slope tends to zero, as 1 / n for the tangential gradient

    :param f0: grid function
    :param fibers: fiber field
    :param eps_schedule: mollification scales
    :param terms: length of the sequence
    :param gradient: gradient operator (f, fibers) -> vector field
    :return estimate: slope estimate of the sequence
    """
    assert terms >= len(eps_schedule), f"The sequence needs at least {len(eps_schedule)} terms, got {terms}"
    mollified = [mollify(f0, eps) for eps in eps_schedule]
    slopes = [gradient(mollified[min(n, len(mollified)) - 1] / n, fibers).norms()
              for n in range(1, terms + 1)]
    return _averaged_slopes(slopes, f0.measure, SlopeKind.TRS, stages, trace_tol, False, eps_schedule)


def extended_tangential_gradient(f, fibers, eps_schedule):
    """
    Tangential gradient of a W^{1,1} function as the limit of grad_mu f_eps along the schedule

    :param f: grid function
    :param fibers: fiber field
    :param eps_schedule: strictly decreasing mollification scales
    :return gradient: tangential gradient at the last scale
    :return trace: L^1(mu) distances between consecutive gradients
    """
    mass = f.measure.mass
    gradients = [tangential_gradient(mollify(f, eps), fibers) for eps in eps_schedule]
    trace = [float(np.sum(np.linalg.norm(a.components - b.components, axis=-1) * mass))
             for a, b in zip(gradients, gradients[1:])]
    return gradients[-1], trace


def w11_inclusion_check(f, fibers, eps_schedule, stages=2, incl_tol=None, trace_tol=1e-2):
    """
    Compares the tangential relaxed slope with the relaxed slope cellwise; the violation is the
    largest excess of TRS over RS beyond incl_tol

    :param f: grid function
    :param fibers: fiber field
    :param eps_schedule: mollification scales
    :param incl_tol: allowed excess, 10 h Lip(f) when None
    :return report: inclusion report
    """
    measure = f.measure
    if incl_tol is None:
        incl_tol = 10 * measure.spacing * lipschitz_constant(f)
    relaxed = relaxed_slope(f, SlopeKind.RS, eps_schedule, stages, trace_tol=trace_tol, raise_on_failure=False)
    tangential = relaxed_slope(f, SlopeKind.TRS, eps_schedule, stages, fibers, trace_tol, raise_on_failure=False)
    excess = (tangential.slope.values - relaxed.slope.values - incl_tol)[measure.support]
    violation = float(max(excess.max(), 0.0)) if excess.size else 0.0
    logging.info(f"Inclusion check: violation {violation:.3e} with tolerance {incl_tol:.3e}")
    return InclusionReport(violation, float(incl_tol), relaxed, tangential)
