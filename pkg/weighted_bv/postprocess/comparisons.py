"""
:Title:        WEIGHTED-BV
:Created:      October-2026
:Authors:      weighted_bv developers

Compares the total variation formulations and collects named numerical checks.
"""
import itertools
import logging

import pandas as pd


def relative_gap(a, b):
    """ |a - b| relative to the larger magnitude, absolute below one """
    return abs(a - b) / max(1.0, abs(a), abs(b))


def compare_formulations(reports):
    """
    Comparison table of the formulations and their pairwise relative gaps

    :param reports: dict formulation name -> TV report
    :return table: one row per formulation
    :return gaps: one row per pair
    """
    table = pd.DataFrame([{"formulation": name, "value": report.value, "converged": report.converged,
                           "gap": report.gap} for name, report in reports.items()])
    gaps = pd.DataFrame([{"first": a, "second": b, "relative_gap": relative_gap(reports[a].value, reports[b].value)}
                         for a, b in itertools.combinations(reports, 2)])
    return table, gaps


class CheckSuite:
    """
    Named checks of a run; a check passes when its residual does not exceed its threshold
    """

    def __init__(self):
        self.checks = []

    def add(self, name, residual, threshold):
        """
        :param name: name of the check
        :param residual: attained residual
        :param threshold: largest admissible residual
        :return passed: whether the check passed
        """
        passed = bool(residual <= threshold)
        self.checks.append({"name": name, "passed": passed, "residual": float(residual), "threshold": float(threshold)})
        if not passed:
            logging.warning(f"Check {name} failed: residual {residual:.6e} above {threshold:.6e}")
        return passed

    def add_flag(self, name, passed):
        """ boolean check, residual 0 or 1 """
        return self.add(name, 0.0 if passed else 1.0, 0.0)

    @property
    def passed(self):
        return all(check["passed"] for check in self.checks)

    def failures(self):
        return [check for check in self.checks if not check["passed"]]

    def __len__(self):
        return len(self.checks)
