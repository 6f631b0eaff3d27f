"""
:Title:        WEIGHTED-BV
:Created:      October-2026
:Authors:      weighted_bv developers

Default configuration. Changes from the default values are passed as a json config file or as command line flags.
"""
from typing import Any, Optional

from pydantic import BaseModel, field_validator


class Subscriptable(BaseModel, extra="allow"):
    def __getitem__(self, __name: str) -> Any:
        return getattr(self, __name)

    def __setitem__(self, __name: str, __value: Any) -> None:
        setattr(self, __name, __value)

    def keys(self) -> Any:
        return self.model_dump().keys()

    def update(self, new_values: dict[Any, Any]) -> None:
        for key, val in new_values.items():
            if isinstance(val, dict):
                getattr(self, key).update(val)
            else:
                setattr(self, key, val)

    def items(self) -> Any:
        return self.model_dump().items()

    def values(self) -> Any:
        return self.model_dump().values()


def _check_decreasing(values, name):
    if values is None:
        return values
    assert len(values) > 0, f"{name} must not be empty"
    assert all(v > 0 for v in values), f"{name} must be positive, got {values}"
    assert all(a > b for a, b in zip(values, values[1:])), f"{name} must be strictly decreasing, got {values}"
    return values


class Analysis(Subscriptable):
    command: str = "tv"
    scenario: Optional[str] = "uniform-square"
    measure: Optional[str] = None
    function: Optional[str] = None
    # cells per axis of the builtin scenarios
    resolution: int = 32
    folder_output: str = "./outputs/"
    output_format: str = "json"
    overwrite_output: bool = True
    write_csv: bool = True
    seed: int = 7

    @field_validator("output_format")
    @classmethod
    def _known_format(cls, value):
        assert value in ("json", "yml"), f"Output format must be json or yml, got {value}"
        return value


class Tolerances(Subscriptable):
    tol: float = 1e-9
    gap_tol: float = 1e-6
    trace_tol: float = 1e-2
    # None means 10 h Lip(f)
    incl_tol: Optional[float] = None
    stab_tol: float = 1e-2
    equivalence_rel_tol: float = 0.05
    lip_bias_factor: float = 1.25
    marginal_tol: float = 1e-8
    leibniz_factor: float = 8.0

    @field_validator("tol", "gap_tol", "trace_tol", "incl_tol", "stab_tol", "equivalence_rel_tol", "lip_bias_factor",
                     "marginal_tol", "leibniz_factor")
    @classmethod
    def _positive(cls, value):
        assert value is None or value > 0, f"Tolerances must be positive, got {value}"
        return value


class Schedules(Subscriptable):
    M_schedule: list[float] = [2.0, 4.0, 8.0, 16.0, 32.0]
    # mollification scales as multiples of the grid spacing, used when eps_schedule is None
    eps_factors: list[float] = [6.0, 4.0, 2.0]
    eps_schedule: Optional[list[float]] = None
    # dilations of a box in cells, from coarse to fine
    shrink_schedule: list[int] = [4, 2, 1]
    stages: int = 2

    @field_validator("M_schedule")
    @classmethod
    def _increasing(cls, value):
        assert len(value) > 0 and all(m > 0 for m in value), f"M_schedule must hold positive bounds, got {value}"
        assert all(a < b for a, b in zip(value, value[1:])), f"M_schedule must be strictly increasing, got {value}"
        return value

    @field_validator("eps_factors", "eps_schedule", "shrink_schedule")
    @classmethod
    def _decreasing(cls, value, info):
        return _check_decreasing(value, info.field_name)


class Solver(Subscriptable):
    max_iterations: int = 100000
    check_every: int = 50
    power_iterations: int = 100
    theta: float = 1.0
    # restart from the averaged iterate once its gap dropped below this fraction of the gap at the last restart
    restart_factor: float = 0.5
    oracle_solver: str = "highs"
    oracle_facets: int = 64
    oracle_max_cells: int = 100


class Bundle(Subscriptable):
    bump_radius_cells: float = 3.0
    stride_cells: int = 4
    div_penalty: float = 1.0
    svd_threshold: float = 1e-6
    lstsq_method: str = "direct"
    lstsq_max_iterations: int = 5000

    @field_validator("lstsq_method")
    @classmethod
    def _known_method(cls, value):
        assert value in ("direct", "cg"), f"Least squares method must be direct or cg, got {value}"
        return value


class DerivationSettings(Subscriptable):
    probe_budget: int = 64
    bump_margin: int = 2


class SuperpositionSettings(Subscriptable):
    # relative to the total edge flux
    min_weight_rel: float = 1e-12


class Config(Subscriptable):
    analysis: Analysis = Analysis()
    tolerances: Tolerances = Tolerances()
    schedules: Schedules = Schedules()
    solver: Solver = Solver()
    bundle: Bundle = Bundle()
    derivation: DerivationSettings = DerivationSettings()
    superposition: SuperpositionSettings = SuperpositionSettings()

    def eps_schedule(self, spacing):
        """ mollification scales of a run

        :param spacing: grid spacing h
        :return: strictly decreasing list of scales """
        if self.schedules.eps_schedule is not None:
            return list(self.schedules.eps_schedule)
        return [factor * spacing for factor in self.schedules.eps_factors]
