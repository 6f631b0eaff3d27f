"""
:Title:        WEIGHTED-BV
:Created:      October-2026
:Authors:      weighted_bv developers

Tests of the documents, the config and the report writers.
"""
import json
import os

import numpy as np
import pandas as pd
import pytest
import yaml
from pydantic import ValidationError

from weighted_bv.model.default_config import Config
from weighted_bv.postprocess.postprocess import Postprocess, grid_table, json_ready
from weighted_bv.preprocess.extract_input_data import (emit_function, emit_measure, field_expression, load_function,
                                                       load_measure)
from weighted_bv.preprocess.scenarios import SCENARIOS, build_scenario
from weighted_bv.utils import MalformedSpecError, NegativeWeightError


# fixtures
##########


@pytest.fixture
def measure_doc():
    """
    :return: measure document on 3 x 2 cells with flat weights
    """
    return {"shape": [3, 2], "spacing": 0.5, "weights": [1.0, 2.0, 0.0, 1.0, 3.0, 1.0]}


# documents
###########


def test_load_measure(measure_doc):
    measure = load_measure(measure_doc)
    assert measure.shape == (3, 2)
    assert measure.origin == (0.0, 0.0)
    # row-major order
    assert measure.weights[1, 0] == 0.0
    assert measure.weights[2, 0] == 3.0
    assert emit_measure(measure) == {**measure_doc, "origin": [0.0, 0.0]}


def test_load_function(measure_doc):
    measure = load_measure(measure_doc)
    f = load_function({"values": [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]}, measure)
    assert f.values[2, 1] == 5.0
    assert emit_function(f) == {"values": [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]}
    x2 = load_function({"expr": {"name": "coordinate", "axis": 1}}, measure)
    assert np.allclose(x2.values[0], [0.25, 0.75])


def test_documents_from_files(tmp_path, measure_doc):
    path = tmp_path / "measure.json"
    path.write_text(json.dumps(measure_doc))
    assert load_measure(str(path)).total_mass == pytest.approx(8 * 0.25)
    broken = tmp_path / "broken.json"
    broken.write_text("{\"shape\": [3, 2],")
    with pytest.raises(MalformedSpecError):
        load_measure(str(broken))
    with pytest.raises(FileNotFoundError):
        load_measure(str(tmp_path / "missing.json"))


def test_malformed_documents(measure_doc):
    with pytest.raises(MalformedSpecError):
        load_measure({**measure_doc, "weight_expr": {"name": "uniform"}})
    with pytest.raises(MalformedSpecError):
        load_measure({"shape": [3, 2], "spacing": 0.5})
    with pytest.raises(MalformedSpecError):
        load_measure({**measure_doc, "colour": "red"})
    with pytest.raises(MalformedSpecError):
        load_measure({**measure_doc, "origin": [0.0]})
    with pytest.raises(MalformedSpecError):
        load_measure({**measure_doc, "weights": [1.0, 2.0]})
    with pytest.raises(NegativeWeightError):
        load_measure({**measure_doc, "weights": [1.0, 2.0, -1.0, 1.0, 3.0, 1.0]})
    measure = load_measure(measure_doc)
    with pytest.raises(MalformedSpecError):
        load_function({"values": [0.0], "expr": {"name": "constant", "value": 1.0}}, measure)
    with pytest.raises(MalformedSpecError):
        load_function({"expr": {"name": "spiral"}}, measure)
    with pytest.raises(MalformedSpecError):
        load_function({"expr": {"name": "coordinate", "axis": 2}}, measure)


def test_weight_expressions():
    strip = load_measure({"shape": [8, 8], "spacing": 0.125,
                          "weight_expr": {"name": "strip", "axis": 1, "index": 4, "width": 2}})
    assert strip.support.sum() == 16
    assert np.all(strip.support[:, 4:6])
    atoms = load_measure({"shape": [4, 4], "spacing": 0.25,
                          "weight_expr": {"name": "atoms", "cells": [[0, 0], [3, 2]], "masses": [1.0, 2.0]}})
    assert atoms.total_mass == pytest.approx(3 * 0.0625)
    with pytest.raises(MalformedSpecError):
        load_measure({"shape": [4, 4], "spacing": 0.25, "weight_expr": {"name": "atoms", "cells": [[4, 0]]}})
    box = load_measure({"shape": [4, 4], "spacing": 0.25,
                        "weight_expr": {"name": "box", "lo": [1, 1], "hi": [3, 4], "value": 2.0}})
    assert box.support.sum() == 6


def test_field_expressions():
    measure = load_measure({"shape": [2, 2], "spacing": 0.5, "weight_expr": {"name": "uniform"}})
    components = field_expression({"name": "circulation", "cells": [[0, 0], [1, 0], [1, 1], [0, 1]]}, measure)
    assert np.array_equal(components[0, 0], [1.0, -1.0])
    assert np.array_equal(components[1, 1], [0.0, 0.0])
    with pytest.raises(MalformedSpecError):
        field_expression({"name": "circulation", "cells": [[0, 0], [1, 1]]}, measure)
    with pytest.raises(MalformedSpecError):
        field_expression({"name": "constant", "direction": [1.0, 0.0, 0.0]}, measure)


@pytest.mark.parametrize("name", SCENARIOS)
def test_builtin_scenarios(name):
    scenario = build_scenario(name, 8)
    assert scenario.vector_field.sup_norm() <= 1 + 1e-12
    assert scenario.f.measure is scenario.measure
    assert scenario.description


def test_unknown_scenario():
    with pytest.raises(KeyError):
        build_scenario("moebius-band", 8)


# config
########


def test_config_defaults():
    config = Config()
    assert config.analysis.command == "tv"
    assert config.tolerances["gap_tol"] == 1e-6
    assert config.eps_schedule(0.25) == [1.5, 1.0, 0.5]
    config.schedules.eps_schedule = [0.5, 0.25]
    assert config.eps_schedule(0.25) == [0.5, 0.25]
    config.update({"analysis": {"seed": 3}})
    assert config.analysis.seed == 3


def test_config_validation():
    with pytest.raises(ValidationError):
        Config(schedules={"M_schedule": [4.0, 2.0]})
    with pytest.raises(ValidationError):
        Config(schedules={"eps_schedule": [0.1, 0.2]})
    with pytest.raises(ValidationError):
        Config(analysis={"output_format": "xml"})
    with pytest.raises(ValidationError):
        Config(bundle={"lstsq_method": "qr"})
    for name in ("lip_bias_factor", "leibniz_factor", "incl_tol"):
        with pytest.raises(ValidationError):
            Config(tolerances={name: -1.0})
    assert Config(tolerances={"incl_tol": None}).tolerances.incl_tol is None
    assert Config(tolerances={"incl_tol": 0.5}).tolerances.incl_tol == 0.5


# postprocess
#############


def test_json_ready():
    report = json_ready({"a": np.float64(1 / 3), "b": np.arange(3), "c": (True, np.inf), 4: np.bool_(False)})
    assert report == {"a": 0.333333333333, "b": [0, 1, 2], "c": [True, "inf"], "4": False}


def test_write_files(tmp_path):
    postprocess = Postprocess(str(tmp_path), "json")
    name = postprocess.write_file("report", {"status": "PASS", "value": 0.1 + 0.2})
    with open(name) as f:
        assert json.load(f) == {"status": "PASS", "value": 0.3}
    name = postprocess.write_file("report", {"status": "FAIL"}, format="yml")
    with open(name) as f:
        assert yaml.safe_load(f) == {"status": "FAIL"}
    with pytest.raises(AssertionError):
        postprocess.write_file("report", {}, format="xml")


def test_write_table(tmp_path, measure_doc):
    measure = load_measure(measure_doc)
    f = load_function({"values": [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]}, measure)
    table = grid_table(measure, f=f, mask=measure.support)
    assert list(table.columns) == ["index", "x1", "x2", "w", "f", "mask"]
    name = Postprocess(str(tmp_path)).write_table("cells", table)
    assert os.path.basename(name) == "cells.csv"
    read = pd.read_csv(name)
    assert list(read["f"]) == [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]


def test_dimension_of_document(measure_doc):
    assert load_measure({**measure_doc, "dim": 2}).dim == 2
    with pytest.raises(MalformedSpecError):
        load_measure({**measure_doc, "dim": 3})
