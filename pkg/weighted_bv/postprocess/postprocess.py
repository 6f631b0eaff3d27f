"""
:Title:        WEIGHTED-BV
:Created:      October-2026
:Authors:      weighted_bv developers

Class is defining the postprocessing of a run.
It writes the report of a command as json or yml with a fixed key order and deterministic float
formatting, and dumps grid quantities as csv tables.
"""
import json
import logging
import os
from enum import Enum

import numpy as np
import pandas as pd
import yaml
from filelock import FileLock
from pydantic import BaseModel

# significant digits of floats in reports and tables
DIGITS = 12


def json_ready(value):
    """
    Converts a nested report into plain python types with rounded floats

    :param value: report entry
    :return value: json serializable entry
    """
    if isinstance(value, BaseModel):
        value = value.model_dump()
    if isinstance(value, dict):
        return {str(key): json_ready(val) for key, val in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_ready(val) for val in value]
    if isinstance(value, np.ndarray):
        return [json_ready(val) for val in value.tolist()]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not np.isfinite(value):
            return str(value)
        return float(f"{value:.{DIGITS}g}")
    return value


def grid_table(measure, **columns):
    """
    Table with one row per cell: flat index, cell center, weight and the given columns

    :param measure: grid measure
    :param columns: grid functions, vector fields or arrays of the grid shape
    :return table: pandas data frame
    """
    centers = measure.centers.reshape(-1, measure.dim)
    table = {"index": np.arange(measure.n_cells)}
    for k in range(measure.dim):
        table[f"x{k + 1}"] = centers[:, k]
    table["w"] = measure.weights.ravel()
    for name, column in columns.items():
        if hasattr(column, "components"):
            column = column.components
        elif hasattr(column, "values"):
            column = column.values
        column = np.asarray(column)
        if column.ndim == measure.dim + 1:
            for k in range(column.shape[-1]):
                table[f"{name}{k + 1}"] = column[..., k].ravel()
        else:
            table[name] = column.ravel()
    return pd.DataFrame(table)


class Postprocess:
    """
    Class is defining the postprocessing of a run
    """

    def __init__(self, out_folder, output_format="json", overwrite=True):
        """
        :param out_folder: folder of the run
        :param output_format: json or yml
        :param overwrite: overwrite existing files
        """
        self.out_folder = out_folder
        self.output_format = output_format
        self.overwrite = overwrite

    def write_file(self, name, dictionary, format=None):
        """Writes the dictionary to file as json or yml

        :param name: Filename without extension
        :param dictionary: The dictionary to save
        :param format: Force the format to use, if None use output_format attribute of instance
        :return f_name: name of the written file
        """
        dictionary = json_ready(dictionary)

        # set the format
        if format is None:
            format = self.output_format

        if format == "yml":
            serialized_dict = yaml.dump(dictionary, sort_keys=False)
            f_name = os.path.join(self.out_folder, f"{name}.yml")
        elif format == "json":
            serialized_dict = json.dumps(dictionary, indent=2)
            f_name = os.path.join(self.out_folder, f"{name}.json")
        else:
            raise AssertionError(f"The specified output format {format}, chosen in the config, is not supported")

        # write if necessary
        if self.overwrite or not os.path.exists(f_name):
            with FileLock(f_name + ".lock").acquire(timeout=300):
                with open(f_name, "w") as outfile:
                    outfile.write(serialized_dict)
        return f_name

    def write_table(self, name, table):
        """ writes a data frame as csv with deterministic float formatting """
        f_name = os.path.join(self.out_folder, f"{name}.csv")
        if self.overwrite or not os.path.exists(f_name):
            with FileLock(f_name + ".lock").acquire(timeout=300):
                table.to_csv(f_name, index=False, float_format=f"%.{DIGITS}g")
        logging.info(f"Wrote {f_name}")
        return f_name
