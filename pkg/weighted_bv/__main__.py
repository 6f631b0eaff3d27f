"""
:Title:        WEIGHTED-BV
:Created:      October-2026
:Authors:      weighted_bv developers

Command line interface of weighted_bv.
"""
import argparse
import json
import logging
import os
import sys

from ._internal import COMMANDS, main
from .model.default_config import Config
from .preprocess.scenarios import SCENARIOS
from .utils import MalformedSpecError

# exit status of invalid input
INVALID_INPUT = 1


class ArgumentParser(argparse.ArgumentParser):
    """ argument parser that exits with the status of invalid input """

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(INVALID_INPUT, f"{self.prog}: error: {message}\n")


def _floats(text):
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of numbers, got '{text}'")


def _tolerance(text):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got '{text}'")
    try:
        return key, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance {key} needs a number, got '{value}'")


def build_config(args):
    """
    Config of a run: the defaults, updated by the config file and then by the flags

    :param args: parsed arguments
    :return config: config instance
    """
    if args.config is not None:
        if not os.path.exists(args.config):
            raise FileNotFoundError(f"Config file {args.config} does not exist")
        with open(args.config, "r") as f:
            try:
                document = json.load(f)
            except json.JSONDecodeError as error:
                raise MalformedSpecError(f"{args.config} is not valid json: {error}")
        if not isinstance(document, dict):
            raise MalformedSpecError(f"{args.config} must hold a json object, got {type(document).__name__}")
        config = Config(**document)
    else:
        config = Config()
    analysis = config.analysis
    analysis.command = args.command
    if args.measure is not None or args.function is not None:
        if args.measure is None or args.function is None:
            raise MalformedSpecError("--measure and --function must be given together")
        analysis.measure, analysis.function = args.measure, args.function
        analysis.scenario = None
    elif args.scenario is not None:
        analysis.scenario = args.scenario
    if args.resolution is not None:
        analysis.resolution = args.resolution
    if args.out is not None:
        analysis.folder_output = args.out
    if args.seed is not None:
        analysis.seed = args.seed
    if args.format is not None:
        analysis.output_format = args.format
    if args.M_schedule is not None:
        config.schedules.M_schedule = args.M_schedule
    if args.eps_schedule is not None:
        config.schedules.eps_schedule = args.eps_schedule
    for key, value in args.tol or []:
        if key not in config.tolerances.keys():
            raise MalformedSpecError(f"unknown tolerance '{key}', choose one of {list(config.tolerances.keys())}")
        config.tolerances[key] = value
    # validate the updated sections again
    return Config(**config.model_dump())


def run_module(args=None):
    """
    Runs the main function of weighted_bv

    :param args: Arguments to parse
    :return status: 0 on success, 1 on invalid input, 2 when a numerical check failed
    """
    if args is None:
        args = sys.argv[1:]

    description = "Total variation and Sobolev calculus of weighted measures on grids. A command runs on a builtin " \
                  "scenario or on a measure document together with a function document; the report and the " \
                  "tables are written to the output folder."
    parser = ArgumentParser(prog="weighted_bv", description=description, add_help=True)
    parser.add_argument("command", choices=COMMANDS, help="The command to run")
    parser.add_argument("--scenario", required=False, type=str, default=None, choices=SCENARIOS,
                        help="Builtin scenario, defaults to the scenario of the config")
    parser.add_argument("--measure", required=False, type=str, default=None, help="Path to a measure document")
    parser.add_argument("--function", required=False, type=str, default=None, help="Path to a function document")
    parser.add_argument("--resolution", required=False, type=int, default=None,
                        help="Cells per axis of the builtin scenarios")
    parser.add_argument("--M-schedule", dest="M_schedule", required=False, type=_floats, default=None,
                        help="Comma separated increasing divergence bounds")
    parser.add_argument("--eps-schedule", dest="eps_schedule", required=False, type=_floats, default=None,
                        help="Comma separated decreasing mollification scales")
    parser.add_argument("--tol", required=False, type=_tolerance, action="append", default=None,
                        help="Tolerance override key=value, may be repeated")
    parser.add_argument("--out", required=False, type=str, default=None, help="Output folder")
    parser.add_argument("--seed", required=False, type=int, default=None, help="Seed of the randomized probes")
    parser.add_argument("--format", required=False, type=str, default=None, choices=("json", "yml"),
                        help="Format of the report")
    parser.add_argument("--config", required=False, type=str, default=None, help="A json config file")

    args = parser.parse_args(args)

    try:
        config = build_config(args)
        return main(config=config)
    except (ValueError, FileNotFoundError, KeyError) as error:
        logging.error(f"Invalid input: {error}")
        return INVALID_INPUT


if __name__ == "__main__":

    sys.exit(run_module())
