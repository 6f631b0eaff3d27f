from . import model
from . import postprocess
from . import preprocess

from .model.default_config import Config
from .model.grid import GridFunction, GridMeasure, GridVectorField
from .preprocess.scenarios import SCENARIOS, build_scenario
