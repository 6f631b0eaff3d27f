from .default_config import Config
