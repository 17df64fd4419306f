"""
Configuration management for the Low Vision GUI Checker.

Values come from environment variables (optionally via a .env file) and can
be overridden from a TOML or JSON file passed with --config. Every library
function that needs a tunable takes it as an optional argument and falls
back to this singleton.
"""

import json
import logging
import os
try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Type, TypeVar, Union

from dotenv import load_dotenv

from utils.errors import ConfigError
from utils.logging_config import setup_logger

# Configure logger
logger = setup_logger(__name__, logging.INFO)

# Type variable for Config singleton
T = TypeVar("T", bound="Config")

POOLING_MODES = ("neighborhood-max", "none")
OPTIMIZERS = ("adam", "gd")


class Config:
    """
    Configuration manager for the Low Vision GUI Checker.

    Holds the graph padding threshold, the oracle thresholds, the feature
    scaling constant and the GCN hyperparameters.
    """

    # Singleton instance
    _instance: Optional["Config"] = None

    # Whether the config has been initialized
    _initialized: bool = False

    def __new__(cls: Type[T]) -> T:
        """Ensure Config is a singleton."""
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self) -> None:
        """Initialize the configuration (only once)."""
        if self._initialized:
            return

        load_dotenv()
        self.BASE_DIR = Path(__file__).resolve().parent
        self.DB_DIR = self.BASE_DIR / "db"
        self.LOGS_DIR = self.BASE_DIR / "logs"
        self.reset()

        self._initialized = True
        logger.debug("Configuration initialized")

    def reset(self) -> None:
        """Reload every value from the environment, discarding file overrides."""
        # Graph and features
        self.PADDING_THRESHOLD = self._parse_int("PADDING_THRESHOLD", 37, min_value=1)
        self.ADJACENCY_GAP = self._parse_int("ADJACENCY_GAP", 5, min_value=0)
        self.SIZE_SCALE = self._parse_float("SIZE_SCALE", 96.0, min_value=1.0)
        self.INVISIBLE_CLASSES = self._parse_list(
            "INVISIBLE_CLASSES", ["RecyclerView", "DrawerLayout", "ViewPager"]
        )

        # Oracle thresholds
        self.SIZE_FLOOR = self._parse_int("SIZE_FLOOR", 24, min_value=0)
        self.INTERVAL_FLOOR = self._parse_int("INTERVAL_FLOOR", 5, min_value=0)
        self.CONTRAST_FLOOR = self._parse_float(
            "CONTRAST_FLOOR", 4.5, min_value=1.0, max_value=21.0
        )

        # Device
        self.DEVICE_WIDTH = self._parse_int("DEVICE_WIDTH", 1440, min_value=1)
        self.DEVICE_HEIGHT = self._parse_int("DEVICE_HEIGHT", 2560, min_value=1)

        # GCN hyperparameters
        self.HIDDEN_DIMS = [
            int(v) for v in self._parse_list("HIDDEN_DIMS", ["64", "32"])
        ]
        self.N_BLOCKS = self._parse_int("N_BLOCKS", 2, min_value=1)
        self.N_CONV_PER_BLOCK = self._parse_int("N_CONV_PER_BLOCK", 1, min_value=1)
        self.FC_DIM = self._parse_int("FC_DIM", 32, min_value=1)
        self.SELF_DIM = self._parse_int("SELF_DIM", 32, min_value=0)
        self.OPTIMIZER = os.getenv("OPTIMIZER", "adam").lower()
        self.LEARNING_RATE = self._parse_float("LEARNING_RATE", 0.01, min_value=0.0)
        self.EPOCHS = self._parse_int("EPOCHS", 400, min_value=0)
        self.SEED = self._parse_int("SEED", 7)
        self.POOLING = os.getenv("POOLING", "neighborhood-max")
        self.USE_FC = os.getenv("USE_FC", "true").lower() == "true"

        # Storage
        self.DATABASE_URL = os.getenv(
            "DATABASE_URL", f"sqlite:///{self.DB_DIR}/findings.db"
        )

        # Logging
        self.LOG_LEVEL = self._parse_log_level(os.getenv("LOG_LEVEL", "INFO"))

    def _parse_int(
        self,
        env_var: str,
        default: int,
        min_value: Optional[int] = None,
        max_value: Optional[int] = None,
    ) -> int:
        """
        Parse an integer from an environment variable with validation.

        Args:
            env_var: Environment variable name
            default: Default value if not found or invalid
            min_value: Optional minimum allowed value
            max_value: Optional maximum allowed value

        Returns:
            Parsed integer value
        """
        try:
            value = int(os.getenv(env_var, str(default)))
        except ValueError:
            logger.warning(f"Invalid {env_var} value, using default: {default}")
            return default
        return self._clamp(env_var, value, min_value, max_value)

    def _parse_float(
        self,
        env_var: str,
        default: float,
        min_value: Optional[float] = None,
        max_value: Optional[float] = None,
    ) -> float:
        """
        Parse a float from an environment variable with validation.

        Args:
            env_var: Environment variable name
            default: Default value if not found or invalid
            min_value: Optional minimum allowed value
            max_value: Optional maximum allowed value

        Returns:
            Parsed float value
        """
        try:
            value = float(os.getenv(env_var, str(default)))
        except ValueError:
            logger.warning(f"Invalid {env_var} value, using default: {default}")
            return default
        return self._clamp(env_var, value, min_value, max_value)

    def _parse_list(self, env_var: str, default: List[str]) -> List[str]:
        raw = os.getenv(env_var)
        if raw is None:
            return list(default)
        return [item.strip() for item in raw.split(",") if item.strip()]

    @staticmethod
    def _clamp(
        name: str,
        value: Union[int, float],
        min_value: Optional[Union[int, float]],
        max_value: Optional[Union[int, float]],
    ) -> Any:
        if min_value is not None and value < min_value:
            logger.warning(
                f"{name} value {value} is below minimum {min_value}, "
                f"using minimum value"
            )
            return min_value
        if max_value is not None and value > max_value:
            logger.warning(
                f"{name} value {value} is above maximum {max_value}, "
                f"using maximum value"
            )
            return max_value
        return value

    def _parse_log_level(self, level_str: str) -> int:
        """
        Parse logging level from string.

        Args:
            level_str: String representation of log level

        Returns:
            Logging level as an integer
        """
        levels = {
            "DEBUG": logging.DEBUG,
            "INFO": logging.INFO,
            "WARNING": logging.WARNING,
            "ERROR": logging.ERROR,
            "CRITICAL": logging.CRITICAL,
        }

        level_str = level_str.upper()
        if level_str in levels:
            return levels[level_str]

        logger.warning(f"Unknown log level: {level_str}, defaulting to INFO")
        return logging.INFO

    @property
    def device(self) -> Tuple[int, int]:
        return (self.DEVICE_WIDTH, self.DEVICE_HEIGHT)

    def load_file(self, path: Union[str, Path]) -> None:
        """
        Apply overrides from a TOML or JSON configuration file.

        Keys are the lower-case names used by as_dict(). A TOML file may
        group them under tables; tables are flattened before matching.

        Args:
            path: Path to a .toml or .json file

        Raises:
            ConfigError: If the file cannot be read, a key is unknown or a
                value fails validation
        """
        path = Path(path)
        try:
            if path.suffix.lower() == ".toml":
                with open(path, "rb") as f:
                    data = tomllib.load(f)
            else:
                with open(path, "r", encoding="utf-8") as f:
                    data = json.load(f)
        except (OSError, ValueError) as e:
            raise ConfigError(f"cannot read config file {path}: {e}") from e

        flat: Dict[str, Any] = {}
        for key, value in data.items():
            if isinstance(value, dict):
                flat.update(value)
            else:
                flat[key] = value

        known = {k for k in self.as_dict() if k not in ("base_dir", "db_dir", "logs_dir")}
        overrides: Dict[str, Any] = {}
        for key, value in flat.items():
            if key not in known:
                raise ConfigError(f"unknown config key '{key}' in {path}")
            overrides[key.upper()] = self._coerce(key, value)

        # the singleton cannot be copied, so apply then roll back on failure
        previous = {name: getattr(self, name) for name in overrides}
        for name, value in overrides.items():
            setattr(self, name, value)
        errors = self.validate()
        if errors:
            for name, value in previous.items():
                setattr(self, name, value)
            raise ConfigError("; ".join(errors))
        logger.info(f"Loaded configuration overrides from {path}")

    def _coerce(self, key: str, value: Any) -> Any:
        current = getattr(self, key.upper())
        if key == "log_level" and isinstance(value, str):
            return self._parse_log_level(value)
        try:
            if isinstance(current, bool):
                if isinstance(value, str):
                    return value.lower() == "true"
                return bool(value)
            if isinstance(current, int):
                return int(value)
            if isinstance(current, float):
                return float(value)
            if isinstance(current, list):
                if isinstance(value, str):
                    value = [v.strip() for v in value.split(",") if v.strip()]
                if key == "hidden_dims":
                    return [int(v) for v in value]
                return [str(v) for v in value]
            return value
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad value for '{key}': {value!r}") from e

    def as_dict(self) -> Dict[str, Any]:
        """
        Return the current configuration as a dictionary.

        Returns:
            Dictionary with all configuration values
        """
        return {
            "base_dir": str(self.BASE_DIR),
            "db_dir": str(self.DB_DIR),
            "logs_dir": str(self.LOGS_DIR),
            "padding_threshold": self.PADDING_THRESHOLD,
            "adjacency_gap": self.ADJACENCY_GAP,
            "size_scale": self.SIZE_SCALE,
            "invisible_classes": list(self.INVISIBLE_CLASSES),
            "size_floor": self.SIZE_FLOOR,
            "interval_floor": self.INTERVAL_FLOOR,
            "contrast_floor": self.CONTRAST_FLOOR,
            "device_width": self.DEVICE_WIDTH,
            "device_height": self.DEVICE_HEIGHT,
            "hidden_dims": list(self.HIDDEN_DIMS),
            "n_blocks": self.N_BLOCKS,
            "n_conv_per_block": self.N_CONV_PER_BLOCK,
            "fc_dim": self.FC_DIM,
            "self_dim": self.SELF_DIM,
            "optimizer": self.OPTIMIZER,
            "learning_rate": self.LEARNING_RATE,
            "epochs": self.EPOCHS,
            "seed": self.SEED,
            "pooling": self.POOLING,
            "use_fc": self.USE_FC,
            "database_url": self.DATABASE_URL,
            "log_level": self.LOG_LEVEL,
        }

    def validate(self) -> List[str]:
        """
        Validate the configuration.

        Returns:
            List of validation errors, empty if valid
        """
        errors = []

        if self.POOLING not in POOLING_MODES:
            errors.append(f"POOLING must be one of {POOLING_MODES}")

        if self.OPTIMIZER not in OPTIMIZERS:
            errors.append(f"OPTIMIZER must be one of {OPTIMIZERS}")

        if len(self.HIDDEN_DIMS) != self.N_BLOCKS * self.N_CONV_PER_BLOCK:
            errors.append(
                "HIDDEN_DIMS must list one width per conv layer "
                f"({self.N_BLOCKS} blocks x {self.N_CONV_PER_BLOCK} convs)"
            )

        if self.PADDING_THRESHOLD < 1:
            errors.append("PADDING_THRESHOLD must be positive")

        return errors


# Singleton instance
config = Config()


def get_config() -> Dict[str, Any]:
    """
    Return the current configuration as a dictionary.

    Returns:
        Dictionary with all configuration values
    """
    return config.as_dict()
