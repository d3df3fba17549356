"""
Cordes Config - Run configuration and layered loading.

Settings are merged from (lowest to highest precedence) the dataclass
defaults, a built-in preset, a config file, ``--set KEY=VALUE`` overrides
and explicit command-line flags.

Config files ending in ``.yaml``/``.yml`` hold a YAML mapping; any other
file is read as ``key = value`` lines with ``#`` comments.

Example:
    >>> config = resolve_config(preset="exp1-bfs-uniform", overrides=["max_ndof=500"])
    >>> config.max_ndof
    500
"""

import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Optional, Union

import yaml

from cordes.adaptivity import AdaptiveConfig
from cordes.coefficients import Formulation, derived_constants
from cordes.errors import ParameterError
from cordes.experiments import ProblemSpec, problem_spec
from cordes.presets import get_preset, get_preset_names

logger = logging.getLogger(__name__)

METHOD_CHOICES = ("bfs-ls", "bfs-ns", "th-ls", "th-ns")

# Spellings accepted in files and overrides
_ALIASES = {"lambda": "lambda_", "lam": "lambda_", "order": "quad_order", "degree": "tri_degree"}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}

_KINDS: dict[str, type] = {
    "experiment": int,
    "method": str,
    "refinement": str,
    "marking": str,
    "theta": float,
    "lambda_": float,
    "mu": float,
    "max_ndof": int,
    "max_levels": int,
    "quad_order": int,
    "tri_degree": int,
    "subdivision": int,
    "matching": bool,
    "check_meshes": bool,
    "out": str,
    "dump_mesh": str,
    "plot": str,
}
_OPTIONAL = {"mu", "dump_mesh", "plot"}


@dataclass
class RunConfig:
    """
    One benchmark run.

    Attributes:
        experiment: 1, 2 or 3.
        method: ``bfs-ls``, ``bfs-ns``, ``th-ls`` or ``th-ns``.
        refinement: ``adaptive`` or ``uniform``.
        marking: ``doerfler`` or ``maximum``.
        theta: Doerfler parameter.
        lambda_: Stabilization weight.
        mu: NS estimator weight (None for the largest admissible value).
        max_ndof: Stop after the first level above this size.
        max_levels: Hard cap on the number of levels.
        quad_order: Gauss points per direction on rectangles.
        tri_degree: Exactness degree of the triangle rule.
        subdivision: Composite quadrature level.
        matching: Use the axis-aligned initial mesh.
        check_meshes: Scan mesh invariants after every refinement.
        out: CSV output path.
        dump_mesh: Path of the final mesh dump, or None.
        plot: Path prefix of the SVG plots, or None.
    """

    experiment: int = 1
    method: str = "bfs-ls"
    refinement: str = "adaptive"
    marking: str = "doerfler"
    theta: float = 0.3
    lambda_: float = 1.0
    mu: Optional[float] = None
    max_ndof: int = 20000
    max_levels: int = 40
    quad_order: int = 5
    tri_degree: int = 6
    subdivision: int = 0
    matching: bool = True
    check_meshes: bool = False
    out: str = "results.csv"
    dump_mesh: Optional[str] = None
    plot: Optional[str] = None

    @property
    def solver(self) -> str:
        """``bfs`` or ``taylor_hood``."""
        return "bfs" if self.method.startswith("bfs") else "taylor_hood"

    @property
    def formulation(self) -> Formulation:
        return Formulation.parse(self.method.rsplit("-", 1)[-1])

    @property
    def mesh_family(self) -> str:
        return "quad" if self.solver == "bfs" else "tri"

    def problem(self) -> ProblemSpec:
        return problem_spec(self.experiment, self.mesh_family, self.matching)

    def adaptive_config(self) -> AdaptiveConfig:
        return AdaptiveConfig(
            theta=self.theta,
            marking=self.marking,
            refinement=self.refinement,
            max_ndof=self.max_ndof,
            formulation=self.formulation,
            lambda_=self.lambda_,
            mu=self.mu,
            quad_order=self.quad_order,
            tri_degree=self.tri_degree,
            subdivision=self.subdivision,
            max_levels=self.max_levels,
            check_meshes=self.check_meshes,
        )

    def validate(self) -> "RunConfig":
        """
        Check the combination of settings.

        Returns:
            self, for chaining.

        Raises:
            ParameterError: For out-of-range values or invalid combinations,
                including an NS method with ``|lambda - 1| >= sqrt(eps)``.
        """
        if self.method not in METHOD_CHOICES:
            choices = ", ".join(METHOD_CHOICES)
            raise ParameterError(f"unknown method '{self.method}' (use {choices})")
        if not 1 <= self.quad_order <= 10:
            raise ParameterError(f"quad_order must lie in [1, 10], got {self.quad_order}")
        if not 1 <= self.tri_degree <= 10:
            raise ParameterError(f"tri_degree must lie in [1, 10], got {self.tri_degree}")
        problem = self.problem()
        self.adaptive_config()
        derived_constants(problem.coefficient, self.formulation, self.lambda_, self.mu)
        return self

    def as_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["lambda"] = data.pop("lambda_")
        return data


# =============================================================================
# LOADING
# =============================================================================


def _coerce(key: str, value: Any) -> Any:
    kind = _KINDS[key]
    if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none", "null")):
        if key in _OPTIONAL:
            return None
        raise ParameterError(f"{key} must not be empty")
    try:
        if kind is bool:
            if isinstance(value, bool):
                return value
            text = str(value).strip().lower()
            if text in _TRUE:
                return True
            if text in _FALSE:
                return False
            raise ValueError(value)
        if kind is int:
            number = float(value)
            if number != int(number):
                raise ValueError(value)
            return int(number)
        if kind is float:
            return float(value)
    except (TypeError, ValueError, OverflowError):
        raise ParameterError(f"invalid value for {key}: {value!r}") from None
    return str(value).strip()


def normalize_settings(settings: dict[str, Any]) -> dict[str, Any]:
    """
    Map user spellings onto RunConfig fields and coerce the values.

    Raises:
        ParameterError: For unknown keys or values of the wrong type.
    """
    result = {}
    for raw_key, value in settings.items():
        key = str(raw_key).strip().lower().replace("-", "_")
        key = _ALIASES.get(key, key)
        if key not in _KINDS:
            raise ParameterError(f"unknown setting '{raw_key}'")
        result[key] = _coerce(key, value)
    return result


def parse_assignments(lines: list[str], source: str = "overrides") -> dict[str, str]:
    """Parse ``key=value`` strings, skipping blanks and ``#`` comments."""
    result = {}
    for number, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ParameterError(f"{source}:{number}: expected KEY=VALUE, got '{line.strip()}'")
        key, value = text.split("=", 1)
        result[key.strip()] = value.strip()
    return result


def load_config_file(path: Union[str, Path]) -> dict[str, Any]:
    """
    Read a config file into normalized settings.

    Raises:
        OSError: If the file cannot be read.
        ParameterError: For malformed content.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() in (".yaml", ".yml"):
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as e:
            raise ParameterError(f"{path}: invalid YAML: {e}") from None
        if not isinstance(data, dict):
            raise ParameterError(f"{path}: expected a mapping of settings")
    else:
        data = parse_assignments(text.splitlines(), source=str(path))
    logger.debug("loaded %d settings from %s", len(data), path)
    return normalize_settings(data)


def resolve_config(
    preset: Optional[str] = None,
    config_file: Optional[Union[str, Path]] = None,
    overrides: Optional[list[str]] = None,
    flags: Optional[dict[str, Any]] = None,
) -> RunConfig:
    """
    Merge all configuration layers and validate the result.

    Args:
        preset: Built-in preset name.
        config_file: YAML or ``key=value`` file.
        overrides: ``KEY=VALUE`` strings.
        flags: Explicitly given command-line values.

    Returns:
        Validated RunConfig.

    Raises:
        ParameterError: For unknown presets, keys or invalid settings.
    """
    settings: dict[str, Any] = {}
    if preset:
        found = get_preset(preset)
        if found is None:
            raise ParameterError(
                f"unknown preset '{preset}' (available: {', '.join(get_preset_names())})"
            )
        settings.update(normalize_settings(found.settings))
    if config_file:
        settings.update(load_config_file(config_file))
    if overrides:
        settings.update(normalize_settings(parse_assignments(list(overrides))))
    if flags:
        settings.update(normalize_settings(flags))
    return RunConfig(**settings).validate()
