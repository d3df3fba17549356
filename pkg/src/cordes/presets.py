"""
Cordes Presets - Built-in benchmark runs and preset utilities.

This module provides pre-configured runs for the three benchmarks and
utilities for exporting them as editable YAML config files.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml


@dataclass
class PresetConfig:
    """A named set of run settings."""

    name: str
    description: str
    settings: dict[str, Any] = field(default_factory=dict)

    @property
    def experiment(self) -> int:
        return int(self.settings.get("experiment", 1))

    @property
    def method(self) -> str:
        return str(self.settings.get("method", "bfs-ls"))


# =============================================================================
# BUILT-IN PRESETS
# =============================================================================

BUILTIN_PRESETS: dict[str, PresetConfig] = {
    "exp1-bfs-uniform": PresetConfig(
        name="exp1-bfs-uniform",
        description="Smooth solution, BFS least squares, uniform refinement",
        settings={"experiment": 1, "method": "bfs-ls", "refinement": "uniform"},
    ),
    "exp1-bfs-adaptive": PresetConfig(
        name="exp1-bfs-adaptive",
        description="Smooth solution, BFS least squares, adaptive refinement",
        settings={"experiment": 1, "method": "bfs-ls", "refinement": "adaptive"},
    ),
    "exp1-th-uniform": PresetConfig(
        name="exp1-th-uniform",
        description="Smooth solution, Taylor-Hood least squares, uniform refinement",
        settings={"experiment": 1, "method": "th-ls", "refinement": "uniform"},
    ),
    "exp1-th-adaptive": PresetConfig(
        name="exp1-th-adaptive",
        description="Smooth solution, Taylor-Hood least squares, adaptive refinement",
        settings={"experiment": 1, "method": "th-ls", "refinement": "adaptive"},
    ),
    "exp1-bfs-nonmatching": PresetConfig(
        name="exp1-bfs-nonmatching",
        description="Smooth solution on the mesh crossing at (0.1, 0.2), BFS, adaptive",
        settings={
            "experiment": 1,
            "method": "bfs-ls",
            "refinement": "adaptive",
            "matching": False,
        },
    ),
    "exp1-th-nonmatching": PresetConfig(
        name="exp1-th-nonmatching",
        description="Smooth solution on the mesh crossing at (0.1, 0.2), Taylor-Hood, adaptive",
        settings={
            "experiment": 1,
            "method": "th-ls",
            "refinement": "adaptive",
            "matching": False,
        },
    ),
    "exp2-bfs-adaptive": PresetConfig(
        name="exp2-bfs-adaptive",
        description="Singular solution, BFS least squares, adaptive refinement",
        settings={"experiment": 2, "method": "bfs-ls", "refinement": "adaptive"},
    ),
    "exp2-th-adaptive": PresetConfig(
        name="exp2-th-adaptive",
        description="Singular solution, Taylor-Hood least squares, adaptive refinement",
        settings={"experiment": 2, "method": "th-ls", "refinement": "adaptive"},
    ),
    "exp2-bfs-ns": PresetConfig(
        name="exp2-bfs-ns",
        description="Singular solution, BFS nonsymmetric formulation, adaptive refinement",
        settings={"experiment": 2, "method": "bfs-ns", "refinement": "adaptive"},
    ),
    "exp3-bfs-adaptive": PresetConfig(
        name="exp3-bfs-adaptive",
        description="Curved coefficient jump, f = 1, BFS, adaptive refinement",
        settings={"experiment": 3, "method": "bfs-ls", "refinement": "adaptive"},
    ),
    "exp3-th-adaptive": PresetConfig(
        name="exp3-th-adaptive",
        description="Curved coefficient jump, f = 1, Taylor-Hood, adaptive refinement",
        settings={"experiment": 3, "method": "th-ls", "refinement": "adaptive"},
    ),
    "exp3-bfs-uniform": PresetConfig(
        name="exp3-bfs-uniform",
        description="Curved coefficient jump, f = 1, BFS, uniform refinement",
        settings={"experiment": 3, "method": "bfs-ls", "refinement": "uniform"},
    ),
}


# =============================================================================
# PRESET FUNCTIONS
# =============================================================================


def get_preset(name: str) -> Optional[PresetConfig]:
    """
    Get a built-in preset by name.

    Args:
        name: Preset name.

    Returns:
        PresetConfig or None if not found.
    """
    return BUILTIN_PRESETS.get(name.lower())


def list_presets() -> list[dict[str, str]]:
    """
    List all built-in presets.

    Returns:
        List of preset info dictionaries.
    """
    return [
        {
            "name": preset.name,
            "description": preset.description,
            "experiment": str(preset.experiment),
            "method": preset.method,
        }
        for preset in BUILTIN_PRESETS.values()
    ]


def get_preset_names() -> list[str]:
    return list(BUILTIN_PRESETS.keys())


# =============================================================================
# YAML EXPORT
# =============================================================================


def get_yaml_preset(name: str) -> Optional[str]:
    """
    Render a preset as a YAML config file.

    Args:
        name: Preset name.

    Returns:
        YAML text or None.
    """
    preset = get_preset(name)
    if not preset:
        return None
    header = f"# cordes run configuration\n# Preset: {preset.name} - {preset.description}\n\n"
    return header + yaml.safe_dump(preset.settings, sort_keys=False, default_flow_style=False)


def list_yaml_presets() -> list[str]:
    return get_preset_names()


def save_yaml_preset(name: str, output_path: str) -> bool:
    """
    Save a preset as a YAML config file.

    Args:
        name: Preset name.
        output_path: Output file path.

    Returns:
        True if saved successfully.
    """
    content = get_yaml_preset(name)
    if not content:
        return False

    Path(output_path).write_text(content, encoding="utf-8")
    return True
