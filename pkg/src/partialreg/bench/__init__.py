"""Synthetic scenarios, the error metric and point-file I/O."""

from .io import CloudFormatError, load_cloud, read_truth, save_cloud, write_truth
from .metrics import cloud_sigma, registration_error, scenario_error, truth_error
from .scenarios import (Scenario, ScenarioSpec, add_uniform_noise, blob_3d, fish_2d,
                        make_rigid_scenario, make_scenario, rotation_from_angles)

__all__ = [
    "CloudFormatError", "Scenario", "ScenarioSpec", "add_uniform_noise", "blob_3d",
    "cloud_sigma", "fish_2d", "load_cloud", "make_rigid_scenario", "make_scenario",
    "read_truth", "registration_error", "rotation_from_angles", "save_cloud",
    "scenario_error", "truth_error", "write_truth",
]
