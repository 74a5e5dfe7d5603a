"""Planar biped simulation: model, dynamics, control, sensors."""

from .control import integrate_action, pd_control
from .model import (BODY_NAMES, CONTACT_NAMES, JOINT_NAMES, N_CONTACTS, N_DOF,
                    N_JOINTS, N_SENSED_CONTACTS, ConfigError, DynTree,
                    ModelConfig, application_point, build_tree)
from .sensors import OBS_DIM, OBS_LAYOUT, Observation, Observer, layout_slices
from .sim import BipedSim, SimError
from .state import ControlTarget, SimState

__all__ = [
    "BODY_NAMES", "CONTACT_NAMES", "JOINT_NAMES", "N_CONTACTS", "N_DOF",
    "N_JOINTS", "N_SENSED_CONTACTS", "OBS_DIM", "OBS_LAYOUT",
    "BipedSim", "ConfigError", "ControlTarget", "DynTree", "ModelConfig",
    "Observation", "Observer", "SimError", "SimState",
    "application_point", "build_tree", "integrate_action", "layout_slices",
    "pd_control",
]
