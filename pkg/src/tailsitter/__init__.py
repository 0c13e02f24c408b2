"""Tail-sitter flight-dynamics laboratory.

Quaternion kinematics, the DarkO vehicle model, trim and linearization,
LQR synthesis, the zero-moment hover controller, the line-of-sight flight
controller, a hysteresis mode supervisor and a fixed-step simulator.
"""

from tailsitter.vehicle import VehicleParams, ActuatorLimits, load_params

__all__ = ["VehicleParams", "ActuatorLimits", "load_params"]
__version__ = "0.1.0"
