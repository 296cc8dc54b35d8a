"""Whole-body collision-free MPC for a quadruped.

An SLQ-based receding-horizon controller plans torso and feet motion through
static (voxelized distance field) and dynamic (Kalman-tracked cylinder)
environments using a soft collision barrier, with a closed-loop simulator,
scenario suite, benchmark harness, and a teleop bridge on top.
"""

from .collision import CollisionSnapshot, PenaltyParams
from .gait import GaitParams, ModeSchedule
from .model import ModelParams, RobotInput, RobotState
from .obstacles import ObstacleObservation, ObstacleTracker, TrackedCylinder
from .ocp import CostParams, FrictionParams, OcpProblem, ReferenceTrajectory
from .sdf import Esdf, PrimitiveScene, analytic_sdf, build_esdf
from .slq import FeedbackPolicy, MpcController, SolverSettings, SolverStats

__version__ = "0.1.0"

__all__ = [
    "CollisionSnapshot", "PenaltyParams", "GaitParams", "ModeSchedule",
    "ModelParams", "RobotInput", "RobotState", "ObstacleObservation",
    "ObstacleTracker", "TrackedCylinder", "CostParams", "FrictionParams",
    "OcpProblem", "ReferenceTrajectory", "Esdf", "PrimitiveScene",
    "analytic_sdf", "build_esdf", "FeedbackPolicy", "MpcController",
    "SolverSettings", "SolverStats",
]
