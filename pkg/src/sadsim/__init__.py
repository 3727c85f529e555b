"""Scenario-based highway driving workbench: critical-scenario
generation, a shielded hierarchical pilot over a kinematic bicycle
simulation, small actor-critic agents, and evaluation tooling."""

from ._core import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
