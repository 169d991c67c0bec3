"""Version information for HTD LR Scheduler."""

__version__ = "0.2.0"
__description__ = "Hyperbolic-tangent decay and classic learning-rate schedules with a deterministic SGD harness"
__author__ = "J-MaFf"
__license__ = "MIT"
