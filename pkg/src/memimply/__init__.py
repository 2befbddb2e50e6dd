"""Simulation and analytical constraints for memristive IMPLY gates under device variability."""

__version__ = "0.1.0"
