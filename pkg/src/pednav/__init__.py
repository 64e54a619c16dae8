"""Pedestrian-navigation simulator and hierarchical learn-from-intervention imitation learning."""

__version__ = "0.1.0"
