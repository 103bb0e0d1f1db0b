"""Closed-form monocular 3D box depth and yaw from keyedge height ratios."""

__version__ = "0.1.0"
