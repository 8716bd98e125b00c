"""Pose-cue regression networks for dental projection images."""

__version__ = "0.1.0"
