"""Composite spatial individual-level epidemic models."""
