"""Visitation and mobility analytics over ICU posture-detection streams."""

__version__ = "0.1.0"
