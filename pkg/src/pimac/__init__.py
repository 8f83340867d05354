"""PIMAC: rate-region and minimum-power design for a MAC sharing spectrum
with a point-to-point link under treating-interference-as-noise."""

__all__ = ["model", "convex_core", "rate_region", "power_min", "expcli"]
__version__ = "0.1.0"
