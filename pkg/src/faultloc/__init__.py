"""Faulted-line localization from PMU voltage phasors."""

__version__ = "0.1.0"
