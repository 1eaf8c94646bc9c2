"""Multi-scale time-frequency ECG classification with progressive decision fusion."""

__version__ = "0.1.0"
