"""corescope: portable multicore characterization suite."""

__version__ = "0.1.0"
