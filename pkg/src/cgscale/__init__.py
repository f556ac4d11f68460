"""Consumer-group autoscaling as bin packing with migration cost."""

__version__ = "0.1.0"
