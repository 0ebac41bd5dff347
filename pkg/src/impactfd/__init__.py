"""Impact failure detector: weighted trust level over a monitored set of processes."""

__version__ = "0.1.0"
