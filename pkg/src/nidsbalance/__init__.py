"""Binary intrusion detection on imbalanced flow data."""

__version__ = "0.1.0"
