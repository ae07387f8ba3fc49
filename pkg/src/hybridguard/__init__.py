"""HybridGuard: GAN-balanced two-phase intrusion detection on tabular traffic data."""

__version__ = "0.1.0"

SCHEMA_VERSION = 1
