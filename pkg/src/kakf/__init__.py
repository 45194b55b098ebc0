"""Semi-blind joint channel and symbol estimation for IRS-assisted multi-user MIMO uplinks."""

__version__ = "0.1.0"
