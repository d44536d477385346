"""Multi-center anonymous consortium ledger toolkit."""

__version__ = "0.1.0"
