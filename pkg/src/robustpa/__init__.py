"""Robust-control principal-agent toolkit: ARC valuations, contracts, traps and long-run dynamics."""

__version__ = "0.1.0"
