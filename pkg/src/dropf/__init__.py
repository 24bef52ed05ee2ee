"""Demand-response-aware AC optimal power flow."""

__version__ = "0.1.0"
