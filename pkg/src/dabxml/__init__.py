"""Desk-scale DAB broadcast with XML metadata carriage and receiver control."""

__version__ = "0.1.0"
