"""Opportunistic user selection and DoF scaling in interfering broadcast channels."""

__version__ = "0.1.0"
