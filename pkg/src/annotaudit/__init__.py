"""Annotation consistency auditing for labeled text datasets."""

__version__ = "0.1.0"
