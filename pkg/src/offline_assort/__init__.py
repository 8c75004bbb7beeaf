"""Pessimistic offline assortment optimization under discrete-choice models."""

__version__ = "0.1.0"
