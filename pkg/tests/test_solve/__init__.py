"""Tests for the `pyrgm.solve` package."""
