"""Tests for the `pyrgm.diff` package."""
