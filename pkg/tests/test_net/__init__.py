"""Tests for the `pyrgm.net` package."""
