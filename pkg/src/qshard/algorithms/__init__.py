"""Algorithms built from the distributed operators."""
