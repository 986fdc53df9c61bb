"""Synthetic dataset, topologies and measurement harness."""
