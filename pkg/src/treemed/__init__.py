"""Federated FLWR query mediator over tree-tuple relations."""

__version__ = "0.1.0"
