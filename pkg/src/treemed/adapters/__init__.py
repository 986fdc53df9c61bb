"""Source adapters: XML files, tabular files, other mediators, remote TCP."""

from .base import Adapter, ParsedQuery, parse_adapter_query
from .files import FileAdapter
from .mediator_adapter import MediatorAdapter
from .tabular import TabularAdapter
from .tcp import AdapterServer, RemoteAdapter

__all__ = [
    "Adapter", "ParsedQuery", "parse_adapter_query", "FileAdapter", "MediatorAdapter",
    "TabularAdapter", "AdapterServer", "RemoteAdapter",
]
