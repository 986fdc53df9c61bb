"""Simple query to optimized physical plan."""

from .atomize import AtomicQuery, GlobalQuery, JoinAtom, NestSpec, atomize
from .locate import Binding, BoundAtomicQuery, binding_table, locate_sources
from .optimize import apply_hints, optimize
from .plan import PlanNode, build_plan, source_query_text

__all__ = [
    "AtomicQuery", "GlobalQuery", "JoinAtom", "NestSpec", "atomize", "Binding",
    "BoundAtomicQuery", "binding_table", "locate_sources", "apply_hints", "optimize",
    "PlanNode", "build_plan", "source_query_text",
]
