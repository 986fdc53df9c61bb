"""Query text to simple queries: parse, normalize, canonize."""

from .ast import Query, VarPath
from .canonize import Canonical, SimpleQuery, canonical_text, canonize
from .normalize import normalize
from .parser import parse
from .printer import print_query
