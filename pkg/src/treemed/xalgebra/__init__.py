"""Tree-tuple relations and the operators over them."""

from .model import (
    Diagnostics,
    NestLevel,
    NodeRef,
    Path,
    TreeBuilder,
    XRelation,
    XRelationSchema,
    XTree,
    XTuple,
    canonical_full,
    canonical_tuple,
    leaf_tree,
    make_tuple,
    prefix_close,
    tree_from_nested,
)
from .operators import (
    AggregateFn,
    JoinAlgo,
    XAggregate,
    XDifference,
    XIntersection,
    XJoin,
    XNest,
    XProduct,
    XProject,
    XRestrict,
    XSort,
    XSource,
    XUnion,
    XUnnest,
    x_aggregate,
    x_difference,
    x_intersection,
    x_join,
    x_nest,
    x_product,
    x_project,
    x_restrict,
    x_sort,
    x_source,
    x_union,
    x_unnest,
)
from .predicate import TRUE, And, Compare, Contains, Member, Not, Or
from .template import COPY, ROOT, VALUE, Element, Placeholder, Repeat, Text, x_reconstruct
