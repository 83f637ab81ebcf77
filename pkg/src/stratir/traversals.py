"""Traversal strategies for the array IR term type.

Children are visited in constructor order: App -> [fn, arg], Lam -> [body];
size arguments of primitives are not rewritable children.
"""

from __future__ import annotations

from . import ir
from .ir import App, Lam, Prim, Var, spine, spine_head
from .strategy import (
    Failure, Strategy, Success, TraversalInterface, TraversalOps, _p,
    apply_n_times, predicate,
)


class ExprTraversal(TraversalInterface):
    def children(self, t):
        return ir.children(t)

    def rebuild(self, t, kids):
        if isinstance(t, App):
            return App(kids[0], kids[1])
        if isinstance(t, Lam):
            return Lam(t.param, kids[0], t.param_type)
        return t

    def binding(self, t, i):
        if isinstance(t, Lam):
            return (t.param, t.param_type)
        return None


EXPR_TI = ExprTraversal()
_OPS = TraversalOps(EXPR_TI)

one = _OPS.one
all_ = _OPS.all
some = _OPS.some
top_down = _OPS.top_down
bottom_up = _OPS.bottom_up
all_top_down = _OPS.all_top_down
all_bottom_up = _OPS.all_bottom_up
try_all = _OPS.try_all
normalize = _OPS.normalize


def body(s) -> Strategy:
    """Apply s to the body of a function abstraction."""

    def fn(t, ctx):
        if not isinstance(t, Lam):
            return Failure(st.identity)
        with ctx.descend(0, (t.param, t.param_type)):
            r = ctx.apply(s, t.body)
        if isinstance(r, Failure):
            return r
        return Success(Lam(t.param, r.term, t.param_type))

    st = Strategy("body", fn, params=(_p(s),))
    return st


def function(s) -> Strategy:
    """Apply s to the applied function of an application node."""

    def fn(t, ctx):
        if not isinstance(t, App):
            return Failure(st.identity)
        with ctx.descend(0):
            r = ctx.apply(s, t.fn)
        if isinstance(r, Failure):
            return r
        return Success(App(r.term, t.arg))

    st = Strategy("function", fn, params=(_p(s),))
    return st


def argument(s) -> Strategy:
    """Apply s to the argument of an application node."""

    def fn(t, ctx):
        if not isinstance(t, App):
            return Failure(st.identity)
        with ctx.descend(1):
            r = ctx.apply(s, t.arg)
        if isinstance(r, Failure):
            return r
        return Success(App(t.fn, r.term))

    st = Strategy("argument", fn, params=(_p(s),))
    return st


def argument_of(kind: str, s) -> Strategy:
    """Like argument, but only when the applied function's head primitive has
    the given kind (matched through curried application spines)."""

    def fn(t, ctx):
        if not isinstance(t, App):
            return Failure(st.identity)
        head = spine_head(t.fn)
        if not (isinstance(head, Prim) and head.kind == kind):
            return Failure(st.identity)
        with ctx.descend(1):
            r = ctx.apply(s, t.arg)
        if isinstance(r, Failure):
            return r
        return Success(App(t.fn, r.term))

    st = Strategy("argumentOf", fn, params=(kind, _p(s)))
    return st


def fmap(s) -> Strategy:
    """Apply s under one map nesting level: function(argumentOf(map, body(s))).

    Requires the map's function argument to be a lambda (DFNF)."""
    inner = function(argument_of("map", body(s)))
    return Strategy("fmap", inner.fn, params=(_p(s),))


def move(i: int, s) -> Strategy:
    """Move along a function-composition pipeline: applyNTimes(i, argument, s)."""
    inner = apply_n_times(i, argument, s)
    return Strategy("move", inner.fn, params=(str(i), _p(s)))


# -- node predicates (succeed without rewriting) --

def _head_is(*kinds):
    def pred(t):
        h = spine_head(t)
        return isinstance(h, Prim) and h.kind in kinds

    return pred


is_fun = predicate("isFun", lambda t: isinstance(t, Lam))
is_map = predicate("isMap", _head_is("map"))
is_reduce = predicate("isReduce", _head_is(*ir.REDUCE_KINDS))
is_to_mem = predicate("isToMem", _head_is("toMem"))
is_high_level = predicate("isHighLevelMapOrReduce", _head_is("map", "reduce"))

PREDICATES = {
    "isFun": is_fun,
    "isMap": is_map,
    "isReduce": is_reduce,
    "isToMem": is_to_mem,
    "isHighLevelMapOrReduce": is_high_level,
}
