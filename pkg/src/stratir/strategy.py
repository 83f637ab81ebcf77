"""Strategy combinators, generic over the term type.

A strategy is a named, pure, total function from a term to a RewriteResult.
Complete traversals (topDown, tryAll, ...) are parameterized over a
TraversalInterface that enumerates and rebuilds the children of a term, so the
whole module works for any tree-shaped program representation.

Execution is bounded: a fuel budget counts every leaf-strategy attempt and a
depth bound limits strategy nesting; exhausting either raises FuelExhausted,
which is an error distinct from rewrite Failure.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

DEFAULT_FUEL = 10_000_000
DEFAULT_MAX_DEPTH = 100_000


class FuelExhausted(Exception):
    def __init__(self, kind: str, limit: int):
        super().__init__(f"{kind} budget of {limit} exhausted")
        self.kind = kind


@dataclass(frozen=True)
class Success:
    term: object


@dataclass(frozen=True)
class Failure:
    strategy: str  # identity of the failing strategy


@dataclass
class ExecContext:
    fuel: int = DEFAULT_FUEL
    max_depth: int = DEFAULT_MAX_DEPTH
    fuel_limit: int = DEFAULT_FUEL
    depth: int = 0
    total: int = 0
    per_rule: Counter = field(default_factory=Counter)
    committed: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    path: list = field(default_factory=list)
    tenv: list = field(default_factory=list)  # stack of (name, type|None)

    def apply(self, s: "Strategy", term):
        if s.is_leaf:
            self.fuel -= 1
            if self.fuel < 0:
                raise FuelExhausted("fuel", self.fuel_limit)
        self.depth += 1
        if self.depth > self.max_depth:
            raise FuelExhausted("depth", self.max_depth)
        mark = len(self.committed)
        try:
            res = s.fn(term, self)
        finally:
            self.depth -= 1
        if isinstance(res, Success):
            if s.is_rule:
                entry = {"rule": s.identity, "path": tuple(self.path),
                         "committed": False}
                self.total += 1
                self.per_rule[s.name] += 1
                self.trace.append(entry)
                self.committed.append(entry)
        else:
            del self.committed[mark:]
        return res

    def descend(self, index, binding=None):
        return _Descend(self, index, binding)

    def binder_types(self) -> dict:
        env = {}
        for name, t in self.tenv:
            env[name] = t
        return env

    def finish(self):
        for entry in self.committed:
            entry["committed"] = True

    @property
    def committed_count(self):
        return len(self.committed)


class _Descend:
    def __init__(self, ctx, index, binding):
        self.ctx, self.index, self.binding = ctx, index, binding

    def __enter__(self):
        self.ctx.path.append(self.index)
        if self.binding is not None:
            self.ctx.tenv.append(self.binding)
        return self.ctx

    def __exit__(self, *exc):
        self.ctx.path.pop()
        if self.binding is not None:
            self.ctx.tenv.pop()
        return False


class Strategy:
    """A named program transformation; apply with s(term) or ctx.apply."""

    __slots__ = ("name", "params", "fn", "is_rule", "is_leaf")

    def __init__(self, name, fn, params=(), is_rule=False, is_leaf=None):
        self.name = name
        self.params = tuple(params)
        self.fn = fn
        self.is_rule = is_rule
        self.is_leaf = is_rule if is_leaf is None else is_leaf

    @property
    def identity(self) -> str:
        if self.params:
            return f"{self.name}({', '.join(self.params)})"
        return self.name

    def __repr__(self):
        return f"<strategy {self.identity}>"

    def __call__(self, term, fuel=None, max_depth=None):
        res, _ = run_strategy(self, term, fuel=fuel, max_depth=max_depth)
        return res


def run_strategy(s: Strategy, term, fuel=None, max_depth=None):
    """Apply s to term in a fresh context; returns (result, context)."""
    fuel = DEFAULT_FUEL if fuel is None else fuel
    ctx = ExecContext(fuel=fuel, fuel_limit=fuel,
                      max_depth=DEFAULT_MAX_DEPTH if max_depth is None else max_depth)
    res = ctx.apply(s, term)
    if isinstance(res, Success):
        ctx.finish()
    else:
        ctx.committed.clear()
    return res, ctx


def rule(name, fn, params=()):
    """Wrap fn(term, ctx) -> term|None as a leaf rewrite rule."""

    def run(term, ctx):
        out = fn(term, ctx)
        if out is None:
            return Failure(st.identity)
        return Success(out)

    st = Strategy(name, run, params=params, is_rule=True)
    return st


# ---------------------------------------------------------------------------
# basic combinators

def _p(s):  # render a strategy parameter
    return s.identity


id_ = Strategy("id", lambda t, ctx: Success(t), is_leaf=True)
fail = Strategy("fail", lambda t, ctx: Failure("fail"), is_leaf=True)


def seq(first, second, *rest) -> Strategy:
    if rest:
        return seq(seq(first, second), *rest)

    def fn(t, ctx):
        r = ctx.apply(first, t)
        if isinstance(r, Failure):
            return r
        return ctx.apply(second, r.term)

    return Strategy("seq", fn, params=(_p(first), _p(second)))


def lchoice(first, second) -> Strategy:
    def fn(t, ctx):
        r = ctx.apply(first, t)
        if isinstance(r, Success):
            return r
        return ctx.apply(second, t)

    return Strategy("lChoice", fn, params=(_p(first), _p(second)))


def try_(s) -> Strategy:
    inner = lchoice(s, id_)
    return Strategy("try", inner.fn, params=(_p(s),))


def repeat(s) -> Strategy:
    # iterative form of try(s ; repeat(s)); never fails, fuel-bounded
    def fn(t, ctx):
        while True:
            r = ctx.apply(s, t)
            if isinstance(r, Failure):
                return Success(t)
            t = r.term

    return Strategy("repeat", fn, params=(_p(s),))


def apply_n_times(n: int, f, s) -> Strategy:
    if n < 0:
        raise ValueError("applyNTimes needs n >= 0")
    for _ in range(n):
        s = f(s)
    return s


def not_(s) -> Strategy:
    def fn(t, ctx):
        r = ctx.apply(s, t)
        if isinstance(r, Success):
            return Failure(st.identity)
        return Success(t)

    st = Strategy("not", fn, params=(_p(s),))
    return st


def predicate(name, pred, params=()) -> Strategy:
    """Strategy that succeeds (input unchanged) iff pred holds at the root."""

    def fn(t, ctx):
        if pred(t):
            return Success(t)
        return Failure(st.identity)

    st = Strategy(name, fn, params=params, is_leaf=True)
    return st


# ---------------------------------------------------------------------------
# traversals over a child interface

class TraversalInterface:
    """Child access for one term type.

    children(t)        -> list of immediate children
    rebuild(t, kids)   -> t with children replaced
    binding(t, i)      -> (name, type|None) bound around child i, or None
    """

    def children(self, t):
        raise NotImplementedError

    def rebuild(self, t, kids):
        raise NotImplementedError

    def binding(self, t, i):
        return None


class TraversalOps:
    """all/one/some and the complete traversals for one term type."""

    def __init__(self, ti: TraversalInterface):
        self.ti = ti

    def one(self, s) -> Strategy:
        def fn(t, ctx):
            kids = self.ti.children(t)
            for i, k in enumerate(kids):
                with ctx.descend(i, self.ti.binding(t, i)):
                    r = ctx.apply(s, k)
                if isinstance(r, Success):
                    out = list(kids)
                    out[i] = r.term
                    return Success(self.ti.rebuild(t, out))
            return Failure(st.identity)

        st = Strategy("one", fn, params=(_p(s),))
        return st

    def all(self, s) -> Strategy:
        def fn(t, ctx):
            kids = self.ti.children(t)
            out = []
            for i, k in enumerate(kids):
                with ctx.descend(i, self.ti.binding(t, i)):
                    r = ctx.apply(s, k)
                if isinstance(r, Failure):
                    return r
                out.append(r.term)
            return Success(self.ti.rebuild(t, out))

        st = Strategy("all", fn, params=(_p(s),))
        return st

    def some(self, s) -> Strategy:
        def fn(t, ctx):
            kids = self.ti.children(t)
            out = list(kids)
            hit = False
            for i, k in enumerate(kids):
                with ctx.descend(i, self.ti.binding(t, i)):
                    r = ctx.apply(s, k)
                if isinstance(r, Success):
                    out[i] = r.term
                    hit = True
            if not hit:
                return Failure(st.identity)
            return Success(self.ti.rebuild(t, out))

        st = Strategy("some", fn, params=(_p(s),))
        return st

    def top_down(self, s) -> Strategy:
        # (s <+ one(topDown(s)))
        def fn(t, ctx):
            return ctx.apply(lchoice(s, self.one(st)), t)

        st = Strategy("topDown", fn, params=(_p(s),))
        return st

    def bottom_up(self, s) -> Strategy:
        # (one(bottomUp(s)) <+ s)
        def fn(t, ctx):
            return ctx.apply(lchoice(self.one(st), s), t)

        st = Strategy("bottomUp", fn, params=(_p(s),))
        return st

    def all_top_down(self, s) -> Strategy:
        def fn(t, ctx):
            return ctx.apply(seq(s, self.all(st)), t)

        st = Strategy("allTopDown", fn, params=(_p(s),))
        return st

    def all_bottom_up(self, s) -> Strategy:
        def fn(t, ctx):
            return ctx.apply(seq(self.all(st), s), t)

        st = Strategy("allBottomUp", fn, params=(_p(s),))
        return st

    def try_all(self, s) -> Strategy:
        # all(tryAll(try(s))) ; try(s)  -- bottom-up, never fails
        inner = try_(s)
        st = Strategy("tryAll", None, params=(_p(s),))

        def fn(t, ctx):
            return ctx.apply(seq(self.all(st), inner), t)

        st.fn = fn
        return st

    def normalize(self, s) -> Strategy:
        inner = repeat(self.top_down(s))
        return Strategy("normalize", inner.fn, params=(_p(s),))
