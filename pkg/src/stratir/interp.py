"""Reference interpreter: the semantics oracle for every rewrite.

Scalars evaluate as Python floats (f64).  The low-level primitives evaluate
exactly like their high-level forms: mapSeq/mapPar/mapSeqUnroll behave like
map, reduceSeq* like reduce, toMem like id; mapVec maps over vector lanes or
chunk elements.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ir import App, Expr, Lam, Lit, Prim, Var, MAP_KINDS, REDUCE_KINDS


class EvalError(Exception):
    pass


@dataclass
class Closure:
    param: str
    body: Expr
    env: dict


@dataclass
class PrimPartial:
    kind: str
    nats: tuple
    args: tuple


_ARITY = {
    **{k: 2 for k in MAP_KINDS},
    **{k: 3 for k in REDUCE_KINDS},
    "zip": 2, "add": 2, "mult": 2,
    "fst": 1, "snd": 1, "join": 1, "transpose": 1, "asScalar": 1,
    "toMem": 1, "id": 1, "split": 1, "slide": 1, "padClamp": 1,
    "asVector": 1,
}


def _lit_value(v):
    if isinstance(v, tuple):
        return [_lit_value(x) for x in v]
    return float(v)


def eval_expr(e: Expr, env: dict | None = None):
    env = env or {}
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise EvalError(f"unbound variable {e.name}") from None
    if isinstance(e, Lit):
        return _lit_value(e.value)
    if isinstance(e, Lam):
        return Closure(e.param, e.body, env)
    if isinstance(e, Prim):
        return PrimPartial(e.kind, e.nats, ())
    if isinstance(e, App):
        return apply_value(eval_expr(e.fn, env), eval_expr(e.arg, env))
    raise EvalError(f"cannot evaluate {e!r}")


def apply_value(f, v):
    if isinstance(f, Closure):
        return eval_expr(f.body, {**f.env, f.param: v})
    if isinstance(f, PrimPartial):
        args = f.args + (v,)
        if len(args) < _ARITY[f.kind]:
            return PrimPartial(f.kind, f.nats, args)
        return _exec_prim(f.kind, f.nats, args)
    raise EvalError(f"not a function value: {f!r}")


def _exec_prim(kind, nats, args):
    if kind in MAP_KINDS:
        f, xs = args
        _want_list(xs, kind)
        return [apply_value(f, x) for x in xs]
    if kind in REDUCE_KINDS:
        op, acc, xs = args
        _want_list(xs, kind)
        for x in xs:
            acc = apply_value(apply_value(op, acc), x)
        return acc
    if kind == "zip":
        a, b = args
        _want_list(a, kind)
        _want_list(b, kind)
        if len(a) != len(b):
            raise EvalError(f"zip of lengths {len(a)} and {len(b)}")
        return [(x, y) for x, y in zip(a, b)]
    if kind == "fst":
        return args[0][0]
    if kind == "snd":
        return args[0][1]
    if kind == "split":
        (n,) = nats
        (xs,) = args
        _want_list(xs, kind)
        if len(xs) % n != 0:
            raise EvalError(f"split({n}) of length {len(xs)}")
        return [xs[i:i + n] for i in range(0, len(xs), n)]
    if kind == "join":
        (xs,) = args
        out = []
        for row in xs:
            _want_list(row, kind)
            out.extend(row)
        return out
    if kind == "transpose":
        (m,) = args
        _want_list(m, kind)
        if not m:
            raise EvalError("transpose of empty array")
        return [list(col) for col in zip(*m)]
    if kind == "slide":
        sz, st = nats
        (xs,) = args
        _want_list(xs, kind)
        if len(xs) < sz or (len(xs) - sz) % st != 0:
            raise EvalError(f"slide({sz},{st}) of length {len(xs)}")
        return [xs[i:i + sz] for i in range(0, len(xs) - sz + 1, st)]
    if kind == "padClamp":
        l, r = nats
        (xs,) = args
        _want_list(xs, kind)
        return [xs[0]] * l + list(xs) + [xs[-1]] * r
    if kind == "asVector":
        (n,) = nats
        (xs,) = args
        return [xs[i:i + n] for i in range(0, len(xs), n)]
    if kind == "asScalar":
        (xs,) = args
        out = []
        for v in xs:
            out.extend(v)
        return out
    if kind in ("toMem", "id"):
        return args[0]
    if kind == "add":
        return args[0] + args[1]
    if kind == "mult":
        return args[0] * args[1]
    raise EvalError(f"unknown primitive {kind}")


def _want_list(v, kind):
    if not isinstance(v, list):
        raise EvalError(f"{kind} expects an array, got {type(v).__name__}")


def run(e: Expr, args: list):
    """Evaluate a lambda-chain program applied to the given input values."""
    v = eval_expr(e, {})
    for a in args:
        v = apply_value(v, a)
    return v


def flatten(v) -> list:
    """All scalars of a value in row-major order."""
    if isinstance(v, list):
        out = []
        for x in v:
            out.extend(flatten(x))
        return out
    if isinstance(v, tuple):
        return flatten(v[0]) + flatten(v[1])
    return [v]


def values_close(a, b, rel=1e-6, abs_=1e-9) -> bool:
    fa, fb = flatten(a), flatten(b)
    if len(fa) != len(fb):
        return False
    for x, y in zip(fa, fb):
        if abs(x - y) > abs_ + rel * max(abs(x), abs(y)):
            return False
    return True
