"""Type inference and checking for the array IR.

All array sizes are concrete integers; inference only has to propagate them.
Size arithmetic (split/join/slide/pad and the vector reshapes) is handled by
deferred relation constraints that resolve once enough sizes are known.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .ir import (
    App, ArrType, Expr, F32, FnType, Lam, Lit, PairType, Prim, Var, VecType,
    format_type,
)


class TypeError_(Exception):
    pass


@dataclass(frozen=True)
class TVar:
    id: int


@dataclass(frozen=True)
class SVar:
    id: int


class _Inference:
    def __init__(self):
        self._ids = itertools.count()
        self.tsub: dict[int, object] = {}
        self.ssub: dict[int, object] = {}
        self.relations: list[tuple] = []

    def tvar(self):
        return TVar(next(self._ids))

    def svar(self):
        return SVar(next(self._ids))

    # -- substitution walking --

    def t_resolve(self, t):
        while isinstance(t, TVar) and t.id in self.tsub:
            t = self.tsub[t.id]
        if isinstance(t, ArrType):
            return ArrType(self.s_resolve(t.size), self.t_resolve(t.elem))
        if isinstance(t, PairType):
            return PairType(self.t_resolve(t.fst), self.t_resolve(t.snd))
        if isinstance(t, FnType):
            return FnType(self.t_resolve(t.arg), self.t_resolve(t.res))
        if isinstance(t, VecType):
            return VecType(self.s_resolve(t.width))
        return t

    def s_resolve(self, s):
        while isinstance(s, SVar) and s.id in self.ssub:
            s = self.ssub[s.id]
        return s

    # -- unification --

    def unify(self, a, b):
        a, b = self.t_resolve(a), self.t_resolve(b)
        if isinstance(a, TVar):
            if isinstance(b, TVar) and b.id == a.id:
                return
            if self._occurs(a, b):
                raise TypeError_("recursive type")
            self.tsub[a.id] = b
            return
        if isinstance(b, TVar):
            self.unify(b, a)
            return
        if a == F32 and b == F32:
            return
        if isinstance(a, ArrType) and isinstance(b, ArrType):
            self.s_unify(a.size, b.size)
            self.unify(a.elem, b.elem)
            return
        if isinstance(a, PairType) and isinstance(b, PairType):
            self.unify(a.fst, b.fst)
            self.unify(a.snd, b.snd)
            return
        if isinstance(a, FnType) and isinstance(b, FnType):
            self.unify(a.arg, b.arg)
            self.unify(a.res, b.res)
            return
        if isinstance(a, VecType) and isinstance(b, VecType):
            self.s_unify(a.width, b.width)
            return
        raise TypeError_(f"cannot unify {format_type(self.t_resolve(a))} "
                         f"with {format_type(self.t_resolve(b))}")

    def _occurs(self, v, t):
        t = self.t_resolve(t)
        if isinstance(t, TVar):
            return t.id == v.id
        if isinstance(t, ArrType):
            return self._occurs(v, t.elem)
        if isinstance(t, PairType):
            return self._occurs(v, t.fst) or self._occurs(v, t.snd)
        if isinstance(t, FnType):
            return self._occurs(v, t.arg) or self._occurs(v, t.res)
        return False

    def s_unify(self, a, b):
        a, b = self.s_resolve(a), self.s_resolve(b)
        if isinstance(a, SVar):
            if isinstance(b, SVar) and b.id == a.id:
                return
            self.ssub[a.id] = b
            return
        if isinstance(b, SVar):
            self.ssub[b.id] = a
            return
        if a != b:
            raise TypeError_(f"size mismatch: {a} != {b}")

    # -- deferred size relations --

    def defer(self, kind, *args):
        self.relations.append((kind, *args))

    def solve_relations(self):
        pending = self.relations
        while True:
            progress = False
            remaining = []
            for rel in pending:
                if self._try_relation(rel):
                    progress = True
                else:
                    remaining.append(rel)
            pending = remaining
            if not progress:
                break
        self.relations = pending

    def _try_relation(self, rel):
        kind = rel[0]
        if kind == "mul":  # whole == q * k
            _, whole, q, k = rel
            whole, q, k = map(self.s_resolve, (whole, q, k))
            if isinstance(q, int) and isinstance(k, int):
                self.s_unify(whole, q * k)
                return True
            if isinstance(whole, int) and isinstance(k, int):
                if whole % k != 0:
                    raise TypeError_(f"size {whole} not divisible by {k}")
                self.s_unify(q, whole // k)
                return True
            if isinstance(whole, int) and isinstance(q, int):
                if q == 0 or whole % q != 0:
                    raise TypeError_(f"size {whole} not divisible by {q}")
                self.s_unify(k, whole // q)
                return True
            return False
        if kind == "slide":  # n == (q - 1) * st + sz
            _, n, q, sz, st = rel
            n, q = self.s_resolve(n), self.s_resolve(q)
            if isinstance(n, int):
                if (n - sz) % st != 0 or n < sz:
                    raise TypeError_(f"slide({sz}, {st}) does not fit size {n}")
                self.s_unify(q, (n - sz) // st + 1)
                return True
            if isinstance(q, int):
                self.s_unify(n, (q - 1) * st + sz)
                return True
            return False
        if kind == "add":  # out == n + c
            _, out, n, c = rel
            out, n = self.s_resolve(out), self.s_resolve(n)
            if isinstance(n, int):
                self.s_unify(out, n + c)
                return True
            if isinstance(out, int):
                if out - c < 1:
                    raise TypeError_("padded size underflow")
                self.s_unify(n, out - c)
                return True
            return False
        if kind == "mapvec":  # dispatch on the input being Vec or array-of-pairs
            _, fa, fb, inp, out = rel
            inp = self.t_resolve(inp)
            if isinstance(inp, VecType):
                self.unify(fa, F32)
                self.unify(fb, F32)
                self.unify(out, inp)
                return True
            if isinstance(inp, ArrType):
                self.unify(fa, inp.elem)
                self.unify(fb, F32)
                self.unify(out, ArrType(inp.size, F32))
                return True
            if inp == F32:
                raise TypeError_("mapVec needs a vector or chunk argument")
            return False
        raise AssertionError(kind)


def _lit_type(v):
    if isinstance(v, float):
        return F32
    if isinstance(v, tuple):
        if not v:
            raise TypeError_("empty array literal")
        elem = _lit_type(v[0])
        for x in v[1:]:
            if _lit_type(x) != elem:
                raise TypeError_("ragged array literal")
        return ArrType(len(v), elem)
    raise TypeError_(f"bad literal {v!r}")


def _prim_type(inf: _Inference, p: Prim):
    k = p.kind
    if k in ("map", "mapSeq", "mapPar", "mapSeqUnroll"):
        a, b, n = inf.tvar(), inf.tvar(), inf.svar()
        return FnType(FnType(a, b), FnType(ArrType(n, a), ArrType(n, b)))
    if k == "mapVec":
        fa, fb, inp, out = inf.tvar(), inf.tvar(), inf.tvar(), inf.tvar()
        inf.defer("mapvec", fa, fb, inp, out)
        return FnType(FnType(fa, fb), FnType(inp, out))
    if k in ("reduce", "reduceSeq", "reduceSeqUnroll"):
        a, b, n = inf.tvar(), inf.tvar(), inf.svar()
        return FnType(FnType(b, FnType(a, b)),
                      FnType(b, FnType(ArrType(n, a), b)))
    if k == "zip":
        a, b, n = inf.tvar(), inf.tvar(), inf.svar()
        return FnType(ArrType(n, a),
                      FnType(ArrType(n, b), ArrType(n, PairType(a, b))))
    if k == "fst":
        a, b = inf.tvar(), inf.tvar()
        return FnType(PairType(a, b), a)
    if k == "snd":
        a, b = inf.tvar(), inf.tvar()
        return FnType(PairType(a, b), b)
    if k == "split":
        (n,) = p.nats
        a, m, q = inf.tvar(), inf.svar(), inf.svar()
        inf.defer("mul", m, q, n)
        return FnType(ArrType(m, a), ArrType(q, ArrType(n, a)))
    if k == "join":
        a, n, m, w = inf.tvar(), inf.svar(), inf.svar(), inf.svar()
        inf.defer("mul", w, n, m)
        return FnType(ArrType(n, ArrType(m, a)), ArrType(w, a))
    if k == "transpose":
        a, n, m = inf.tvar(), inf.svar(), inf.svar()
        return FnType(ArrType(n, ArrType(m, a)), ArrType(m, ArrType(n, a)))
    if k == "slide":
        sz, st = p.nats
        a, n, q = inf.tvar(), inf.svar(), inf.svar()
        inf.defer("slide", n, q, sz, st)
        return FnType(ArrType(n, a), ArrType(q, ArrType(sz, a)))
    if k == "padClamp":
        l, r = p.nats
        a, n, q = inf.tvar(), inf.svar(), inf.svar()
        inf.defer("add", q, n, l + r)
        return FnType(ArrType(n, a), ArrType(q, a))
    if k == "asVector":
        (n,) = p.nats
        m, q = inf.svar(), inf.svar()
        inf.defer("mul", m, q, n)
        return FnType(ArrType(m, F32), ArrType(q, VecType(n)))
    if k == "asScalar":
        n, w, m = inf.svar(), inf.svar(), inf.svar()
        inf.defer("mul", m, n, w)
        return FnType(ArrType(n, VecType(w)), ArrType(m, F32))
    if k in ("toMem", "id"):
        a = inf.tvar()
        return FnType(a, a)
    if k in ("add", "mult"):
        return FnType(F32, FnType(F32, F32))
    raise TypeError_(f"unknown primitive {k}")


def _infer(inf: _Inference, e: Expr, env: dict, memo: dict):
    if isinstance(e, Var):
        if e.name not in env:
            raise TypeError_(f"untyped free variable {e.name}")
        t = env[e.name]
    elif isinstance(e, Lit):
        t = _lit_type(e.value)
    elif isinstance(e, Prim):
        t = _prim_type(inf, e)
    elif isinstance(e, Lam):
        pt = e.param_type if e.param_type is not None else inf.tvar()
        bt = _infer(inf, e.body, {**env, e.param: pt}, memo)
        t = FnType(pt, bt)
    elif isinstance(e, App):
        ft = _infer(inf, e.fn, env, memo)
        at = _infer(inf, e.arg, env, memo)
        rt = inf.tvar()
        inf.unify(ft, FnType(at, rt))
        t = rt
    else:
        raise TypeError_(f"not an expression: {e!r}")
    memo[id(e)] = t
    return t


def _check_ground(t):
    if isinstance(t, (TVar, SVar)):
        raise TypeError_("unresolved type (not enough annotations)")
    if isinstance(t, ArrType):
        if not isinstance(t.size, int):
            raise TypeError_("unresolved array size")
        if t.size < 1:
            raise TypeError_(f"array size must be positive, got {t.size}")
        _check_ground(t.elem)
    elif isinstance(t, PairType):
        _check_ground(t.fst)
        _check_ground(t.snd)
    elif isinstance(t, FnType):
        _check_ground(t.arg)
        _check_ground(t.res)
    elif isinstance(t, VecType):
        if not isinstance(t.width, int):
            raise TypeError_("unresolved vector width")


def typecheck(e: Expr, env: dict | None = None):
    """Infer the unique type of e; raises TypeError_ unless fully concrete."""
    inf = _Inference()
    memo: dict[int, object] = {}
    t = _infer(inf, e, dict(env or {}), memo)
    inf.solve_relations()
    if inf.relations:
        raise TypeError_("unresolved size constraints")
    t = inf.t_resolve(t)
    _check_ground(t)
    return t


def node_types(e: Expr, env: dict | None = None):
    """Typecheck e and return {id(node): ground DataType} for every node."""
    inf = _Inference()
    memo: dict[int, object] = {}
    _infer(inf, e, dict(env or {}), memo)
    inf.solve_relations()
    if inf.relations:
        raise TypeError_("unresolved size constraints")
    out = {}
    for k, t in memo.items():
        t = inf.t_resolve(t)
        _check_ground(t)
        out[k] = t
    return out


def try_infer(e: Expr, env: dict | None = None):
    """Best-effort local inference; returns a possibly partial type or None.

    Unknown free variables get fresh type variables, so structural facts
    (e.g. "this is a function from a pair of scalars") are still derivable
    for open subterms.
    """
    inf = _Inference()
    env = dict(env or {})
    for v in sorted(_free(e)):
        env.setdefault(v, inf.tvar())
    env = {k: (inf.tvar() if v is None else v) for k, v in env.items()}
    try:
        t = _infer(inf, e, env, {})
        inf.solve_relations()
        return inf.t_resolve(t)
    except TypeError_:
        return None


def _free(e):
    from .ir import free_vars
    return free_vars(e)


def annotate(e: Expr, env: dict | None = None) -> Expr:
    """Return a copy of e with every binder's type filled in from whole-term
    inference.  Requires e to typecheck completely."""
    inf = _Inference()
    memo: dict[int, object] = {}
    lam_param: dict[int, object] = {}

    def infer_collect(e, env):
        if isinstance(e, Lam):
            pt = e.param_type if e.param_type is not None else inf.tvar()
            lam_param[id(e)] = pt
            bt = infer_collect(e.body, {**env, e.param: pt})
            t = FnType(pt, bt)
        elif isinstance(e, App):
            ft = infer_collect(e.fn, env)
            at = infer_collect(e.arg, env)
            rt = inf.tvar()
            inf.unify(ft, FnType(at, rt))
            t = rt
        else:
            t = _infer(inf, e, env, {})
        memo[id(e)] = t
        return t

    infer_collect(e, dict(env or {}))
    inf.solve_relations()
    if inf.relations:
        raise TypeError_("unresolved size constraints")

    def rebuild(e):
        if isinstance(e, Lam):
            pt = inf.t_resolve(lam_param[id(e)])
            _check_ground(pt)
            return Lam(e.param, rebuild(e.body), pt)
        if isinstance(e, App):
            return App(rebuild(e.fn), rebuild(e.arg))
        return e

    return rebuild(e)


def is_function_type(t) -> bool:
    return isinstance(t, FnType)


def is_scalar_pair_tree(t) -> bool:
    """Scalar, or a pair tree whose leaves are all scalars."""
    if t == F32:
        return True
    if isinstance(t, PairType):
        return is_scalar_pair_tree(t.fst) and is_scalar_pair_tree(t.snd)
    return False


def outer_array_dims(t) -> int:
    n = 0
    while isinstance(t, ArrType):
        n += 1
        t = t.elem
    return n
