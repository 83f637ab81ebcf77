"""The leaf rewrite-rule catalog.

Every rule is a Strategy with is_rule set, matches one local redex shape and
is semantics-preserving under the reference interpreter.  Rules that need
typing facts (vectorize, createTransposePair, etaAbstraction, splitJoin's
divisibility check) infer them locally from the focused subterm plus the
binder types collected by the traversal context; a size check that cannot be
resolved locally is skipped and left to the whole-program type checker.
"""

from __future__ import annotations

from .ir import (
    App, ArrType, F32, FnType, Lam, Lit, Prim, Var,
    alpha_eq, app, free_vars, fresh, prim, refresh, spine, spine_head,
    substitute,
)
from .strategy import Strategy, lchoice, rule
from .typecheck import (
    is_scalar_pair_tree, outer_array_dims, try_infer,
)

HL_MAP = "map"
HL_REDUCE = "reduce"


def _is_prim(e, kind):
    return isinstance(e, Prim) and e.kind == kind


def _full_reduce(e):
    """spine (reduce, [op, init, input]) for a high-level reduce, or None."""
    h, args = spine(e)
    if _is_prim(h, HL_REDUCE) and len(args) == 3:
        return args
    return None


def _full_map(e):
    h, args = spine(e)
    if _is_prim(h, HL_MAP) and len(args) == 2:
        return args
    return None


def _infer_env(ctx):
    return ctx.binder_types()


# ---------------------------------------------------------------------------
# lambda calculus

def _beta(t, ctx):
    if isinstance(t, App) and isinstance(t.fn, Lam):
        return substitute(t.fn.body, t.fn.param, t.arg)
    return None


beta_reduction = rule("betaReduction", _beta)


def _eta(t, ctx):
    if (isinstance(t, Lam) and isinstance(t.body, App)
            and isinstance(t.body.arg, Var) and t.body.arg.name == t.param
            and t.param not in free_vars(t.body.fn)):
        return t.body.fn
    return None


eta_reduction = rule("etaReduction", _eta)


def _eta_abs(t, ctx):
    if isinstance(t, Lam):
        return None
    ty = try_infer(t, _infer_env(ctx))
    if not isinstance(ty, FnType):
        return None
    x = fresh("e")
    pt = ty.arg if _ground_type(ty.arg) else None
    return Lam(x, App(t, Var(x)), pt)


def _ground_type(t):
    if isinstance(t, ArrType):
        return isinstance(t.size, int) and _ground_type(t.elem)
    if isinstance(t, FnType):
        return _ground_type(t.arg) and _ground_type(t.res)
    from .ir import PairType, VecType
    if isinstance(t, PairType):
        return _ground_type(t.fst) and _ground_type(t.snd)
    if isinstance(t, VecType):
        return isinstance(t.width, int)
    return t == F32


eta_abstraction = rule("etaAbstraction", _eta_abs)


# ---------------------------------------------------------------------------
# fusion / fission

def _map_fusion(t, ctx):
    # map f (map g xs) -> map (fun x => f (g x)) xs
    outer = _full_map(t)
    if outer is None:
        return None
    f, inner_app = outer
    inner = _full_map(inner_app)
    if inner is None:
        return None
    g, xs = inner
    x = fresh("x")
    return app(Prim(HL_MAP), Lam(x, App(f, App(g, Var(x)))), xs)


map_fusion = rule("mapFusion", _map_fusion)


def _fission_fn(f):
    # fun x => F (G<x>)  with F independent of x and G<x> mentioning x
    if not (isinstance(f, Lam) and isinstance(f.body, App)):
        return None
    F, G = f.body.fn, f.body.arg
    if f.param in free_vars(F) or f.param not in free_vars(G):
        return None
    return F, Lam(f.param, G, f.param_type)


def _map_fission(t, ctx):
    # map (fun x => f (g x)) xs -> map f (map (fun x => g x) xs)
    full = _full_map(t)
    if full is not None:
        parts = _fission_fn(full[0])
        if parts is None:
            return None
        F, G = parts
        return app(Prim(HL_MAP), F, app(Prim(HL_MAP), G, full[1]))
    if isinstance(t, App) and _is_prim(t.fn, HL_MAP):
        parts = _fission_fn(t.arg)
        if parts is None:
            return None
        F, G = parts
        y = fresh("y")
        return Lam(y, app(Prim(HL_MAP), F, app(Prim(HL_MAP), G, Var(y))))
    return None


map_fission = rule("mapFission", _map_fission)


def _fuse_reduce_map(t, ctx):
    # reduce op init (map f xs) -> reduce (fun acc x => op acc (f x)) init xs
    h, args = spine(t)
    if not (isinstance(h, Prim) and h.kind in ("reduce", "reduceSeq", "reduceSeqUnroll")
            and len(args) == 3):
        return None
    op, init, inp = args
    inner = _full_map(inp)
    if inner is None:
        return None
    f, xs = inner
    acc, x = fresh("acc"), fresh("x")
    new_op = Lam(acc, Lam(x, App(App(op, Var(acc)), App(f, Var(x)))))
    return app(h, new_op, init, xs)


fuse_reduce_map = rule("fuseReduceMap", _fuse_reduce_map)


# ---------------------------------------------------------------------------
# strip-mining

def make_split_join(n: int) -> Strategy:
    def fn(t, ctx):
        if isinstance(t, App) and _is_prim(t.fn, HL_MAP):
            # partial application: map f -> fun xs => join (map (map f) (split n xs))
            f = t.arg
            xs = fresh("xs")
            body = App(Prim("join"),
                       app(Prim(HL_MAP), App(Prim(HL_MAP), f),
                           App(prim("split", n), Var(xs))))
            return Lam(xs, body)
        full = _full_map(t)
        if full is not None:
            f, xs = full
            ty = try_infer(xs, _infer_env(ctx))
            if isinstance(ty, ArrType) and isinstance(ty.size, int) and ty.size % n != 0:
                return None
            return App(Prim("join"),
                       app(Prim(HL_MAP), App(Prim(HL_MAP), f),
                           App(prim("split", n), xs)))
        return None

    return rule("splitJoin", fn, params=(str(n),))


def make_split_reduce(n: int) -> Strategy:
    def fn(t, ctx):
        h, args = spine(t)
        if not (_is_prim(h, HL_REDUCE) and len(args) in (2, 3)):
            return None
        op, init = args[0], args[1]
        a, y = fresh("a"), fresh("y")
        inner = app(Prim(HL_REDUCE), refresh(op), refresh(init), Var(y))
        new_op = Lam(a, Lam(y, App(App(op, Var(a)), inner)))
        if len(args) == 2:
            xs = fresh("xs")
            return Lam(xs, app(Prim(HL_REDUCE), new_op, init,
                               App(prim("split", n), Var(xs))))
        xs = args[2]
        ty = try_infer(xs, _infer_env(ctx))
        if isinstance(ty, ArrType) and isinstance(ty.size, int) and ty.size % n != 0:
            return None
        return app(Prim(HL_REDUCE), new_op, init, App(prim("split", n), xs))

    return rule("splitReduce", fn, params=(str(n),))


def make_split(n: int) -> Strategy:
    inner = lchoice(make_split_join(n), make_split_reduce(n))
    return Strategy("split", inner.fn, params=(str(n),))


# ---------------------------------------------------------------------------
# loop interchange building blocks

def _id_after(t, ctx):
    # f -> id . f   (on function-typed terms the composition is eta-expanded;
    # at data positions it is a plain application of id)
    ty = try_infer(t, _infer_env(ctx))
    if isinstance(ty, FnType):
        x = fresh("x")
        return Lam(x, App(Prim("id"), App(t, Var(x))))
    return App(Prim("id"), t)


id_after = rule("idAfter", _id_after)


def _create_transpose_pair(t, ctx):
    # id e -> transpose (transpose e), when e is at least 2D
    if not (isinstance(t, App) and _is_prim(t.fn, "id")):
        return None
    ty = try_infer(t.arg, _infer_env(ctx))
    if ty is None or outer_array_dims(ty) < 2:
        return None
    return App(Prim("transpose"), App(Prim("transpose"), t.arg))


create_transpose_pair = rule("createTransposePair", _create_transpose_pair)


def _map_map_nest(e):
    """Recognize `map (map g)`-shaped nests: the mapped function applies a map
    (possibly eta-expanded) directly to its element."""
    if not (isinstance(e, App) and _is_prim(e.fn, HL_MAP)):
        return False
    f = e.arg
    if isinstance(f, App) and _is_prim(f.fn, HL_MAP):
        return True
    if isinstance(f, Lam) and isinstance(f.body, App):
        h, args = spine(f.body)
        if (_is_prim(h, HL_MAP) and len(args) == 2
                and isinstance(args[1], Var) and args[1].name == f.param
                and f.param not in free_vars(args[0])):
            return True
    return False


def _map_map_before_transpose(t, ctx):
    # (map (map f)) (transpose x) -> transpose ((map (map f)) x)
    if not (isinstance(t, App) and _map_map_nest(t.fn)
            and isinstance(t.arg, App) and _is_prim(t.arg.fn, "transpose")):
        return None
    return App(Prim("transpose"), App(t.fn, t.arg.arg))


map_map_f_before_transpose = rule("mapMapFBeforeTranspose", _map_map_before_transpose)


def _transpose_before_map_map(t, ctx):
    # transpose ((map (map f)) x) -> (map (map f)) (transpose x)
    if not (isinstance(t, App) and _is_prim(t.fn, "transpose")
            and isinstance(t.arg, App) and _map_map_nest(t.arg.fn)):
        return None
    return App(t.arg.fn, App(Prim("transpose"), t.arg.arg))


transpose_before_map_map_f = rule("transposeBeforeMapMapF", _transpose_before_map_map)


def _map_map_interchange(t, ctx):
    # map (fun a => map (fun b => e) c) xs
    #   -> transpose (map (fun b => map (fun a => e) xs) c)   [a not free in c]
    outer = _full_map(t)
    if outer is None or not isinstance(outer[0], Lam):
        return None
    fa, xs = outer
    inner = _full_map(fa.body)
    if inner is None or not isinstance(inner[0], Lam):
        return None
    fb, c = inner
    if fa.param in free_vars(c):
        return None
    new_inner = app(Prim(HL_MAP), Lam(fa.param, fb.body, fa.param_type), xs)
    new_outer = app(Prim(HL_MAP), Lam(fb.param, new_inner, fb.param_type), c)
    return App(Prim("transpose"), new_outer)


map_map_interchange = rule("mapMapInterchange", _map_map_interchange)


def _split_before_map(t, ctx):
    # split n (map f xs) -> map (map f) (split n xs)
    if not (isinstance(t, App) and isinstance(t.fn, Prim) and t.fn.kind == "split"):
        return None
    inner = _full_map(t.arg)
    if inner is None:
        return None
    f, xs = inner
    return app(Prim(HL_MAP), App(Prim(HL_MAP), f), App(t.fn, xs))


split_before_map = rule("splitBeforeMap", _split_before_map)


def _lift_reduce(t, ctx):
    # map (fun b => reduce op init (g b)) c
    #   -> reduce (fun acc sl => map (op .) (zip acc sl))
    #             (map (fun b => init) c)
    #             (transpose (map (fun b => g b) c))
    outer = _full_map(t)
    if outer is None or not isinstance(outer[0], Lam):
        return None
    fb, c = outer
    red = _full_reduce(fb.body)
    if red is None:
        return None
    op, init, g = red
    b = fb.param
    b1, b2 = fresh(b), fresh(b)
    init_arr = app(Prim(HL_MAP),
                   Lam(b1, substitute(refresh(init), b, Var(b1)), fb.param_type),
                   refresh(c))
    slices = App(Prim("transpose"),
                 app(Prim(HL_MAP),
                     Lam(b2, substitute(refresh(g), b, Var(b2)), fb.param_type),
                     refresh(c)))
    acc, sl, pr = fresh("acc"), fresh("sl"), fresh("pr")
    pt_op = Lam(pr, App(App(refresh(op), App(Prim("fst"), Var(pr))),
                        App(Prim("snd"), Var(pr))))
    new_op = Lam(acc, Lam(sl, app(Prim(HL_MAP), pt_op,
                                  app(Prim("zip"), Var(acc), Var(sl)))))
    return app(Prim(HL_REDUCE), new_op, init_arr, slices)


lift_reduce = rule("liftReduce", _lift_reduce)


def _absorb_reduce_init(t, ctx):
    # add a (reduce op 0 xs) -> reduce op a xs,
    # for op of shape (fun acc x => add acc (g x))
    h, args = spine(t)
    if not (_is_prim(h, "add") and len(args) == 2):
        return None
    a, red_app = args
    red = _full_reduce(red_app)
    if red is None:
        return None
    op, init, xs = red
    if not (isinstance(init, Lit) and init.value == 0.0):
        return None
    if not (isinstance(op, Lam) and isinstance(op.body, Lam)):
        return None
    inner = op.body.body
    if not (isinstance(inner, App) and isinstance(inner.fn, App)
            and _is_prim(inner.fn.fn, "add")
            and isinstance(inner.fn.arg, Var) and inner.fn.arg.name == op.param
            and op.param not in free_vars(inner.arg)):
        return None
    return app(Prim(HL_REDUCE), op, a, xs)


absorb_reduce_init = rule("absorbReduceInit", _absorb_reduce_init)


# ---------------------------------------------------------------------------
# lowering

def _rewrite_head(t, mapping):
    if isinstance(t, Prim) and t.kind in mapping:
        return Prim(mapping[t.kind], t.nats)
    h, args = spine(t)
    if isinstance(h, Prim) and h.kind in mapping:
        return app(Prim(mapping[h.kind], h.nats), *args)
    return None


parallel = rule("parallel", lambda t, ctx: _rewrite_head(t, {"map": "mapPar"}))
sequential = rule("sequential",
                  lambda t, ctx: _rewrite_head(t, {"map": "mapSeq", "reduce": "reduceSeq"}))
unroll = rule("unroll",
              lambda t, ctx: _rewrite_head(t, {"map": "mapSeqUnroll",
                                               "reduce": "reduceSeqUnroll"}))


def make_vectorize(n: int) -> Strategy:
    def fn(t, ctx):
        full = _full_map(t)
        partial = None
        if full is None:
            if isinstance(t, App) and _is_prim(t.fn, HL_MAP):
                partial = t.arg
            else:
                return None
        f = full[0] if full else partial
        fty = try_infer(f, _infer_env(ctx))
        if not (isinstance(fty, FnType) and fty.res == F32
                and is_scalar_pair_tree(fty.arg)):
            return None

        def pipeline(xs):
            if fty.arg == F32:
                return App(Prim("asScalar"),
                           app(Prim(HL_MAP), App(Prim("mapVec"), f),
                               App(prim("asVector", n), xs)))
            # pairs of scalars: strip-mine into simd-marked chunks
            return App(Prim("join"),
                       app(Prim(HL_MAP), App(Prim("mapVec"), f),
                           App(prim("split", n), xs)))

        if full:
            xs = full[1]
            ty = try_infer(xs, _infer_env(ctx))
            if isinstance(ty, ArrType) and isinstance(ty.size, int) and ty.size % n != 0:
                return None
            return pipeline(xs)
        xs = fresh("xs")
        return Lam(xs, pipeline(Var(xs)))

    return rule("vectorize", fn, params=(str(n),))


def _to_mem_after(t, ctx):
    if isinstance(t, App) and _is_prim(t.fn, "toMem"):
        return None
    if isinstance(t, (Prim, Lam)):
        return None
    ty = try_infer(t, _infer_env(ctx))
    if isinstance(ty, FnType):
        return None
    return App(Prim("toMem"), t)


to_mem_after = rule("toMemAfter", _to_mem_after)


# ---------------------------------------------------------------------------
# domain-specific rules

def _dot_mult_lambda():
    p = fresh("p")
    return Lam(p, app(Prim("mult"), App(Prim("fst"), Var(p)),
                      App(Prim("snd"), Var(p))))


def _dot_expansion(w, x):
    return app(Prim(HL_REDUCE), Prim("add"), Lit(0.0),
               app(Prim(HL_MAP), _dot_mult_lambda(), app(Prim("zip"), w, x)))


def _is_add_op(op):
    if _is_prim(op, "add"):
        return True
    # eta-expanded form fun(a => fun(x => add a x))
    canon = Lam("a", Lam("x", app(Prim("add"), Var("a"), Var("x"))))
    return alpha_eq(op, canon)


def _is_dot_mult(f):
    return alpha_eq(f, _dot_mult_lambda())


def make_separate_dot(w2d, wh, wv) -> Strategy:
    """Separate `dot (join w2d) (join nbh)` into horizontal and vertical
    one-dimensional passes; the caller asserts wh (x) wv factorizes w2d."""

    def fn(t, ctx):
        h, args = spine(t)
        if not (_is_prim(h, HL_REDUCE) and len(args) == 3):
            return None
        op, init, mapped = args
        if not _is_add_op(op) or not (isinstance(init, Lit) and init.value == 0.0):
            return None
        m = _full_map(mapped)
        if m is None or not _is_dot_mult(m[0]):
            return None
        zh, zargs = spine(m[1])
        if not (_is_prim(zh, "zip") and len(zargs) == 2):
            return None
        wside, nside = zargs
        if not (isinstance(wside, App) and _is_prim(wside.fn, "join")
                and isinstance(nside, App) and _is_prim(nside.fn, "join")):
            return None
        if not alpha_eq(wside.arg, w2d):
            return None
        nbh = nside.arg
        r = fresh("row")
        horiz = app(Prim(HL_MAP), Lam(r, _dot_expansion(refresh(wh), Var(r))), nbh)
        return _dot_expansion(refresh(wv), horiz)

    return rule("separateDot", fn, params=("w2d", "wh", "wv"))


def make_pack_b(block: int = 32) -> Strategy:
    """Array packing of the second matrix: materialize B reshaped to
    N/block . K . block with explicit copy loops, consumed through views."""

    def fn(t, ctx):
        outer = _full_map(t)
        if outer is None or not isinstance(outer[0], Lam):
            return None
        fa, a_in = outer
        inner = _full_map(fa.body)
        if inner is None or not isinstance(inner[0], Lam):
            return None
        fc, cols = inner
        if not (isinstance(cols, App) and _is_prim(cols.fn, "transpose")):
            return None
        if not is_prim_headed_reduce(fc.body):
            return None
        b = cols.arg
        ty = try_infer(cols, _infer_env(ctx))
        if isinstance(ty, ArrType) and isinstance(ty.size, int) and ty.size % block != 0:
            return None
        blk, kr, e = fresh("blk"), fresh("kr"), fresh("e")
        copy_row = app(Prim(HL_MAP), Lam(e, Var(e)), Var(kr))
        copy_blk = app(Prim(HL_MAP), Lam(kr, copy_row),
                       App(Prim("transpose"), Var(blk)))
        packed = App(Prim("toMem"),
                     app(Prim(HL_MAP), Lam(blk, copy_blk),
                         App(prim("split", block), App(Prim("transpose"), b))))
        unpacked = App(Prim("join"),
                       app(Prim(HL_MAP), Prim("transpose"), packed))
        new_inner = app(Prim(HL_MAP), fc, unpacked)
        return app(Prim(HL_MAP), Lam(fa.param, new_inner, fa.param_type), a_in)

    return rule("packB", fn)


def is_prim_headed_reduce(e):
    h = spine_head(e)
    return isinstance(h, Prim) and h.kind in ("reduce", "reduceSeq", "reduceSeqUnroll")


# ---------------------------------------------------------------------------
# registry

RULES = {
    "betaReduction": beta_reduction,
    "etaReduction": eta_reduction,
    "etaAbstraction": eta_abstraction,
    "mapFusion": map_fusion,
    "mapFission": map_fission,
    "fuseReduceMap": fuse_reduce_map,
    "idAfter": id_after,
    "createTransposePair": create_transpose_pair,
    "mapMapFBeforeTranspose": map_map_f_before_transpose,
    "transposeBeforeMapMapF": transpose_before_map_map_f,
    "mapMapInterchange": map_map_interchange,
    "splitBeforeMap": split_before_map,
    "liftReduce": lift_reduce,
    "absorbReduceInit": absorb_reduce_init,
    "parallel": parallel,
    "sequential": sequential,
    "unroll": unroll,
    "toMemAfter": to_mem_after,
    "packB": make_pack_b(),
}

PARAMETRIC_RULES = {
    "splitJoin": make_split_join,
    "splitReduce": make_split_reduce,
    "split": make_split,
    "vectorize": make_vectorize,
}
