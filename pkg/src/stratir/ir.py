"""AST for the functional array IR: terms, substitution, parsing and printing.

Terms follow the Barendregt convention: every binder introduced by the parser
or by a rewrite carries a globally unique name.  Substitution restores the
convention by refreshing the binders of each inserted copy.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

# ---------------------------------------------------------------------------
# types

F32 = "f32"  # the only scalar


@dataclass(frozen=True)
class VecType:
    width: int

    def __str__(self):
        return f"vec<{self.width}>"


@dataclass(frozen=True)
class ArrType:
    size: object  # int once resolved, SizeVar during inference
    elem: "DataType"

    def __str__(self):
        return f"{self.size}.{self.elem}"


@dataclass(frozen=True)
class PairType:
    fst: "DataType"
    snd: "DataType"

    def __str__(self):
        return f"({self.fst} x {self.snd})"


@dataclass(frozen=True)
class FnType:
    arg: "DataType"
    res: "DataType"

    def __str__(self):
        return f"({self.arg} -> {self.res})"


DataType = Union[str, VecType, ArrType, PairType, FnType]


def arr(*dims_then_elem) -> DataType:
    """arr(4, 3, F32) == ArrType(4, ArrType(3, F32))."""
    *dims, elem = dims_then_elem
    for d in reversed(dims):
        elem = ArrType(d, elem)
    return elem


# ---------------------------------------------------------------------------
# terms

_fresh_counter = itertools.count()


def fresh(hint: str = "x") -> str:
    base = hint.split("_")[0] if hint else "x"
    return f"{base}_{next(_fresh_counter)}"


@dataclass(frozen=True, eq=False)
class Var:
    name: str


@dataclass(frozen=True, eq=False)
class Lam:
    param: str
    body: "Expr"
    param_type: Optional[DataType] = field(default=None, compare=False)


@dataclass(frozen=True, eq=False)
class App:
    fn: "Expr"
    arg: "Expr"


@dataclass(frozen=True, eq=False)
class Prim:
    kind: str
    nats: tuple = ()


@dataclass(frozen=True, eq=False)
class Lit:
    # float for scalars, nested tuples of floats for array constants
    value: object


Expr = Union[Var, Lam, App, Prim, Lit]

MAP_KINDS = ("map", "mapSeq", "mapPar", "mapSeqUnroll", "mapVec")
REDUCE_KINDS = ("reduce", "reduceSeq", "reduceSeqUnroll")
NAT_PRIMS = {"split": 1, "slide": 2, "padClamp": 2, "asVector": 1}
PLAIN_PRIMS = (
    "zip", "fst", "snd", "join", "transpose", "asScalar", "toMem",
    "add", "mult", "id",
)
ALL_PRIMS = MAP_KINDS + REDUCE_KINDS + tuple(NAT_PRIMS) + PLAIN_PRIMS

HIGH_LEVEL = ("map", "reduce")


def app(fn: Expr, *args: Expr) -> Expr:
    for a in args:
        fn = App(fn, a)
    return fn


def prim(kind: str, *nats: int) -> Prim:
    return Prim(kind, tuple(nats))


def lam(param: str, body: Expr, param_type=None) -> Lam:
    return Lam(param, body, param_type)


def spine(e: Expr):
    """Decompose nested applications: spine(f(a)(b)) == (f, [a, b])."""
    args = []
    while isinstance(e, App):
        args.append(e.arg)
        e = e.fn
    args.reverse()
    return e, args


def spine_head(e: Expr) -> Optional[Expr]:
    h, _ = spine(e)
    return h


def is_prim_headed(e: Expr, *kinds: str) -> bool:
    h = spine_head(e)
    return isinstance(h, Prim) and h.kind in kinds


def children(e: Expr) -> list:
    if isinstance(e, App):
        return [e.fn, e.arg]
    if isinstance(e, Lam):
        return [e.body]
    return []


def with_child(e: Expr, i: int, c: Expr) -> Expr:
    if isinstance(e, App):
        return App(c, e.arg) if i == 0 else App(e.fn, c)
    if isinstance(e, Lam):
        return Lam(e.param, c, e.param_type)
    raise ValueError(f"node has no child {i}")


def subterms(e: Expr) -> Iterator[Expr]:
    yield e
    for c in children(e):
        yield from subterms(c)


def size(e: Expr) -> int:
    return sum(1 for _ in subterms(e))


def free_vars(e: Expr) -> set:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Lam):
        return free_vars(e.body) - {e.param}
    if isinstance(e, App):
        return free_vars(e.fn) | free_vars(e.arg)
    return set()


def refresh(e: Expr) -> Expr:
    """Rename every binder in e to a globally fresh name."""

    def go(e, ren):
        if isinstance(e, Var):
            return Var(ren.get(e.name, e.name))
        if isinstance(e, Lam):
            p = fresh(e.param)
            return Lam(p, go(e.body, {**ren, e.param: p}), e.param_type)
        if isinstance(e, App):
            return App(go(e.fn, ren), go(e.arg, ren))
        return e

    return go(e, {})


def substitute(e: Expr, name: str, replacement: Expr) -> Expr:
    """Capture-avoiding substitution e[name := replacement].

    Each inserted copy of the replacement gets fresh binders, keeping all
    binders in the result globally unique.
    """
    repl_free = free_vars(replacement)

    def go(e):
        if isinstance(e, Var):
            return refresh(replacement) if e.name == name else e
        if isinstance(e, Lam):
            if e.param == name:
                return e
            if e.param in repl_free and name in free_vars(e.body):
                p = fresh(e.param)
                body = go(_rename_var(e.body, e.param, p))
                return Lam(p, body, e.param_type)
            return Lam(e.param, go(e.body), e.param_type)
        if isinstance(e, App):
            return App(go(e.fn), go(e.arg))
        return e

    return go(e)


def _rename_var(e: Expr, old: str, new: str) -> Expr:
    if isinstance(e, Var):
        return Var(new) if e.name == old else e
    if isinstance(e, Lam):
        if e.param == old:
            return e
        return Lam(e.param, _rename_var(e.body, old, new), e.param_type)
    if isinstance(e, App):
        return App(_rename_var(e.fn, old, new), _rename_var(e.arg, old, new))
    return e


def alpha_eq(a: Expr, b: Expr) -> bool:
    """Structural equality up to consistent renaming of bound variables."""

    def go(a, b, env):
        if isinstance(a, Var) and isinstance(b, Var):
            return env.get(a.name, a.name) == b.name
        if isinstance(a, Lam) and isinstance(b, Lam):
            return go(a.body, b.body, {**env, a.param: b.param})
        if isinstance(a, App) and isinstance(b, App):
            return go(a.fn, b.fn, env) and go(a.arg, b.arg, env)
        if isinstance(a, Prim) and isinstance(b, Prim):
            return a.kind == b.kind and a.nats == b.nats
        if isinstance(a, Lit) and isinstance(b, Lit):
            return a.value == b.value
        return False

    return go(a, b, {})


# ---------------------------------------------------------------------------
# beta/eta normalisation (plain functions, used by the parser and as an
# independent oracle for the strategy-level normal forms)

def beta_step(e: Expr):
    """One leftmost-outermost beta reduction, or None."""
    if isinstance(e, App) and isinstance(e.fn, Lam):
        return substitute(e.fn.body, e.fn.param, e.arg)
    for i, c in enumerate(children(e)):
        r = beta_step(c)
        if r is not None:
            return with_child(e, i, r)
    return None


def eta_step(e: Expr):
    """One leftmost-outermost eta reduction, or None."""
    if (isinstance(e, Lam) and isinstance(e.body, App)
            and isinstance(e.body.arg, Var) and e.body.arg.name == e.param
            and e.param not in free_vars(e.body.fn)):
        return e.body.fn
    for i, c in enumerate(children(e)):
        r = eta_step(c)
        if r is not None:
            return with_child(e, i, r)
    return None


def benf_term(e: Expr, limit: int = 100000) -> Expr:
    """Beta-eta normal form by exhaustive reduction (independent of the
    strategy machinery)."""
    for _ in range(limit):
        r = beta_step(e)
        if r is None:
            r = eta_step(e)
        if r is None:
            return e
        e = r
    raise RuntimeError("benf_term: reduction limit exceeded")


# ---------------------------------------------------------------------------
# printing

def _format_scalar(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return f"{v:.1f}"
    return repr(v)


def _format_lit(v) -> str:
    if isinstance(v, tuple):
        return "[" + ", ".join(_format_lit(x) for x in v) + "]"
    return _format_scalar(float(v))


def format_type(t: DataType) -> str:
    if isinstance(t, ArrType):
        return f"{t.size}.{format_type(t.elem)}"
    if isinstance(t, VecType):
        return f"vec<{t.width}>"
    if isinstance(t, PairType):
        return f"pair<{format_type(t.fst)}, {format_type(t.snd)}>"
    if isinstance(t, FnType):
        return f"({format_type(t.arg)} -> {format_type(t.res)})"
    return str(t)


def pretty(e: Expr, annotate_params: bool = True) -> str:
    """Canonical text form; binders are renumbered x0, x1, ... so that
    alpha-equivalent terms print identically."""
    counter = itertools.count()

    def go(e, ren, top):
        if isinstance(e, Var):
            return ren.get(e.name, e.name)
        if isinstance(e, Lam):
            p = f"x{next(counter)}"
            body = go(e.body, {**ren, e.param: p}, top)
            if annotate_params and e.param_type is not None and _ground(e.param_type):
                return f"fun({p} : {format_type(e.param_type)} => {body})"
            return f"fun({p} => {body})"
        if isinstance(e, App):
            f = go(e.fn, ren, top)
            a = go(e.arg, ren, top)
            if isinstance(e.fn, Lam):
                f = f"({f})"
            return f"{f}({a})"
        if isinstance(e, Prim):
            if e.nats:
                return f"{e.kind}({', '.join(str(n) for n in e.nats)})"
            return e.kind
        if isinstance(e, Lit):
            return _format_lit(e.value)
        raise TypeError(f"not an expression: {e!r}")

    return go(e, {}, True)


def _ground(t) -> bool:
    if isinstance(t, ArrType):
        return isinstance(t.size, int) and _ground(t.elem)
    if isinstance(t, (PairType, FnType)):
        a, b = (t.fst, t.snd) if isinstance(t, PairType) else (t.arg, t.res)
        return _ground(a) and _ground(b)
    return isinstance(t, (str, VecType))


# ---------------------------------------------------------------------------
# parsing

class ParseError(Exception):
    def __init__(self, msg, pos=None):
        super().__init__(msg if pos is None else f"{msg} (at {pos})")
        self.pos = pos


_SYMBOLS = ["|>", "=>", "->", "(", ")", "[", "]", ",", ";", ":", "=", ".", "*", "+"]


def _tokenize(src: str):
    toks = []
    i, n = 0, len(src)
    line = 1
    while i < n:
        c = src[i]
        if c == "\n":
            line += 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            continue
        if src.startswith("//", i):
            while i < n and src[i] != "\n":
                i += 1
            continue
        matched = False
        for s in _SYMBOLS:
            if src.startswith(s, i):
                toks.append((s, s, line))
                i += len(s)
                matched = True
                break
        if matched:
            continue
        if c.isdigit() or (c == "-" and i + 1 < n and src[i + 1].isdigit()):
            j = i + 1
            while j < n and src[j].isdigit():
                j += 1
            # fractional part only when followed by a digit, so that sizes in
            # types like 3.3.f32 stay separate tokens
            if j < n and src[j] == "." and j + 1 < n and src[j + 1].isdigit():
                j += 1
                while j < n and src[j].isdigit():
                    j += 1
                if j < n and src[j] in "eE":
                    j += 1
                    if j < n and src[j] in "+-":
                        j += 1
                    while j < n and src[j].isdigit():
                        j += 1
                toks.append(("num", src[i:j], line))
            else:
                toks.append(("int", src[i:j], line))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            toks.append(("name", src[i:j], line))
            i = j
            continue
        raise ParseError(f"unexpected character {c!r}", f"line {line}")
    toks.append(("eof", "", line))
    return toks


class _Parser:
    def __init__(self, toks, sizes):
        self.toks = toks
        self.pos = 0
        self.sizes = dict(sizes)
        self.defs: dict[str, Expr] = {}

    def peek(self):
        return self.toks[self.pos]

    def next(self):
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, kind):
        t = self.next()
        if t[0] != kind:
            raise ParseError(f"expected {kind!r}, got {t[1]!r}", f"line {t[2]}")
        return t

    def error(self, msg):
        t = self.peek()
        raise ParseError(msg, f"line {t[2]}")

    # -- statements --

    def program(self):
        while self.peek()[0] != "eof":
            t = self.peek()
            if t[0] == "name" and t[1] == "size":
                self.next()
                name = self.expect("name")[1]
                self.expect("=")
                val = int(self.expect("int")[1])
                self.expect(";")
                self.sizes.setdefault(name, val)
            elif t[0] == "name" and t[1] == "def":
                self.next()
                name = self.expect("name")[1]
                self.expect("=")
                body = self.expr({})
                self.expect(";")
                fv = free_vars(body)
                if fv:
                    self.error(f"unbound variable(s) {sorted(fv)} in def {name}")
                self.defs[name] = benf_term(body)
            else:
                self.error(f"expected 'size' or 'def', got {t[1]!r}")
        if not self.defs:
            raise ParseError("no definitions in program")
        return self.defs

    # -- expressions --

    def expr(self, scope):
        e = self.app_expr(scope)
        while self.peek()[:2] == ("|>", "|>"):
            self.next()
            f = self.app_expr(scope)
            e = App(f, e)
        return e

    def app_expr(self, scope):
        e = self.atom(scope)
        while self.peek()[0] == "(":
            self.next()
            args = [self.expr(scope)]
            while self.peek()[0] == ",":
                self.next()
                args.append(self.expr(scope))
            self.expect(")")
            for a in args:
                e = App(e, a)
        return e

    def nat_args(self, count, what):
        self.expect("(")
        nats = [self.nat()]
        while self.peek()[0] == ",":
            self.next()
            nats.append(self.nat())
        self.expect(")")
        while len(nats) < count and self.peek()[0] == "(":
            self.next()
            nats.append(self.nat())
            self.expect(")")
        if len(nats) != count:
            self.error(f"{what} takes {count} size argument(s)")
        return nats

    def nat(self):
        t = self.next()
        if t[0] == "int":
            v = int(t[1])
        elif t[0] == "name" and t[1] in self.sizes:
            v = self.sizes[t[1]]
        else:
            raise ParseError(f"expected a size, got {t[1]!r}", f"line {t[2]}")
        if v < 1:
            raise ParseError(f"sizes must be positive, got {v}", f"line {t[2]}")
        return v

    def atom(self, scope):
        t = self.next()
        if t[0] == "(":
            e = self.expr(scope)
            self.expect(")")
            return e
        if t[0] == "[":
            return Lit(self.array_literal())
        if t[0] in ("int", "num"):
            return Lit(float(t[1]))
        if t[0] == "*":
            return _macro_mult_pair()
        if t[0] == "+":
            return Prim("add")
        if t[0] != "name":
            raise ParseError(f"unexpected token {t[1]!r}", f"line {t[2]}")
        name = t[1]
        if name == "fun":
            return self.fun_expr(scope)
        if name in NAT_PRIMS:
            return Prim(name, tuple(self.nat_args(NAT_PRIMS[name], name)))
        if name in ALL_PRIMS:
            return Prim(name)
        if name in _MACROS:
            return _MACROS[name](self)
        if name in scope:
            return Var(scope[name])
        if name in self.defs:
            return refresh(self.defs[name])
        raise ParseError(f"unbound variable {name!r}", f"line {t[2]}")

    def fun_expr(self, scope):
        self.expect("(")
        pname = self.expect("name")[1]
        ptype = None
        if self.peek()[0] == ":":
            self.next()
            ptype = self.type_expr()
        self.expect("=>")
        uniq = fresh(pname)
        body = self.expr({**scope, pname: uniq})
        self.expect(")")
        return Lam(uniq, body, ptype)

    def array_literal(self):
        elems = []
        while True:
            t = self.next()
            if t[0] == "[":
                elems.append(self.array_literal())
            elif t[0] in ("int", "num"):
                elems.append(float(t[1]))
            else:
                raise ParseError("array literals hold numbers", f"line {t[2]}")
            t = self.next()
            if t[0] == "]":
                return tuple(elems)
            if t[0] != ",":
                raise ParseError("expected ',' or ']'", f"line {t[2]}")

    def type_expr(self):
        dims = []
        while True:
            t = self.next()
            if t[0] == "int":
                dims.append(int(t[1]))
            elif t[0] == "num":
                # '64.64' lexes as one number; both parts are dims
                dims.extend(int(p) for p in t[1].split("."))
            elif t[0] == "name":
                if t[1] == "f32":
                    ty = F32
                    break
                if t[1] in self.sizes:
                    dims.append(self.sizes[t[1]])
                else:
                    raise ParseError(f"unbound size {t[1]!r}", f"line {t[2]}")
            else:
                raise ParseError(f"bad type token {t[1]!r}", f"line {t[2]}")
            self.expect(".")
        return arr(*dims, ty) if dims else ty


# -- macros: compositions of the one-dimensional primitives --

def _macro_mult_pair():
    # map(*) maps over zipped pairs
    p = fresh("p")
    return Lam(p, app(Prim("mult"), App(Prim("fst"), Var(p)), App(Prim("snd"), Var(p))))


def _macro_dot(_):
    x, y = fresh("x"), fresh("y")
    body = app(Prim("reduce"), Prim("add"), Lit(0.0),
               app(Prim("map"), _macro_mult_pair(),
                   app(Prim("zip"), Var(x), Var(y))))
    return Lam(x, Lam(y, body))


def _macro_map2d(_):
    f, m = fresh("f"), fresh("m")
    return Lam(f, Lam(m, app(Prim("map"), App(Prim("map"), Var(f)), Var(m))))


def _macro_pad2d(p):
    (l,) = p.nat_args(1, "pad2D")
    m = fresh("m")
    pad = Prim("padClamp", (l, l))
    return Lam(m, app(Prim("map"), pad, App(pad, Var(m))))


def _macro_slide2d(p):
    sz, st = p.nat_args(2, "slide2D")
    m, t = fresh("m"), fresh("t")
    sl = Prim("slide", (sz, st))
    inner = Lam(t, App(Prim("transpose"), app(Prim("map"), sl, Var(t))))
    return Lam(m, app(Prim("map"), inner, App(sl, Var(m))))


_MACROS = {
    "dot": _macro_dot,
    "map2D": _macro_map2d,
    "pad2D": _macro_pad2d,
    "slide2D": _macro_slide2d,
}


def parse_program(source: str, sizes: Optional[dict] = None) -> dict:
    """Parse a .rise program; returns the dict of definitions (macro-expanded,
    beta-eta normal, globally fresh binders)."""
    p = _Parser(_tokenize(source), sizes or {})
    return p.program()


def parse(source: str, sizes: Optional[dict] = None) -> Expr:
    """Parse a program and return its last definition."""
    defs = parse_program(source, sizes)
    return list(defs.values())[-1]
