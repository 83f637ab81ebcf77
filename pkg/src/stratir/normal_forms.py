"""Named normal forms: the syntactic preconditions of the scheduling strategies.

BENF exhaustively beta/eta-reduces.  DFNF additionally makes the function
argument of every map a lambda and brings reduce operators into two-lambda
form.  RNF fissions maps as far as possible, interleaving BENF cleanup after
each fission so newly exposed redexes do not accumulate.
"""

from __future__ import annotations

from .ir import MAP_KINDS, REDUCE_KINDS, Prim, spine
from .rules import (
    beta_reduction, eta_abstraction, eta_reduction, map_fission, sequential,
)
from .strategy import Strategy, lchoice, not_, repeat, seq, try_
from .traversals import (
    argument_of, body, is_fun, normalize, top_down, try_all,
)

BENF = Strategy("BENF",
                normalize(lchoice(beta_reduction, eta_reduction)).fn)


def _abstract_args() -> Strategy:
    want_lambda = seq(not_(is_fun), eta_abstraction)
    steps = [normalize(argument_of(k, want_lambda)) for k in MAP_KINDS]
    steps += [normalize(argument_of(k, want_lambda)) for k in REDUCE_KINDS]
    # second abstraction level for reduce operators: fun(a => op a) becomes
    # fun(a => fun(x => op a x))
    steps += [normalize(argument_of(k, body(want_lambda))) for k in REDUCE_KINDS]
    return seq(*steps)


DFNF = Strategy("DFNF", seq(BENF, _abstract_args()).fn)

RNF = Strategy("RNF", seq(BENF, repeat(seq(top_down(map_fission), BENF))).fn)


def dfnf_seq(a: Strategy, b: Strategy) -> Strategy:
    """The schedules' `;;`: normalize with DFNF between the two steps."""
    inner = seq(a, DFNF, b)
    return Strategy("dfnfSeq", inner.fn, params=(a.identity, b.identity))


LOWER_TO_C = Strategy("lowerToC", seq(BENF, try_all(sequential), BENF).fn)


def is_fully_lowered(e) -> bool:
    from .ir import subterms
    for t in subterms(e):
        if isinstance(t, Prim) and t.kind in ("map", "reduce"):
            return False
    return True
